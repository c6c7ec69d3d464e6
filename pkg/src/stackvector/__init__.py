"""Stack-vector routing: distributed routing over heterogeneous protocol stacks."""

from .core import AdaptationFunction, Alphabet, Kind, conv, dec, enc
from .engine import EngineConfig, RoutingTable
from .network import Network, generate_random, load, loads
from .simulator import run_to_quiescence

__all__ = [
    "AdaptationFunction", "Alphabet", "Kind", "conv", "enc", "dec",
    "EngineConfig", "RoutingTable", "Network", "generate_random", "load", "loads",
    "run_to_quiescence",
]  # fmt: skip
__version__ = "0.1.0"
