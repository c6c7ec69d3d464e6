"""Per-node stack-vector routing state machine.

A node advertises ``(dest, stack, cost)`` meaning "hand me a packet for
``dest`` carrying ``stack`` and it gets there at ``cost``". On receipt it
tries every local adaptation function ``f`` backwards: if the neighbor can
deliver stack ``H`` then this node can deliver ``reverse(f)(H)`` by applying
``f`` and forwarding to that neighbor.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

from .core import AdaptationFunction, Stack, apply, reverse
from .network import MAX_COST, Network, NodeId, node_id_bytes, node_id_from_bytes


class Mode(enum.Enum):
    THEORETICAL = "theoretical"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class EngineConfig:
    h_max: int = 3
    mode: Mode = Mode.BOUNDED

    def __post_init__(self):
        if self.h_max < 1:
            raise ValueError(f"h_max must be >= 1, got {self.h_max}")

    @classmethod
    def theoretical(cls) -> "EngineConfig":
        return cls(h_max=1, mode=Mode.THEORETICAL)

    def effective_h_max(self, net: Network) -> int:
        if self.mode is Mode.THEORETICAL:
            return net.alpha * net.n * net.n
        return self.h_max


class ControlMessage(NamedTuple):
    dest: NodeId
    stack: Stack
    cost: int


class RoutingRow(NamedTuple):
    dest: NodeId
    stack: Stack
    cost: int
    next_hop: NodeId
    function: AdaptationFunction


class CostOverflowError(OverflowError):
    pass


class RoutingTable:
    """Rows keyed by ``(dest, stack)``; a key's cost only ever decreases."""

    def __init__(self):
        self._rows: Dict[Tuple[NodeId, Stack], Tuple[int, NodeId, AdaptationFunction]] = {}

    def add(self, row: RoutingRow) -> bool:
        """Insert, or overwrite on strictly lower cost. True if modified."""
        key = (row.dest, row.stack)
        current = self._rows.get(key)
        if current is not None and current[0] <= row.cost:
            return False
        self._rows[key] = (row.cost, row.next_hop, row.function)
        return True

    def lookup(self, dest: NodeId, stack: Stack) -> Optional[RoutingRow]:
        hit = self._rows.get((dest, stack))
        if hit is None:
            return None
        return RoutingRow(dest, stack, *hit)

    def __contains__(self, key) -> bool:
        return key in self._rows

    def __len__(self):
        return len(self._rows)

    def __iter__(self) -> Iterator[RoutingRow]:
        for (dest, stack), hit in sorted(self._rows.items()):
            yield RoutingRow(dest, stack, *hit)

    def costs(self) -> Dict[Tuple[NodeId, Stack], int]:
        return {key: hit[0] for key, hit in self._rows.items()}

    def copy(self) -> "RoutingTable":
        clone = RoutingTable()
        clone._rows = dict(self._rows)
        return clone


def max_rows(n: int, alpha: int, h_max: int) -> int:
    """Upper bound on table size: one row per destination and stack of height <= h_max."""
    return n * sum(alpha**h for h in range(1, h_max + 1))


class NodeEngine:
    """Control-plane state of one node. Not thread-safe; feed it one message at a time."""

    def __init__(self, net: Network, node: NodeId, cfg: EngineConfig):
        self.id = node
        self.neighbors = net.neighbors(node)
        self.in_set = net.in_set(node)
        self.h_limit = cfg.effective_h_max(net)
        self.table = RoutingTable()
        # (f, reverse(f), cost to each neighbor) in canonical function order
        self._rules = [
            (f, reverse(f), {v: net.weight(node, f, v) for v in self.neighbors})
            for f in net.nodes[node].sorted_functions
        ]

    def initial_messages(self) -> List[Tuple[NodeId, ControlMessage]]:
        out = []
        for x in sorted(self.in_set):
            msg = ControlMessage(self.id, (x,), 0)
            out.extend((v, msg) for v in self.neighbors)
        return out

    def handle_message(
        self, msg: ControlMessage, sender: NodeId, events: Optional[list] = None
    ) -> List[Tuple[NodeId, ControlMessage]]:
        """Process one advertisement from ``sender``; return what to send next.

        ``events``, when given, collects ``(kind, row)`` pairs with kind
        ``ROW_INSERT`` or ``ROW_UPDATE`` for tracing.
        """
        out: List[Tuple[NodeId, ControlMessage]] = []
        table = self.table
        for f, rev, costs in self._rules:
            stack = apply(rev, msg.stack)
            if stack is None or len(stack) > self.h_limit:
                continue
            if msg.dest == self.id and len(stack) == 1 and stack[0] in self.in_set:
                continue  # own delivery state, cost 0 already advertised
            cost = msg.cost + costs[sender]
            if cost > MAX_COST:
                raise CostOverflowError(f"cost {cost} overflows at {self.id}")
            row = RoutingRow(msg.dest, stack, cost, sender, f)
            existed = events is not None and (row.dest, stack) in table
            if not table.add(row):
                continue
            if events is not None:
                events.append(("ROW_UPDATE" if existed else "ROW_INSERT", row))
            advert = ControlMessage(msg.dest, stack, cost)
            out.extend((w, advert) for w in self.neighbors)
        return out


# -- control-message wire encoding --------------------------------------------

_COST = struct.Struct(">Q")


def control_message_size(height: int) -> int:
    return 16 + 1 + height + 8


def encode_control(msg: ControlMessage) -> bytes:
    h = len(msg.stack)
    if not 1 <= h <= 255:
        raise ValueError(f"stack height {h} does not fit the 1-byte height field")
    return (
        node_id_bytes(msg.dest)
        + bytes([h])
        + bytes(reversed(msg.stack))
        + _COST.pack(msg.cost)
    )


def decode_control(buf: bytes) -> ControlMessage:
    if len(buf) < 17:
        raise ValueError("truncated control message")
    h = buf[16]
    if h == 0 or len(buf) != control_message_size(h):
        raise ValueError(f"bad control message length {len(buf)} for height {h}")
    stack = tuple(reversed(buf[17 : 17 + h]))
    (cost,) = _COST.unpack_from(buf, 17 + h)
    return ControlMessage(node_id_from_bytes(buf[:16]), stack, cost)
