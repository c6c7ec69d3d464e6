from pathlib import Path

import pytest
from hypothesis import strategies as st

from stackvector import network
from stackvector.core import AdaptationFunction, Kind

DATA = Path(__file__).parent / "data"

ALPHA = 3
protocols = st.integers(0, ALPHA - 1)
stacks = st.lists(protocols, min_size=1, max_size=6).map(tuple)
functions = st.builds(AdaptationFunction, st.sampled_from(list(Kind)), protocols, protocols)


@pytest.fixture
def line3():
    """S -- M -- D; S retransmits a, M converts a to b, D receives b."""
    return network.load(DATA / "line3.json")


@pytest.fixture
def loop_tunnel():
    """Two-protocol network whose shortest S->D path loops through U1 twice."""
    return network.load(DATA / "loop_tunnel.json")


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
