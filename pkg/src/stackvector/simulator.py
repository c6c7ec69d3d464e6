"""Synchronized-round execution of the routing engine.

Round 0 runs node initialization. In every later round each node receives
everything sent to it in the previous round, processes it, and whatever it
emits is delivered in the next round. Nodes are processed in id order and an
inbox keeps sender order, then emission order, so runs are deterministic.
"""

from __future__ import annotations

import copy
import csv
import io
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .engine import ControlMessage, EngineConfig, NodeEngine, RoutingTable
from .network import Network, NodeId

Inbox = List[Tuple[NodeId, ControlMessage]]


class NonConvergenceError(RuntimeError):
    def __init__(self, state: "RoundState", max_rounds: int):
        self.state = state
        super().__init__(f"no quiescence within {max_rounds} rounds")


@dataclass
class SimMetrics:
    rounds_to_quiescence: int
    total_messages: int
    max_message_stack_height: int
    row_counts: Dict[NodeId, int]
    wall_time: float = 0.0

    @property
    def total_rows(self) -> int:
        return sum(self.row_counts.values())


class RoundState:
    """All node engines plus the messages in flight towards the next round."""

    def __init__(
        self,
        net: Network,
        cfg: EngineConfig,
        trace: bool = False,
        record_history: bool = False,
    ):
        self.net = net
        self.cfg = cfg
        self.engines: Dict[NodeId, NodeEngine] = {u: NodeEngine(net, u, cfg) for u in net.node_ids}
        self.t = 0
        self.in_flight: Dict[NodeId, Inbox] = {}
        self.quiescent = False
        self.total_messages = 0
        self.max_height = 0
        self.trace: Optional[List[str]] = [] if trace else None
        self.history: Optional[Dict[NodeId, Inbox]] = (
            {u: [] for u in self.engines} if record_history else None
        )
        self.messages_per_round: List[int] = []
        for u, engine in self.engines.items():
            self._send(u, engine.initial_messages(), self.in_flight)
        self.messages_per_round.append(self.total_messages)

    @property
    def tables(self) -> Dict[NodeId, RoutingTable]:
        return {u: e.table for u, e in self.engines.items()}

    def _send(self, sender: NodeId, emitted, queue: Dict[NodeId, Inbox]) -> None:
        if not emitted:
            return
        self.total_messages += len(emitted)
        for receiver, msg in emitted:
            queue.setdefault(receiver, []).append((sender, msg))
            h = len(msg.stack)
            if h > self.max_height:
                self.max_height = h
            if self.trace is not None:
                self._log("SEND", sender, receiver, msg.dest, msg.stack, msg.cost)

    def _log(self, event, node, peer, dest, stack, cost) -> None:
        fmt = self.net.alphabet.format_stack
        self.trace.append(f"{self.t}\t{event}\t{node}\t{peer}\t{dest}\t{fmt(stack)}\t{cost}")

    def metrics(self, wall_time: float = 0.0) -> SimMetrics:
        return SimMetrics(
            rounds_to_quiescence=self.t,
            total_messages=self.total_messages,
            max_message_stack_height=self.max_height,
            row_counts={u: len(e.table) for u, e in self.engines.items()},
            wall_time=wall_time,
        )


def step_round(state: RoundState) -> RoundState:
    """Deliver everything in flight, in one synchronized round."""
    if not state.in_flight:
        state.quiescent = True
        return state
    state.t += 1
    delivering, state.in_flight = state.in_flight, {}
    before = state.total_messages
    tracing = state.trace is not None
    for u, engine in state.engines.items():
        inbox = delivering.get(u)
        if not inbox:
            continue
        if state.history is not None:
            state.history[u].extend(inbox)
        for sender, msg in inbox:
            events = [] if tracing else None
            if tracing:
                state._log("RECV", u, sender, msg.dest, msg.stack, msg.cost)
            emitted = engine.handle_message(msg, sender, events)
            if tracing:
                for kind, row in events:
                    state._log(kind, u, row.next_hop, row.dest, row.stack, row.cost)
            state._send(u, emitted, state.in_flight)
    state.messages_per_round.append(state.total_messages - before)
    return state


@dataclass
class SimResult:
    tables: Dict[NodeId, RoutingTable]
    metrics: SimMetrics
    state: RoundState = field(repr=False)

    @property
    def trace(self) -> Optional[List[str]]:
        return self.state.trace


def run_to_quiescence(
    net: Network,
    cfg: EngineConfig,
    max_rounds: int = 100_000,
    trace: bool = False,
    record_history: bool = False,
) -> SimResult:
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    started = time.perf_counter()
    state = RoundState(net, cfg, trace=trace, record_history=record_history)
    while True:
        step_round(state)
        if state.quiescent:
            break
        if state.t >= max_rounds and state.in_flight:
            raise NonConvergenceError(state, max_rounds)
    metrics = state.metrics(time.perf_counter() - started)
    return SimResult(state.tables, metrics, state)


def replay_modifications(state: RoundState) -> int:
    """Count table changes caused by re-delivering every node's whole inbox history.

    Zero on a quiescent state means the tables are a fixpoint of message
    handling. Requires a state built with ``record_history=True``.
    """
    if state.history is None:
        raise ValueError("state was run without record_history")
    changes = 0
    for u, engine in state.engines.items():
        probe = copy.copy(engine)
        probe.table = engine.table.copy()
        for sender, msg in state.history[u]:
            events: list = []
            probe.handle_message(msg, sender, events)
            changes += len(events)
    return changes


@dataclass(frozen=True)
class BoundVerdict:
    ok: bool
    rounds: int
    bound: int


def round_bound(net: Network, cfg: EngineConfig, diam: int) -> int:
    h = min(cfg.effective_h_max(net), net.alpha * net.n * net.n)
    return (h + 1) * (diam + 2) + 2


def convergence_bound_check(
    metrics: SimMetrics, net: Network, cfg: EngineConfig, diam: Optional[int]
) -> Optional[BoundVerdict]:
    """Compare measured rounds with a concrete instance of the O(alpha n^2 diam) bound.

    ``None`` when ``diam`` is undefined (no feasible path anywhere).
    """
    if diam is None:
        return None
    bound = round_bound(net, cfg, diam)
    return BoundVerdict(metrics.rounds_to_quiescence <= bound, metrics.rounds_to_quiescence, bound)


TABLE_COLUMNS = ["node", "dest", "stack", "cost", "next_hop", "function"]


def dump_tables(net: Network, tables: Dict[NodeId, RoutingTable]) -> str:
    a = net.alphabet
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    for u in sorted(tables):
        for row in tables[u]:
            writer.writerow(
                [u, row.dest, a.format_stack(row.stack), row.cost, row.next_hop, a.format_function(row.function)]
            )
    return buf.getvalue()
