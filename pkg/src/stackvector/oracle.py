"""Centralized ground truth for feasible paths.

Everything here works on product states ``(node, stack)``: a packet sitting at
``node`` with ``stack`` still has to be handled by one of the node's functions.
``all_pairs`` is a backward label-setting search over those states with
stacks capped at ``h_max``; ``brute_force`` walks forward through every
function-labelled walk and knows nothing about caps or tables.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

from .core import AdaptationFunction, Alphabet, InvalidInputError, Stack, apply, reverse, stack_trace
from .network import Network, NodeId

DEFAULT_BUDGET = 10**7


class OracleBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class FeasiblePath:
    """``nodes[0] functions[0] nodes[1] ... functions[-1] nodes[-1]``."""

    nodes: Tuple[NodeId, ...]
    functions: Tuple[AdaptationFunction, ...]

    def __post_init__(self):
        if len(self.nodes) < 2 or len(self.functions) != len(self.nodes) - 1:
            raise InvalidInputError(
                f"{len(self.nodes)} nodes and {len(self.functions)} functions do not alternate"
            )

    @classmethod
    def from_sequence(cls, items: Sequence) -> "FeasiblePath":
        if len(items) < 3 or len(items) % 2 == 0:
            raise InvalidInputError("path must alternate node, function, ..., node")
        nodes, functions = items[0::2], items[1::2]
        if not all(isinstance(u, str) for u in nodes) or not all(
            isinstance(f, AdaptationFunction) for f in functions
        ):
            raise InvalidInputError("path must alternate node, function, ..., node")
        return cls(tuple(nodes), tuple(functions))

    @classmethod
    def parse(cls, text: str, alphabet: Alphabet) -> "FeasiblePath":
        """Parse ``S (a->a) U1 (a->ab) U2 ~(a->ab) D``."""
        tokens = []
        i, s = 0, text.strip()
        while i < len(s):
            if s[i].isspace():
                i += 1
            elif s[i] in "(~":
                j = s.index(")", i) + 1
                tokens.append(alphabet.parse_function(s[i:j]))
                i = j
            else:
                j = i
                while j < len(s) and not s[j].isspace() and s[j] not in "(~":
                    j += 1
                tokens.append(s[i:j])
                i = j
        return cls.from_sequence(tokens)

    @property
    def hops(self) -> int:
        return len(self.functions)

    def render(self, alphabet: Alphabet) -> str:
        parts = [self.nodes[0]]
        for f, v in zip(self.functions, self.nodes[1:]):
            text = alphabet.format_function(f)
            parts.append(text if text.startswith("~") else f"({text})")
            parts.append(v)
        return " ".join(parts)

    def cost(self, net: Network) -> int:
        return sum(net.weight(u, f, v) for u, f, v in zip(self.nodes, self.functions, self.nodes[1:]))


@dataclass(frozen=True)
class Feasible:
    final_stack: Stack
    cost: int
    max_height: int
    stacks: Tuple[Stack, ...]

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Infeasible:
    index: int
    reason: str

    def __bool__(self):
        return False


def feasible_check(
    net: Network, path: Union[FeasiblePath, Sequence], initial: Optional[int] = None
) -> Union[Feasible, Infeasible]:
    """Check a path hop by hop; ``index`` of an ``Infeasible`` is the failing hop.

    Every function, including the source's, must belong to its node. Without
    ``initial`` the source function must be an identity conversion ``x->x``;
    with it, the source function is applied to the one-protocol stack
    ``(initial,)``, which is how a source routing-table row is read.
    """
    if not isinstance(path, FeasiblePath):
        path = FeasiblePath.from_sequence(path)
    nodes, functions = path.nodes, path.functions
    stacks: List[Stack] = []
    cost = 0
    for i, f in enumerate(functions):
        u, v = nodes[i], nodes[i + 1]
        if u not in net.nodes or v not in net.nodes or (u, v) not in net.links:
            return Infeasible(i, f"({u}, {v}) is not a link")
        if f not in net.nodes[u].functions:
            return Infeasible(i, f"{net.alphabet.format_function(f)} not available at {u}")
        if i == 0:
            trace = stack_trace([f], initial)
            current = trace[0] if trace else None
            if current is None:
                why = "source function is not an identity conversion" if initial is None else "forbidden stack"
                return Infeasible(0, why)
        else:
            current = apply(f, stacks[-1])
            if current is None:
                shown = net.alphabet.format_stack(stacks[-1])
                return Infeasible(i, f"{net.alphabet.format_function(f)} cannot handle stack {shown}")
        stacks.append(current)
        cost += net.weight(u, f, v)
    final = stacks[-1]
    dest = nodes[-1]
    if len(final) != 1 or final[0] not in net.in_set(dest):
        return Infeasible(len(functions), f"{dest} cannot receive stack {net.alphabet.format_stack(final)}")
    return Feasible(final, cost, max(len(s) for s in stacks), tuple(stacks))


class Distance(NamedTuple):
    cost: int
    hops: int
    next_hop: Optional[NodeId]  # None for an accepting state
    function: Optional[AdaptationFunction]


State = Tuple[NodeId, Stack]


def distances_to(
    net: Network, dest: NodeId, h_max: int, budget: Optional[int] = None
) -> Dict[State, Distance]:
    """Shortest cost (then fewest hops) from every product state to ``dest``.

    Accepting states ``(dest, (x,))`` with ``x`` in In(dest) have distance 0.
    States whose stack exceeds ``h_max`` are never generated.
    """
    if h_max < 1:
        raise InvalidInputError("h_max must be >= 1")
    # predecessor rules: U can reach (V, H') from (U, reverse(f)(H')) via f
    incoming: Dict[NodeId, List[Tuple[NodeId, AdaptationFunction, AdaptationFunction, int]]] = {
        v: [] for v in net.nodes
    }
    for u in net.nodes:
        for v in net.neighbors(u):
            for f in net.nodes[u].sorted_functions:
                incoming[v].append((u, f, reverse(f), net.weight(u, f, v)))
    for v in incoming:
        incoming[v].sort(key=lambda r: (r[0], r[1]))

    dist: Dict[State, Distance] = {}
    counter = itertools.count()
    heap = []
    for x in sorted(net.in_set(dest)):
        heapq.heappush(heap, (0, 0, next(counter), dest, (x,), None, None))
    while heap:
        cost, hops, _, node, stack, nxt, f = heapq.heappop(heap)
        if (node, stack) in dist:
            continue
        dist[(node, stack)] = Distance(cost, hops, nxt, f)
        if budget is not None and len(dist) > budget:
            raise OracleBudgetExceeded(f"more than {budget} product states towards {dest}")
        for u, g, rev, w in incoming[node]:
            prev = apply(rev, stack)
            if prev is None or len(prev) > h_max or (u, prev) in dist:
                continue
            heapq.heappush(heap, (cost + w, hops + 1, next(counter), u, prev, node, g))
    return dist


def all_pairs(
    net: Network, h_max: int, budget: Optional[int] = None
) -> Dict[Tuple[NodeId, Stack, NodeId], Distance]:
    """Distances keyed by ``(node, stack, dest)``; absent keys are unreachable."""
    out = {}
    for d in net.nodes:
        for (u, stack), dd in distances_to(net, d, h_max, budget).items():
            out[(u, stack, d)] = dd
    return out


def is_accepting(net: Network, node: NodeId, stack: Stack, dest: NodeId) -> bool:
    return node == dest and len(stack) == 1 and stack[0] in net.in_set(dest)


def witness_path(
    net: Network, dist: Dict[State, Distance], source: NodeId, stack: Stack
) -> Optional[FeasiblePath]:
    """Follow oracle next steps from ``(source, stack)`` to the accepting state."""
    hit = dist.get((source, stack))
    if hit is None or hit.next_hop is None:
        return None
    nodes, functions = [source], []
    node, current = source, stack
    while hit.next_hop is not None:
        functions.append(hit.function)
        current = apply(hit.function, current)
        node = hit.next_hop
        nodes.append(node)
        hit = dist[(node, current)]
    return FeasiblePath(tuple(nodes), tuple(functions))


class BruteResult(NamedTuple):
    cost: Optional[int]
    path: Optional[FeasiblePath]

    @property
    def reachable(self) -> bool:
        return self.cost is not None


def brute_force_from(
    net: Network, source: NodeId, init: int, max_hops: int, budget: int = DEFAULT_BUDGET
) -> Dict[NodeId, BruteResult]:
    """Best feasible walk of at most ``max_hops`` hops from ``(source, (init,))`` to every node.

    Enumerates every walk where each hop applies one of the current node's
    functions; stack height is unbounded. Ties go to fewer hops, then the
    lexicographically smaller node sequence. A zero-hop walk counts when
    ``init`` is receivable at ``source`` itself.
    """
    if source not in net.nodes:
        raise InvalidInputError(f"unknown node {source!r}")
    moves = {
        u: [(f, v, net.weight(u, f, v)) for f in net.nodes[u].sorted_functions for v in net.neighbors(u)]
        for u in net.nodes
    }
    in_sets = {u: net.in_set(u) for u in net.nodes}
    best: Dict[NodeId, Tuple] = {}
    nodes: List[NodeId] = [source]
    functions: List[AdaptationFunction] = []
    expanded = 0

    def record(node: NodeId, cost: int) -> None:
        key = (cost, len(functions), tuple(nodes))
        old = best.get(node)
        if old is None or key < old[0]:
            best[node] = (key, tuple(functions))

    def walk(node: NodeId, stack: Stack, cost: int) -> None:
        nonlocal expanded
        expanded += 1
        if expanded > budget:
            raise OracleBudgetExceeded(f"brute force exceeded {budget} walk prefixes")
        if len(stack) == 1 and stack[0] in in_sets[node]:
            record(node, cost)
        if len(functions) == max_hops:
            return
        for f, v, w in moves[node]:
            nxt = apply(f, stack)
            if nxt is None:
                continue
            nodes.append(v)
            functions.append(f)
            walk(v, nxt, cost + w)
            nodes.pop()
            functions.pop()

    walk(source, (init,), 0)
    out = {}
    for d in net.nodes:
        if d not in best:
            out[d] = BruteResult(None, None)
            continue
        (cost, _, seq), fs = best[d]
        out[d] = BruteResult(cost, FeasiblePath(seq, fs) if fs else None)
    return out


def brute_force(
    net: Network, source: NodeId, dest: NodeId, init: int, max_hops: int, budget: int = DEFAULT_BUDGET
) -> BruteResult:
    if dest not in net.nodes:
        raise InvalidInputError(f"unknown node {dest!r}")
    return brute_force_from(net, source, init, max_hops, budget)[dest]


def diameter(net: Network, h_max: int, budget: Optional[int] = None) -> Optional[int]:
    """Most hops on any shortest feasible path between two distinct nodes.

    For each ordered pair ``(S, D)`` and each protocol ``x`` with a finite
    distance from ``(S, (x,))`` to ``D``, the shortest path is the cheapest
    one with the fewest hops. ``None`` when no such path exists.
    """
    best: Optional[int] = None
    for d in net.nodes:
        dist = distances_to(net, d, h_max, budget)
        for (u, stack), dd in dist.items():
            if u != d and len(stack) == 1:
                best = dd.hops if best is None else max(best, dd.hops)
    return best


def shortest_from(
    net: Network, source: NodeId, dest: NodeId, h_max: int, budget: Optional[int] = None
) -> Optional[Tuple[int, Distance]]:
    """Cheapest ``(initial protocol, distance)`` from ``source`` with a one-protocol stack."""
    dist = distances_to(net, dest, h_max, budget)
    found = [(dist[(source, (x,))], x) for x in range(net.alpha) if (source, (x,)) in dist]
    if not found:
        return None
    dd, x = min(found, key=lambda t: (t[0].cost, t[0].hops, t[1]))
    return x, dd


def report_lines(
    net: Network,
    h_max: int,
    pairs: Optional[Iterable[Tuple[NodeId, NodeId]]] = None,
    budget: Optional[int] = None,
) -> List[List]:
    """Rows ``S, D, init, cost, hops, max_height, path`` for every finite one-protocol query."""
    a = net.alphabet
    wanted = None if pairs is None else set(pairs)
    rows = []
    for d in net.nodes:
        dist = distances_to(net, d, h_max, budget)
        for s in net.nodes:
            if s == d or (wanted is not None and (s, d) not in wanted):
                continue
            for x in range(net.alpha):
                if (s, (x,)) not in dist:
                    continue
                dd = dist[(s, (x,))]
                path = witness_path(net, dist, s, (x,))
                check = feasible_check(net, path, initial=x)
                rows.append([s, d, a.name(x), dd.cost, dd.hops, check.max_height, path.render(a)])
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows
