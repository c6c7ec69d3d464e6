"""Network model: topology, per-node adaptation functions, costs.

Node ids are short strings (at most 16 UTF-8 bytes). Their canonical wire
form is the UTF-8 encoding right-padded with NUL bytes to 16 bytes, which
keeps the byte-lexicographic order identical to plain string order.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .core import (
    MAX_PROTOCOLS,
    AdaptationFunction,
    Alphabet,
    InvalidInputError,
    Kind,
    conv,
    dec,
    enc,
    kind_from_name,
)

log = logging.getLogger(__name__)

NodeId = str
NODE_ID_BYTES = 16
MAX_COST = 2**64 - 1

WeightKey = Tuple[NodeId, AdaptationFunction, NodeId]


class InvalidQueryError(LookupError):
    pass


class NetworkFormatError(ValueError):
    """A network file could not be parsed. ``where`` names the field."""

    def __init__(self, where: str, message: str, line: Optional[int] = None):
        self.where = where
        self.line = line
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{where}: {message}")


class NetworkValidationError(ValueError):
    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("network rejected: " + "; ".join(str(v) for v in report.violations))


def node_id_bytes(node: NodeId) -> bytes:
    raw = node.encode("utf-8")
    if len(raw) > NODE_ID_BYTES or not raw or raw.endswith(b"\0"):
        raise InvalidInputError(f"node id {node!r} does not fit in {NODE_ID_BYTES} bytes")
    return raw.ljust(NODE_ID_BYTES, b"\0")


def node_id_from_bytes(raw: bytes) -> NodeId:
    return raw.rstrip(b"\0").decode("utf-8")


def derive_in_set(functions: Iterable[AdaptationFunction]) -> FrozenSet[int]:
    """Protocols that some function can take as the top of a stack."""
    accepted = set()
    for f in functions:
        accepted.add(f.y if f.kind is Kind.DEC else f.x)
    return frozenset(accepted)


def all_functions(alpha: int) -> List[AdaptationFunction]:
    """The 3*alpha**2 possible functions, in canonical order."""
    pairs = list(itertools.product(range(alpha), repeat=2))
    return [conv(x, y) for x, y in pairs] + [enc(x, y) for x, y in pairs] + [
        dec(x, y) for x, y in pairs
    ]


@dataclass(frozen=True)
class NodeSpec:
    id: NodeId
    functions: FrozenSet[AdaptationFunction] = frozenset()
    in_set: FrozenSet[int] = frozenset()

    @property
    def out_set(self) -> FrozenSet[int]:
        return frozenset(f.x if f.kind is Kind.DEC else f.y for f in self.functions)

    @property
    def sorted_functions(self) -> List[AdaptationFunction]:
        return sorted(self.functions)


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.detail}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)
    # Not violations: nodes that cannot be destinations (empty In-set).
    warnings: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str) -> List[Violation]:
        return [v for v in self.violations if v.kind == kind]


HARD_VIOLATIONS = {"asymmetric_link", "self_loop", "unknown_node"}


class Network:
    """Symmetric directed graph with adaptation functions and costs.

    Treat instances as immutable; the constructor copies its inputs.
    """

    def __init__(
        self,
        alphabet: Alphabet,
        nodes: Iterable[NodeSpec],
        links: Iterable[Tuple[NodeId, NodeId]],
        weights: Optional[Mapping[WeightKey, int]] = None,
        default_cost: int = 1,
    ):
        self.alphabet = alphabet
        self.nodes: Dict[NodeId, NodeSpec] = {}
        for spec in sorted(nodes, key=lambda s: s.id):
            if spec.id in self.nodes:
                raise InvalidInputError(f"duplicate node {spec.id!r}")
            node_id_bytes(spec.id)
            self.nodes[spec.id] = spec
        link_list = [tuple(link) for link in links]
        self.links: FrozenSet[Tuple[NodeId, NodeId]] = frozenset(link_list)
        if len(self.links) != len(link_list):
            dupes = sorted(l for l in self.links if link_list.count(l) > 1)
            raise InvalidInputError(f"duplicate links {dupes}")
        _check_cost(default_cost)
        self.default_cost = default_cost
        self.weights: Dict[WeightKey, int] = {}
        for key, cost in (weights or {}).items():
            _check_cost(cost)
            self.weights[key] = cost
        adjacency: Dict[NodeId, List[NodeId]] = {u: [] for u in self.nodes}
        for u, v in self.links:
            if u in adjacency and v in self.nodes and u != v:
                adjacency[u].append(v)
        self._adjacency = {u: tuple(sorted(vs)) for u, vs in adjacency.items()}

    @property
    def node_ids(self) -> List[NodeId]:
        return list(self.nodes)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def alpha(self) -> int:
        return len(self.alphabet)

    def neighbors(self, node: NodeId) -> Tuple[NodeId, ...]:
        return self._adjacency[node]

    def weight(self, u: NodeId, f: AdaptationFunction, v: NodeId) -> int:
        if (u, v) not in self.links:
            raise InvalidQueryError(f"no link ({u}, {v})")
        if u not in self.nodes or f not in self.nodes[u].functions:
            raise InvalidQueryError(f"{self.alphabet.format_function(f)} not available at {u}")
        return self.weights.get((u, f, v), self.default_cost)

    def in_set(self, node: NodeId) -> FrozenSet[int]:
        return self.nodes[node].in_set

    def functions(self, node: NodeId) -> FrozenSet[AdaptationFunction]:
        return self.nodes[node].functions

    def _key(self):
        return (
            self.alphabet.names,
            tuple(self.nodes.values()),
            self.links,
            tuple(sorted(self.weights.items())),
            self.default_cost,
        )

    def __eq__(self, other):
        return isinstance(other, Network) and self._key() == other._key()

    def __repr__(self):
        return f"Network(n={self.n}, links={len(self.links)}, alpha={self.alpha})"


def _check_cost(cost) -> None:
    if isinstance(cost, bool) or not isinstance(cost, int) or not 0 <= cost <= MAX_COST:
        raise InvalidInputError(f"cost {cost!r} is not a non-negative 64-bit integer")


def validate(net: Network) -> ValidationReport:
    report = ValidationReport()
    bad = report.violations.append
    alpha = net.alpha
    for u, v in sorted(net.links):
        if u == v:
            bad(Violation("self_loop", f"({u}, {v})"))
            continue
        for end in (u, v):
            if end not in net.nodes:
                bad(Violation("unknown_node", f"link ({u}, {v}) references {end!r}"))
        if (v, u) not in net.links:
            bad(Violation("asymmetric_link", f"({u}, {v}) has no reverse ({v}, {u})"))
    for spec in net.nodes.values():
        for f in spec.sorted_functions:
            if f.x >= alpha or f.y >= alpha:
                bad(Violation("unknown_protocol", f"{spec.id}: function {f}"))
        for p in sorted(spec.in_set):
            if p >= alpha:
                bad(Violation("unknown_protocol", f"{spec.id}: In-set protocol {p}"))
        if not spec.in_set:
            report.warnings.append(Violation("empty_in_set", spec.id))
    for (u, f, v), _cost in sorted(net.weights.items()):
        if u not in net.nodes or f not in net.nodes[u].functions or (u, v) not in net.links:
            bad(Violation("dangling_weight", f"({u}, {f}, {v})"))
    return report


def generate_random(
    n: int, alpha: int, p: float, m_attach: int = 5, seed: int = 0
) -> Network:
    """Barabasi-Albert topology with randomly assigned adaptation functions.

    Starts from ``m_attach`` isolated nodes; every later node links to
    ``m_attach`` distinct earlier nodes drawn with probability proportional
    to degree + 1. Each of the ``3 * alpha**2`` functions is then given to
    each node independently with probability ``p``. All costs default to 1.
    """
    if not (isinstance(m_attach, int) and m_attach >= 1 and n > m_attach):
        raise InvalidInputError(f"need n > m_attach >= 1, got n={n}, m_attach={m_attach}")
    if not 2 <= alpha <= MAX_PROTOCOLS:
        raise InvalidInputError(f"alpha must be in [2, {MAX_PROTOCOLS}], got {alpha}")
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    degree = np.zeros(n, dtype=np.int64)
    edges = []
    for new in range(m_attach, n):
        w = degree[:new] + 1.0
        targets = rng.choice(new, size=m_attach, replace=False, p=w / w.sum())
        for t in sorted(int(t) for t in targets):
            edges.append((t, new))
            degree[t] += 1
            degree[new] += 1

    width = len(str(n - 1))
    names = [f"n{i:0{width}d}" for i in range(n)]
    candidates = all_functions(alpha)
    draws = rng.random((n, len(candidates))) < p
    nodes = []
    for i, name in enumerate(names):
        fs = frozenset(f for f, keep in zip(candidates, draws[i]) if keep)
        nodes.append(NodeSpec(name, fs, derive_in_set(fs)))
    links = []
    for a, b in edges:
        links.append((names[a], names[b]))
        links.append((names[b], names[a]))
    return Network(Alphabet.default(alpha), nodes, links)


def first_and_last(net: Network) -> Tuple[NodeId, NodeId]:
    """Network extremities of a generated network: first seed node, last added node."""
    ids = net.node_ids
    return ids[0], ids[-1]


# -- file format --------------------------------------------------------------


def _function_to_json(f: AdaptationFunction, alphabet: Alphabet) -> dict:
    return {"kind": f.kind_name, "x": alphabet.name(f.x), "y": alphabet.name(f.y)}


def to_json_dict(net: Network) -> dict:
    a = net.alphabet
    return {
        "protocols": list(a.names),
        "default_cost": net.default_cost,
        "nodes": [
            {
                "id": spec.id,
                "in": [a.name(p) for p in sorted(spec.in_set)],
                "functions": [_function_to_json(f, a) for f in spec.sorted_functions],
            }
            for spec in net.nodes.values()
        ],
        "links": [list(link) for link in sorted(net.links)],
        "weights": [
            {"node": u, "function": _function_to_json(f, a), "to": v, "cost": c}
            for (u, f, v), c in sorted(net.weights.items())
        ],
    }


def dumps(net: Network) -> str:
    return json.dumps(to_json_dict(net), indent=1, ensure_ascii=False) + "\n"


def save(net: Network, path) -> None:
    Path(path).write_text(dumps(net), encoding="utf-8")


def _require(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise NetworkFormatError(where, f"missing field {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise NetworkFormatError(f"{where}.{key}", f"expected {kind.__name__}")
    return value


def _parse_function(obj, alphabet: Alphabet, where: str) -> AdaptationFunction:
    try:
        kind = kind_from_name(_require(obj, "kind", where, str))
    except InvalidInputError as e:
        raise NetworkFormatError(f"{where}.kind", str(e)) from None
    ids = []
    for key in ("x", "y"):
        name = _require(obj, key, where, str)
        try:
            ids.append(alphabet.id(name))
        except InvalidInputError as e:
            raise NetworkFormatError(f"{where}.{key}", str(e)) from None
    return AdaptationFunction(kind, ids[0], ids[1])


def from_json_dict(doc) -> Network:
    if not isinstance(doc, dict):
        raise NetworkFormatError("<root>", "expected an object")
    names = _require(doc, "protocols", "<root>", list)
    try:
        alphabet = Alphabet(names)
    except (InvalidInputError, TypeError) as e:
        raise NetworkFormatError("protocols", str(e)) from None
    default_cost = doc.get("default_cost", 1)
    nodes = []
    for i, raw in enumerate(_require(doc, "nodes", "<root>", list)):
        where = f"nodes[{i}]"
        node_id = _require(raw, "id", where, str)
        functions = [
            _parse_function(fobj, alphabet, f"{where}.functions[{j}]")
            for j, fobj in enumerate(raw.get("functions", []))
        ]
        if len(set(functions)) != len(functions):
            raise NetworkFormatError(f"{where}.functions", "duplicate function")
        if "in" in raw:
            try:
                in_set = frozenset(alphabet.id(p) for p in raw["in"])
            except (InvalidInputError, TypeError) as e:
                raise NetworkFormatError(f"{where}.in", str(e)) from None
        else:
            in_set = derive_in_set(functions)
        nodes.append(NodeSpec(node_id, frozenset(functions), in_set))
    links = []
    for i, raw in enumerate(doc.get("links", [])):
        if not (isinstance(raw, list) and len(raw) == 2 and all(isinstance(x, str) for x in raw)):
            raise NetworkFormatError(f"links[{i}]", "expected a pair of node ids")
        links.append(tuple(raw))
    weights = {}
    for i, raw in enumerate(doc.get("weights", [])):
        where = f"weights[{i}]"
        f = _parse_function(_require(raw, "function", where, dict), alphabet, f"{where}.function")
        key = (_require(raw, "node", where, str), f, _require(raw, "to", where, str))
        if key in weights:
            raise NetworkFormatError(where, "duplicate weight entry")
        weights[key] = _require(raw, "cost", where)
    try:
        return Network(alphabet, nodes, links, weights, default_cost)
    except InvalidInputError as e:
        raise NetworkFormatError("<root>", str(e)) from None


def loads(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkFormatError("<json>", e.msg, line=e.lineno) from None
    net = from_json_dict(doc)
    report = validate(net)
    if any(v.kind in HARD_VIOLATIONS for v in report.violations):
        raise NetworkValidationError(report)
    for v in report.violations:
        log.warning("network file: %s", v)
    return net


def load(path) -> Network:
    return loads(Path(path).read_text(encoding="utf-8"))
