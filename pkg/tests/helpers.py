"""Shared builders and independent checks for the test-suite."""

from stackvector.core import Alphabet, apply
from stackvector.network import Network, NodeSpec


def star(center_functions, leaves=("V", "W"), in_sets=None, alphabet=Alphabet("ab")):
    """Node ``U`` linked to every leaf; leaves have no functions."""
    in_sets = in_sets or {}
    nodes = [NodeSpec("U", frozenset(center_functions), frozenset(in_sets.get("U", ())))]
    nodes += [NodeSpec(v, frozenset(), frozenset(in_sets.get(v, ()))) for v in leaves]
    links = [("U", v) for v in leaves] + [(v, "U") for v in leaves]
    return Network(alphabet, nodes, links)


def bellman_violations(net, tables, h_max):
    """Rows whose cost differs from the one-step minimum over neighbor tables."""
    bad = []
    for u, table in tables.items():
        for row in table:
            best = None
            for f in net.nodes[u].functions:
                nxt = apply(f, row.stack)
                if nxt is None:
                    continue
                for v in net.neighbors(u):
                    if v == row.dest and len(nxt) == 1 and nxt[0] in net.in_set(v):
                        rest = 0
                    else:
                        hit = tables[v].lookup(row.dest, nxt) if len(nxt) <= h_max else None
                        if hit is None:
                            continue
                        rest = hit.cost
                    c = net.weight(u, f, v) + rest
                    best = c if best is None else min(best, c)
            if best != row.cost:
                bad.append((u, row, best))
    return bad
