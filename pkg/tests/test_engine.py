import pytest

from stackvector import network
from stackvector.core import conv, dec, enc
from stackvector.engine import (
    ControlMessage,
    EngineConfig,
    Mode,
    NodeEngine,
    RoutingRow,
    RoutingTable,
    control_message_size,
    decode_control,
    encode_control,
    max_rows,
)
from stackvector.simulator import run_to_quiescence

from .helpers import bellman_violations, star

a, b = 0, 1


def engine_for(net, node="U", h_max=3):
    return NodeEngine(net, node, EngineConfig(h_max=h_max))


def test_init_single():
    net = star([], leaves=("M",), in_sets={"U": [a]})
    assert engine_for(net).initial_messages() == [("M", ControlMessage("U", (a,), 0))]


def test_init_empty_in_set():
    assert engine_for(star([conv(a, a)], in_sets={"U": []})).initial_messages() == []


def test_init_cartesian_product():
    msgs = engine_for(star([], in_sets={"U": [a, b]})).initial_messages()
    assert len(msgs) == 4
    assert {(v, m.stack) for v, m in msgs} == {("V", (a,)), ("V", (b,)), ("W", (a,)), ("W", (b,))}


def test_table_add():
    t = RoutingTable()
    assert t.add(RoutingRow("D", (a,), 5, "V", conv(a, a)))
    assert len(t) == 1
    assert t.add(RoutingRow("D", (a,), 3, "W", conv(a, a)))
    assert t.lookup("D", (a,)).cost == 3
    assert not t.add(RoutingRow("D", (a,), 3, "V", conv(a, a)))
    assert t.lookup("D", (a,)).next_hop == "W"
    assert not t.add(RoutingRow("D", (a,), 4, "V", conv(a, a)))


def test_handle_conversion():
    e = engine_for(star([conv(a, b)]))
    out = e.handle_message(ControlMessage("D", (b,), 0), "V")
    assert list(e.table) == [RoutingRow("D", (a,), 1, "V", conv(a, b))]
    assert out == [("V", ControlMessage("D", (a,), 1)), ("W", ControlMessage("D", (a,), 1))]


def test_handle_decapsulation_row_carries_taller_stack():
    e = engine_for(star([dec(a, b)]))
    e.handle_message(ControlMessage("D", (a,), 0), "V")
    assert list(e.table) == [RoutingRow("D", (a, b), 1, "V", dec(a, b))]


def test_handle_height_guard():
    e = engine_for(star([dec(a, b)]), h_max=2)
    assert e.handle_message(ControlMessage("D", (a, b), 0), "V") == []
    assert len(e.table) == 0


def test_no_row_for_own_delivery_state():
    # U receives a and advertised it at cost 0; a loop back through V adds nothing
    e = engine_for(star([conv(a, a), dec(a, b)], in_sets={"U": [a]}))
    e.handle_message(ControlMessage("U", (a,), 1), "V")
    # a taller stack addressed to U is still routed through it
    assert [(r.stack, r.function) for r in e.table] == [((a, b), dec(a, b))]


def test_handle_equal_cost_is_quiet():
    e = engine_for(star([conv(a, b)]))
    e.handle_message(ControlMessage("D", (b,), 0), "V")
    assert e.handle_message(ControlMessage("D", (b,), 0), "W") == []
    assert e.table.lookup("D", (a,)).next_hop == "V"


def test_handle_is_per_function_not_cumulative():
    # every function is tried against the received stack, not the previous result
    e = engine_for(star([conv(a, a), conv(a, b), enc(a, b)]))
    out = e.handle_message(ControlMessage("D", (a, b), 4), "V")
    rows = {(r.stack, r.function) for r in e.table}
    assert rows == {((a, a), conv(a, b)), ((a,), enc(a, b))}
    # emissions in canonical function order: conversions before encapsulations
    assert [m.stack for _, m in out] == [(a, a), (a, a), (a,), (a,)]


def test_weights_use_sender_link():
    nodes = star([conv(a, b)])
    net = network.Network(nodes.alphabet, nodes.nodes.values(), nodes.links, {("U", conv(a, b), "W"): 7})
    e = engine_for(net)
    e.handle_message(ControlMessage("D", (b,), 2), "W")
    assert e.table.lookup("D", (a,)).cost == 9


def test_lookup_after_convergence(line3):
    tables = run_to_quiescence(line3, EngineConfig(h_max=3)).tables
    assert tables["S"].lookup("D", (a,)) == RoutingRow("D", (a,), 2, "M", conv(a, a))
    assert tables["S"].lookup("D", (b, a)) is None


def test_effective_h_max(line3):
    assert EngineConfig(h_max=4).effective_h_max(line3) == 4
    assert EngineConfig.theoretical().effective_h_max(line3) == 18
    assert EngineConfig(h_max=2, mode=Mode.THEORETICAL).effective_h_max(line3) == 18
    with pytest.raises(ValueError):
        EngineConfig(h_max=0)


def test_max_rows_formula():
    for n, alpha, h in [(5, 2, 3), (10, 3, 4), (7, 4, 1)]:
        assert max_rows(n, alpha, h) == n * (alpha ** (h + 1) - alpha) // (alpha - 1)


@pytest.mark.parametrize("seed", range(12))
def test_converged_tables_satisfy_bellman_and_row_bound(seed):
    n, alpha, h = 8, 2 + seed % 2, 2 + seed % 3
    net = network.generate_random(n, alpha, 0.3, m_attach=2, seed=seed)
    result = run_to_quiescence(net, EngineConfig(h_max=h))
    assert bellman_violations(net, result.tables, h) == []
    for table in result.tables.values():
        assert len(table) <= max_rows(n, alpha, h)
        for row in table:
            assert row.function.apply(row.stack) is not None


def test_control_message_codec():
    msg = ControlMessage("D", (a, b, b), 2**40 + 3)
    raw = encode_control(msg)
    assert len(raw) == control_message_size(3) == 28
    assert raw[16] == 3 and raw[17:20] == bytes([b, b, a])
    assert decode_control(raw) == msg
    with pytest.raises(ValueError):
        decode_control(raw[:-1])
