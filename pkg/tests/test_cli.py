import csv
import io
import json

import pytest

from stackvector import cli, experiment, network
from stackvector.experiment import ExperimentSpec, found_by_run, run_experiment, run_seed, summarize

from .conftest import DATA

TUNNEL = {
    "protocols": ["a", "b"],
    "nodes": [
        {"id": "S", "functions": [{"kind": "enc", "x": "a", "y": "b"}]},
        {"id": "M", "functions": [{"kind": "dec", "x": "a", "y": "b"}]},
        {"id": "D", "in": ["a"], "functions": []},
    ],
    "links": [["S", "M"], ["M", "S"], ["M", "D"], ["D", "M"]],
}


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def tunnel(tmp_path):
    path = tmp_path / "tunnel.json"
    path.write_text(json.dumps(TUNNEL))
    return path


def test_gen_writes_valid_network(tmp_path, capsys):
    out = tmp_path / "net.json"
    code, _, _ = run_cli(capsys, "gen", "--n", 50, "--alpha", 2, "--p", 0.1, "--seed", 7, "--out", out)
    assert code == 0
    net = network.load(out)
    assert net.n == 50 and network.validate(net).ok


def test_gen_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        run_cli(capsys, "gen", "--n", 20, "--alpha", 2, "--p", 0.2, "--seed", 7, "--out", path)
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("flags", [["--alpha", 300], ["--alpha", 1], ["--p", 1.5]])
def test_gen_bad_flags_exit_2(capsys, flags):
    base = {"--n": 20, "--alpha": 2, "--p": 0.1}
    base.update(dict(zip(flags[::2], flags[1::2])))
    argv = ["gen"] + [str(x) for kv in base.items() for x in kv]
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_gen_missing_flag_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen", "--n", "20"])
    assert exc.value.code == 2


def test_run_line3_tables_and_metrics(capsys):
    code, out, _ = run_cli(capsys, "run", "--net", DATA / "line3.json")
    assert code == 0
    lines = rows(out)
    assert ["S", "D", "a", "2", "M", "a->a"] in lines
    assert lines[-2] == ["rounds", "messages", "max_stack", "rows", "h_max_effective"]
    assert lines[-1][4] == "3"


def test_run_tables_out_and_trace(tmp_path, capsys):
    tables, trace = tmp_path / "t.csv", tmp_path / "trace.tsv"
    code, out, _ = run_cli(capsys, "run", "--net", DATA / "line3.json", "--tables-out", tables, "--trace-out", trace)
    assert code == 0
    assert ["S", "D", "a", "2", "M", "a->a"] in rows(tables.read_text())
    assert "row_insert" in trace.read_text().lower()
    assert len(rows(out)) == 2


def test_run_height_limit_drops_row(tunnel, capsys):
    _, out, _ = run_cli(capsys, "run", "--net", tunnel, "--h-max", 1)
    assert not [r for r in rows(out) if r[:2] == ["S", "D"]]
    _, out, _ = run_cli(capsys, "run", "--net", tunnel, "--h-max", 2)
    assert ["S", "D", "a", "2", "M", "a->ab"] in rows(out)


def test_run_theoretical_height(capsys):
    _, out, _ = run_cli(capsys, "run", "--net", DATA / "line3.json", "--theoretical")
    assert rows(out)[-1][4] == "18"


def test_run_nonconvergence_exit_3(tmp_path, capsys):
    tables = tmp_path / "partial.csv"
    code, _, err = run_cli(capsys, "run", "--net", DATA / "line3.json", "--max-rounds", 1, "--tables-out", tables)
    assert code == 3
    assert "partial" in err
    assert rows(tables.read_text())[0] == ["node", "dest", "stack", "cost", "next_hop", "function"]


def test_run_bad_network_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"protocols": ["a"], ')
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--net", str(bad)])
    assert exc.value.code == 2


def test_oracle_single_query(capsys):
    code, out, _ = run_cli(capsys, "oracle", "--net", DATA / "loop_tunnel.json", "--h-max", 4, "--source", "S", "--dest", "D")
    assert code == 0
    (row,) = rows(out)[1:]
    assert row[:6] == ["S", "D", "a", "9", "9", "4"]


def test_oracle_all_pairs_report(capsys):
    _, out, _ = run_cli(capsys, "oracle", "--net", DATA / "line3.json")
    assert rows(out)[1:] == [
        ["M", "D", "a", "1", "1", "1", "M (a->b) D"],
        ["S", "D", "a", "2", "2", "1", "S (a->a) M (a->b) D"],
        ["S", "M", "a", "1", "1", "1", "S (a->a) M"],
    ]


def test_oracle_path_file(tmp_path, capsys):
    good = tmp_path / "good.txt"
    good.write_text("S (a->a) M (a->b) D\n")
    _, out, _ = run_cli(capsys, "oracle", "--net", DATA / "line3.json", "--path-file", good)
    assert rows(out)[1] == ["feasible", "", "", "b", "2", "1"]
    bad = tmp_path / "bad.txt"
    bad.write_text("S (a->a) M (b->a) D\n")
    _, out, _ = run_cli(capsys, "oracle", "--net", DATA / "line3.json", "--path-file", bad)
    assert rows(out)[1][:2] == ["infeasible", "1"]


def test_oracle_brute_and_budget(capsys):
    code, out, _ = run_cli(
        capsys, "oracle", "--net", DATA / "loop_tunnel.json", "--source", "S", "--dest", "D", "--brute", "--max-hops", 9
    )
    assert code == 0
    assert rows(out)[1][:5] == ["S", "D", "a", "9", "9"]
    code, _, err = run_cli(
        capsys, "oracle", "--net", DATA / "loop_tunnel.json", "--source", "S", "--dest", "D", "--brute", "--budget", 10
    )
    assert code == 4 and "10 walk prefixes" in err


def test_oracle_product_budget_exit_4(capsys):
    code, _, _ = run_cli(capsys, "oracle", "--net", DATA / "loop_tunnel.json", "--h-max", 4, "--budget", 2)
    assert code == 4


def test_route_trace(capsys):
    code, out, err = run_cli(capsys, "route", "--net", DATA / "loop_tunnel.json", "--h-max", 4, "--source", "S", "--dest", "D")
    assert code == 0 and "Delivered" in err
    trace = rows(out)
    assert trace[0] == ["hop", "node", "stack", "action", "cost_so_far"]
    assert [r[1] for r in trace[1:]] == "S U1 U2 U3 U1 U2 U4 U5 U6 D".split()
    assert trace[-1][3:] == ["deliver", "9"]


def test_route_unreachable(tunnel, capsys):
    code, out, err = run_cli(capsys, "route", "--net", tunnel, "--h-max", 1, "--source", "S", "--dest", "D")
    assert code == 0 and "no one-protocol row" in err
    assert len(rows(out)) == 1


def test_experiment_cli_writes_csv(tmp_path, capsys):
    out = tmp_path / "exp.csv"
    code, _, err = run_cli(capsys, "experiment", "--n", 10, "--m-attach", 2, "--p", "0,0.3", "--runs", 3, "--out", out)
    assert code == 0
    text = out.read_text()
    assert text.startswith("# extremities:")
    table = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
    assert len(table) == 6
    assert err.splitlines()[0].startswith("p,h_max,runs,found_rate")


# -- experiment harness --------------------------------------------------------


def small_spec(**kw):
    base = dict(n=12, alpha=2, p_list=[0.0, 0.3], h_max_list=[1, 2, 3], runs=6, seed=3, m_attach=2)
    base.update(kw)
    return ExperimentSpec(**base)


def test_spec_invariants():
    with pytest.raises(ValueError):
        small_spec(runs=0)
    with pytest.raises(ValueError):
        small_spec(p_list=[])


def test_p_zero_finds_nothing():
    rows_ = run_experiment(small_spec(p_list=[0.0]))
    assert all(r["found"] == 0 and r["reason"] == "no_feasible_path" for r in rows_)
    cell = summarize(rows_)[(0.0, 3)]
    assert cell.found_rate == 0.0 and cell.runs == 6


def test_found_monotone_in_h_max_per_run():
    rows_ = run_experiment(small_spec(runs=10))
    for (p, run), by_h in found_by_run(rows_).items():
        assert [by_h[h] for h in (1, 2, 3)] == sorted(by_h[h] for h in (1, 2, 3)), (p, run)


def test_found_agrees_with_oracle():
    for r in run_experiment(small_spec(runs=8)):
        assert not r["error"]
        if r["found"]:
            assert r["cost"] == r["oracle_cost_hmax"]
            assert r["oracle_found"] == 1
        elif r["oracle_found"]:
            assert r["reason"] == "height_cap" and r["oracle_cost_hmax"] == ""


def test_rows_reproducible_and_ordered():
    spec = small_spec(runs=3, with_diameter=True)
    first = run_experiment(spec)
    second = run_experiment(spec, workers=2)
    strip = lambda rs: [{k: v for k, v in r.items() if k != "wall_time"} for r in rs]
    assert strip(first) == strip(second)
    keys = [(r["p"], r["h_max"], r["run"]) for r in first]
    assert keys == sorted(keys)


def test_run_seed_independent_of_h_sweep():
    a = run_experiment(small_spec(h_max_list=[3], runs=2))
    b = run_experiment(small_spec(h_max_list=[1, 3], runs=2))
    pick = lambda rs: [(r["run_seed"], r["found"], r["cost"]) for r in rs if r["h_max"] == 3]
    assert pick(a) == pick(b)
    assert run_seed(3, 1, 0) != run_seed(3, 0, 1)


def test_failed_run_is_recorded(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("synthetic")

    monkeypatch.setattr(experiment, "run_to_quiescence", boom)
    rows_ = run_experiment(small_spec(p_list=[0.3], runs=2))
    assert all(r["error"] == "RuntimeError: synthetic" for r in rows_)
    assert summarize(rows_)[(0.3, 1)].errors == 2
