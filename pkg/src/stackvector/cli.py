"""Command-line front end.

Exit codes: 0 ok, 2 usage or bad input, 3 non-convergence, 4 oracle budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import experiment, network, oracle
from .core import InvalidInputError
from .dataplane import TRACE_COLUMNS, Packet, end_to_end
from .engine import EngineConfig
from .simulator import NonConvergenceError, dump_tables, run_to_quiescence

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGENCE = 3
EXIT_BUDGET = 4

log = logging.getLogger("stackvector")


class UsageError(Exception):
    pass


def _csv_list(kind):
    def parse(text: str):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated {kind.__name__} values, got {text!r}")

    return parse


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _rows_to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load(path: str) -> network.Network:
    try:
        return network.load(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}")
    except (network.NetworkFormatError, network.NetworkValidationError) as e:
        raise UsageError(f"{path}: {e}")


def _engine_config(args) -> EngineConfig:
    if args.theoretical:
        return EngineConfig.theoretical()
    if args.h_max < 1:
        raise UsageError("--h-max must be >= 1")
    return EngineConfig(h_max=args.h_max)


def _node(net: network.Network, name: str) -> str:
    if name not in net.nodes:
        raise UsageError(f"unknown node {name!r}")
    return name


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args) -> int:
    try:
        net = network.generate_random(args.n, args.alpha, args.p, args.m_attach, args.seed)
    except InvalidInputError as e:
        raise UsageError(str(e))
    _write(args.out, network.dumps(net))
    return EXIT_OK


def cmd_run(args) -> int:
    net = _load(args.net)
    cfg = _engine_config(args)
    h_eff = cfg.effective_h_max(net)
    log.info("h_max effective %d", h_eff)
    try:
        result = run_to_quiescence(net, cfg, args.max_rounds, trace=args.trace_out is not None)
    except NonConvergenceError as e:
        state = e.state
        _write(args.tables_out, dump_tables(net, state.tables))
        if args.trace_out:
            Path(args.trace_out).write_text("\n".join(state.trace or []) + "\n")
        print(f"error: {e}; partial tables after round {state.t} written", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    _write(args.tables_out, dump_tables(net, result.tables))
    if args.trace_out:
        Path(args.trace_out).write_text("\n".join(result.trace or []) + "\n")
    m = result.metrics
    print("rounds,messages,max_stack,rows,h_max_effective")
    print(f"{m.rounds_to_quiescence},{m.total_messages},{m.max_message_stack_height},{m.total_rows},{h_eff}")
    return EXIT_OK


REPORT_COLUMNS = ["source", "dest", "init", "cost", "hops", "max_height", "path"]
BRUTE_COLUMNS = ["source", "dest", "init", "cost", "hops", "path"]
CHECK_COLUMNS = ["verdict", "index", "reason", "final_stack", "cost", "max_height"]


def cmd_oracle(args) -> int:
    net = _load(args.net)
    a = net.alphabet
    if args.path_file:
        try:
            path = oracle.FeasiblePath.parse(Path(args.path_file).read_text(), a)
            initial = None if args.init is None else a.id(args.init)
            verdict = oracle.feasible_check(net, path, initial=initial)
        except OSError as e:
            raise UsageError(f"cannot read {args.path_file}: {e.strerror}")
        except (InvalidInputError, KeyError, ValueError) as e:
            raise UsageError(f"{args.path_file}: {e}")
        if verdict:
            row = ["feasible", "", "", a.format_stack(verdict.final_stack), verdict.cost, verdict.max_height]
        else:
            row = ["infeasible", verdict.index, verdict.reason, "", "", ""]
        _write(args.out, _rows_to_csv(CHECK_COLUMNS, [row]))
        return EXIT_OK

    if (args.source is None) != (args.dest is None):
        raise UsageError("--source and --dest go together")
    if args.brute:
        if args.source is None:
            raise UsageError("--brute needs --source and --dest")
        src, dst = _node(net, args.source), _node(net, args.dest)
        inits = range(net.alpha) if args.init is None else [a.id(args.init)]
        rows = []
        for x in inits:
            res = oracle.brute_force(net, src, dst, x, args.max_hops, args.budget or oracle.DEFAULT_BUDGET)
            if res.reachable:
                hops = res.path.hops if res.path else 0
                rendered = res.path.render(a) if res.path else src
                rows.append([src, dst, a.name(x), res.cost, hops, rendered])
        _write(args.out, _rows_to_csv(BRUTE_COLUMNS, rows))
        return EXIT_OK

    pairs = None
    if args.source is not None:
        pairs = [(_node(net, args.source), _node(net, args.dest))]
    rows = oracle.report_lines(net, args.h_max, pairs, args.budget)
    if args.init is not None:
        rows = [r for r in rows if r[2] == args.init]
    _write(args.out, _rows_to_csv(REPORT_COLUMNS, rows))
    if pairs and not rows:
        print(f"{args.source} -> {args.dest}: no feasible path within h_max={args.h_max}", file=sys.stderr)
    return EXIT_OK


def cmd_route(args) -> int:
    net = _load(args.net)
    cfg = _engine_config(args)
    src, dst = _node(net, args.source), _node(net, args.dest)
    a = net.alphabet
    try:
        result = run_to_quiescence(net, cfg, args.max_rounds)
    except NonConvergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    table = result.tables[src]
    if args.stack is not None:
        try:
            stack = a.parse_stack(args.stack)
        except (InvalidInputError, KeyError, ValueError) as e:
            raise UsageError(f"--stack: {e}")
    else:
        rows = [r for r in table if r.dest == dst and len(r.stack) == 1]
        if not rows:
            print(f"{src} has no one-protocol row towards {dst}", file=sys.stderr)
            _write(args.out, _rows_to_csv(TRACE_COLUMNS, []))
            return EXIT_OK
        stack = min(rows, key=lambda r: (r.cost, r.stack)).stack
    budget = args.hop_budget or 10 * net.n * net.alpha * cfg.effective_h_max(net)
    packet = Packet.with_stack(dst, src, stack, args.payload.encode())
    trace = end_to_end(net, result.tables, src, packet, budget)
    _write(args.out, _rows_to_csv(TRACE_COLUMNS, trace.csv_rows(net)))
    print(trace.status, file=sys.stderr)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        spec = experiment.ExperimentSpec(
            n=args.n,
            alpha=args.alpha,
            p_list=args.p,
            h_max_list=args.h_max,
            runs=args.runs,
            seed=args.seed,
            m_attach=args.m_attach,
            default_cost=args.cost,
            oracle_cap=args.oracle_cap,
            with_diameter=args.diameter,
            max_rounds=args.max_rounds,
        )
    except ValueError as e:
        raise UsageError(str(e))
    if not all(0.0 <= p <= 1.0 for p in spec.p_list) or min(spec.h_max_list) < 1:
        raise UsageError("p values must lie in [0, 1] and h_max values be >= 1")
    if not 2 <= spec.alpha <= 255 or spec.n <= spec.m_attach:
        raise UsageError("need 2 <= alpha <= 255 and n > m_attach")
    rows = experiment.run_experiment(spec, args.workers)
    header = f"# extremities: {experiment.EXTREMITIES}; master_seed={spec.seed}\n"
    body = _rows_to_csv(experiment.COLUMNS, [[r[c] for c in experiment.COLUMNS] for r in rows])
    _write(args.out, header + body)
    print("p,h_max,runs,found_rate,oracle_rate,errors,mean_rounds", file=sys.stderr)
    for (p, h), cell in sorted(experiment.summarize(rows).items()):
        mean_rounds = sum(cell.rounds) / len(cell.rounds) if cell.rounds else float("nan")
        print(
            f"{p},{h},{cell.runs},{cell.found_rate:.4f},{cell.oracle_rate:.4f},{cell.errors},{mean_rounds:.2f}",
            file=sys.stderr,
        )
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_height(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--h-max", type=int, default=3, help="maximum stack height (default 3)")
    g.add_argument("--theoretical", action="store_true", help="use alpha*n^2 as the height limit")
    p.add_argument("--max-rounds", type=int, default=100_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stackvector", description="Stack-vector routing toolkit.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random network")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--m-attach", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="simulate to quiescence and dump the tables")
    p.add_argument("--net", required=True)
    _add_height(p)
    p.add_argument("--tables-out", help="tables CSV (default stdout)")
    p.add_argument("--trace-out", help="per-event trace file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="centralized shortest feasible paths")
    p.add_argument("--net", required=True)
    p.add_argument("--h-max", type=int, default=3)
    p.add_argument("--source")
    p.add_argument("--dest")
    p.add_argument("--init", help="initial protocol name")
    p.add_argument("--path-file", help="check the feasibility of the path in this file")
    p.add_argument("--brute", action="store_true", help="exhaustive walk search instead of the product graph")
    p.add_argument("--max-hops", type=int, default=8)
    p.add_argument("--budget", type=int, default=None, help="state (or walk prefix) budget")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("route", help="trace one packet over converged tables")
    p.add_argument("--net", required=True)
    _add_height(p)
    p.add_argument("--source", required=True)
    p.add_argument("--dest", required=True)
    p.add_argument("--stack", help="initial protocol stack, bottom first (default: cheapest source row)")
    p.add_argument("--payload", default="")
    p.add_argument("--hop-budget", type=int, default=0, help="default 10*n*alpha*h_max")
    p.add_argument("--out")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("experiment", help="found-path sweep on random networks")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--alpha", type=int, default=2)
    p.add_argument("--p", type=_csv_list(float), default=[0.05, 0.1, 0.2, 0.3])
    p.add_argument("--h-max", type=_csv_list(int), default=[3])
    p.add_argument("--runs", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m-attach", type=int, default=5)
    p.add_argument("--cost", type=int, default=1, help="cost of every link and function")
    p.add_argument("--oracle-cap", type=int, default=8, help="height cap for oracle_found")
    p.add_argument("--diameter", action="store_true", help="also compute the diameter (slow)")
    p.add_argument("--max-rounds", type=int, default=1_000_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except UsageError as e:
        parser.exit(EXIT_USAGE, f"stackvector {args.command}: error: {e}\n")
    except oracle.OracleBudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
