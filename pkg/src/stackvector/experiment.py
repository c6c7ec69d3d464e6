"""Found-path experiments on random preferential-attachment networks."""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import network, oracle
from .engine import EngineConfig
from .simulator import run_to_quiescence

log = logging.getLogger(__name__)

COLUMNS = [
    "n", "alpha", "p", "h_max", "run", "run_seed", "source", "dest",
    "rounds", "messages", "max_stack", "rows",
    "found", "cost", "oracle_cost_hmax", "oracle_found", "oracle_cost", "reason",
    "diam", "wall_time", "error",
]  # fmt: skip

EXTREMITIES = "first generated node -> last added node"


@dataclass
class ExperimentSpec:
    n: int
    alpha: int
    p_list: Sequence[float]
    h_max_list: Sequence[int]
    runs: int
    seed: int = 0
    m_attach: int = 5
    default_cost: int = 1
    oracle_cap: int = 8
    with_diameter: bool = False
    max_rounds: int = 1_000_000

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.p_list or not self.h_max_list:
            raise ValueError("p and h_max lists must be non-empty")


def run_seed(master: int, cell: int, run: int) -> int:
    """Seed for one run; independent of completion order and of the h_max sweep."""
    return int(np.random.SeedSequence([master, cell, run]).generate_state(1, np.uint64)[0])


def _make_network(spec: ExperimentSpec, p: float, seed: int) -> network.Network:
    net = network.generate_random(spec.n, spec.alpha, p, spec.m_attach, seed)
    if spec.default_cost != 1:
        net = network.Network(net.alphabet, net.nodes.values(), net.links, {}, spec.default_cost)
    return net


def _one_network(args: Tuple[ExperimentSpec, int, int]) -> List[dict]:
    """All h_max rows for one generated network."""
    spec, p_index, run = args
    p = spec.p_list[p_index]
    seed = run_seed(spec.seed, p_index, run)
    rows = []
    try:
        net = _make_network(spec, p, seed)
        src, dst = network.first_and_last(net)
        cap = max(spec.oracle_cap, max(spec.h_max_list))
        best = oracle.shortest_from(net, src, dst, cap)
    except Exception as e:  # recorded per run; the sweep goes on
        log.exception("run %d at p=%s failed", run, p)
        return [_error_row(spec, p, h, run, seed, e) for h in spec.h_max_list]
    for h in spec.h_max_list:
        row = {c: "" for c in COLUMNS}
        row.update(n=spec.n, alpha=spec.alpha, p=p, h_max=h, run=run, run_seed=seed, source=src, dest=dst)
        try:
            result = run_to_quiescence(net, EngineConfig(h_max=h), spec.max_rounds)
            m = result.metrics
            costs = [r.cost for x in range(net.alpha) if (r := result.tables[src].lookup(dst, (x,)))]
            within = oracle.shortest_from(net, src, dst, h)
            row.update(
                rounds=m.rounds_to_quiescence,
                messages=m.total_messages,
                max_stack=m.max_message_stack_height,
                rows=m.total_rows,
                found=int(bool(costs)),
                cost=min(costs) if costs else "",
                oracle_cost_hmax=within[1].cost if within else "",
                oracle_found=int(best is not None),
                oracle_cost=best[1].cost if best else "",
                wall_time=round(m.wall_time, 4),
            )
            if costs:
                row["reason"] = "found"
            elif best is not None:
                row["reason"] = "height_cap"
            else:
                row["reason"] = "no_feasible_path"
            if spec.with_diameter:
                d = oracle.diameter(net, h)
                row["diam"] = "" if d is None else d
        except Exception as e:
            log.exception("run %d at p=%s h_max=%d failed", run, p, h)
            row = _error_row(spec, p, h, run, seed, e)
        rows.append(row)
    return rows


def _error_row(spec, p, h, run, seed, exc) -> dict:
    row = {c: "" for c in COLUMNS}
    row.update(n=spec.n, alpha=spec.alpha, p=p, h_max=h, run=run, run_seed=seed)
    row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> List[dict]:
    """Rows ordered by (p, h_max, run) whatever the execution order."""
    jobs = [(spec, i, r) for i in range(len(spec.p_list)) for r in range(spec.runs)]
    started = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            batches = list(pool.map(_one_network, jobs, chunksize=4))
    else:
        batches = [_one_network(job) for job in jobs]
    log.info("experiment finished in %.1fs", time.perf_counter() - started)
    h_index = {h: i for i, h in enumerate(spec.h_max_list)}
    keyed = []
    for (_, pi, run), batch in zip(jobs, batches):
        for row in batch:
            keyed.append(((pi, h_index[row["h_max"]], run), row))
    keyed.sort(key=lambda kv: kv[0])
    return [row for _, row in keyed]


@dataclass
class CellSummary:
    p: float
    h_max: int
    runs: int = 0
    found: int = 0
    oracle_found: int = 0
    errors: int = 0
    rounds: List[int] = field(default_factory=list)
    messages: List[int] = field(default_factory=list)

    @property
    def found_rate(self) -> float:
        return self.found / self.runs if self.runs else 0.0

    @property
    def oracle_rate(self) -> float:
        return self.oracle_found / self.runs if self.runs else 0.0


def summarize(rows: Sequence[dict]) -> Dict[Tuple[float, int], CellSummary]:
    cells: Dict[Tuple[float, int], CellSummary] = {}
    for row in rows:
        key = (float(row["p"]), int(row["h_max"]))
        cell = cells.setdefault(key, CellSummary(*key))
        cell.runs += 1
        if row["error"]:
            cell.errors += 1
            continue
        cell.found += int(row["found"])
        cell.oracle_found += int(row["oracle_found"])
        cell.rounds.append(int(row["rounds"]))
        cell.messages.append(int(row["messages"]))
    return cells


def found_by_run(rows: Sequence[dict]) -> Dict[Tuple[float, int], Dict[int, int]]:
    """``(p, run) -> {h_max: found}`` for per-network comparisons across h_max."""
    out: Dict[Tuple[float, int], Dict[int, int]] = defaultdict(dict)
    for row in rows:
        if not row["error"]:
            out[(float(row["p"]), int(row["run"]))][int(row["h_max"])] = int(row["found"])
    return dict(out)
