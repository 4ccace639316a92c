"""Benchmark matrix runner: one timed solve per (algorithm, n, seed) cell."""

from __future__ import annotations

import csv
import math
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Callable, Iterable, Sequence

import numpy as np

from . import exact_orlin, grid_approx, mcf, wspd_approx
from .core import Metric, TransportInstance, TransportPlan, plan_cost, verify_plan
from .generators import Distribution, generate

SCHEMA_VERSION = 1
ALGORITHMS = ("exact", "grid", "wspd", "oracle")
DEFAULT_ORACLE_LIMIT = 2000


@dataclass(frozen=True)
class BenchRecord:
    schema_version: int
    algo: str
    n: int
    U: int
    eps: float | None
    seed: int
    dist: str
    wall_ms: float
    cost: float | None
    oracle_cost: float | None
    ratio: float | None
    status: str
    error: str = ""


CSV_COLUMNS = tuple(f.name for f in fields(BenchRecord))


def run_solver(
    algo: str,
    inst: TransportInstance,
    eps: float | None = None,
    seed: int | None = None,
    bounded_spread: bool = False,
    check_invariants: bool = False,
) -> TransportPlan:
    """Dispatch to one of the solvers by name."""
    if algo == "oracle":
        return mcf.solve_transport(inst)
    if algo == "exact":
        return exact_orlin.solve(inst, check_invariants=check_invariants)[0]
    if eps is None:
        raise ValueError(f"--eps is required for algo {algo}")
    if algo == "wspd":
        return wspd_approx.solve(inst, eps)
    if algo == "grid":
        if seed is None:
            raise ValueError("--seed (or EMD_SEED) is required for algo grid")
        mode = grid_approx.GridMode.BOUNDED if bounded_spread else grid_approx.GridMode.GENERAL
        return grid_approx.solve(inst, eps, np.random.default_rng(seed), mode)
    raise ValueError(f"unknown algorithm {algo!r}")


def run_cell(
    algo: str,
    n: int,
    max_weight: int,
    seed: int,
    eps: float | None = None,
    dist: Distribution | str = Distribution.UNIFORM,
    metric: Metric | str = Metric.L2,
    oracle_limit: int = DEFAULT_ORACLE_LIMIT,
) -> BenchRecord:
    """Generate, solve and score one cell; failures become ``status=error``."""
    dist = Distribution.parse(dist)
    base = dict(schema_version=SCHEMA_VERSION, algo=algo, n=n, U=max_weight, eps=eps, seed=seed, dist=dist.value)
    try:
        inst = generate(n, max_weight, dist, seed, metric)
        start = time.perf_counter()
        plan = run_solver(algo, inst, eps, seed)
        wall = (time.perf_counter() - start) * 1000.0
        report = verify_plan(inst, plan)
        if not report:
            raise RuntimeError(f"infeasible plan: {report}")
        cost = plan_cost(inst, plan)
        oracle = None
        ratio = None
        if n <= oracle_limit:
            oracle = cost if algo == "oracle" else plan_cost(inst, mcf.solve_transport(inst))
            ratio = cost / oracle if oracle > 0 else 1.0
        return BenchRecord(**base, wall_ms=wall, cost=cost, oracle_cost=oracle, ratio=ratio, status="ok")
    except Exception as exc:  # recorded per cell so the matrix keeps going
        detail = traceback.format_exception_only(type(exc), exc)[-1].strip()
        return BenchRecord(
            **base, wall_ms=math.nan, cost=None, oracle_cost=None, ratio=None, status="error", error=detail
        )


def run_matrix(
    algos: Sequence[str],
    sizes: Sequence[int],
    seeds: Sequence[int],
    max_weight: int = 10,
    eps: float | None = None,
    dist: Distribution | str = Distribution.UNIFORM,
    metric: Metric | str = Metric.L2,
    jobs: int = 1,
    oracle_limit: int = DEFAULT_ORACLE_LIMIT,
    progress: Callable[[BenchRecord], None] | None = None,
) -> list[BenchRecord]:
    """Every cell of ``algos x sizes x seeds``, in that order.

    With ``jobs > 1`` cells run on a thread pool; records are still returned
    in matrix order.
    """
    cells = [(a, n, s) for a in algos for n in sizes for s in seeds]

    def one(cell: tuple[str, int, int]) -> BenchRecord:
        a, n, s = cell
        cell_eps = None if a in ("exact", "oracle") else eps
        rec = run_cell(a, n, max_weight, s, cell_eps, dist, metric, oracle_limit)
        if progress is not None:
            progress(rec)
        return rec

    if jobs <= 1:
        return [one(c) for c in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, cells))


def write_csv(records: Iterable[BenchRecord], stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        row = asdict(rec)
        writer.writerow({k: "" if v is None else v for k, v in row.items()})


def loglog_slope(sizes: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of ``log(time)`` against ``log(n)``."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(times, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def plot_scaling(records: Sequence[BenchRecord], path: str) -> bool:
    """Log-log time-vs-n plot per algorithm; ``False`` when matplotlib is absent."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    for algo in sorted({r.algo for r in records}):
        by_n: dict[int, list[float]] = {}
        for r in records:
            if r.algo == algo and r.status == "ok":
                by_n.setdefault(r.n, []).append(r.wall_ms)
        if not by_n:
            continue
        ns = sorted(by_n)
        ax.plot(ns, [float(np.median(by_n[n])) for n in ns], marker="o", label=algo)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("median wall time (ms)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return True
