"""Shared helpers: random instances and an LP oracle independent of ``mcf``."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from geotransport import TransportInstance
from geotransport.generators import generate

METRICS = ("l1", "l2", "linf")


def lp_optimum(inst: TransportInstance) -> float:
    """Optimal transport cost from the HiGHS LP solver on the dense formulation."""
    nr, nb = inst.n_red, inst.n_blue
    cost = inst.cost_matrix().reshape(-1)
    rows = np.concatenate([np.repeat(np.arange(nr), nb), nr + np.tile(np.arange(nb), nr)])
    cols = np.concatenate([np.arange(nr * nb), np.arange(nr * nb)])
    a_eq = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nr + nb, nr * nb)).tocsr()
    b_eq = np.concatenate([inst.red_supply, inst.blue_demand]).astype(float)
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def random_instance(rng: np.random.Generator, n_max: int = 40, u_max: int = 20, metric: str | None = None,
                    dist: str = "uniform") -> TransportInstance:
    n = int(rng.integers(2, n_max + 1))
    u = int(rng.integers(2, u_max + 1))
    metric = metric or METRICS[int(rng.integers(3))]
    if dist == "high-spread" and n < 3:
        n = 3
    return generate(n, u, dist, int(rng.integers(2**31)), metric)


def rel_gap(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-12)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240517)


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, ok: bool, detail: str) -> None:
    """Record one acceptance verdict; all verdicts are repeated in the terminal summary."""
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
