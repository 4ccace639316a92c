"""Uncapacitated min-cost flow: network types, solver and optimality checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._ssp import ssp_kernel
from .core import TransportInstance, TransportPlan
from .errors import InfeasibleError, InstanceError

DEFAULT_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FlowNetwork:
    """Directed graph with nonnegative arc costs and integer vertex balances.

    Positive balances are supplies, negative ones demands.  Arcs are
    uncapacitated.
    """

    n: int
    tail: np.ndarray
    head: np.ndarray
    cost: np.ndarray
    balance: np.ndarray

    def __post_init__(self) -> None:
        tail = np.asarray(self.tail, dtype=np.int64).reshape(-1)
        head = np.asarray(self.head, dtype=np.int64).reshape(-1)
        cost = np.asarray(self.cost, dtype=np.float64).reshape(-1)
        bal = np.asarray(self.balance, dtype=np.int64).reshape(-1)
        if not (len(tail) == len(head) == len(cost)):
            raise InstanceError("arc arrays must have equal length")
        if len(bal) != self.n:
            raise InstanceError("one balance per vertex is required")
        if len(tail) and (min(tail.min(), head.min()) < 0 or max(tail.max(), head.max()) >= self.n):
            raise InstanceError("arc endpoint out of range")
        if np.any(tail == head):
            raise InstanceError("self-loops are not allowed")
        if not np.all(np.isfinite(cost)) or np.any(cost < 0):
            raise InstanceError("arc costs must be finite and nonnegative")
        if int(bal.sum()) != 0:
            raise InstanceError("balances must sum to zero")
        for name, arr in (("tail", tail), ("head", head), ("cost", cost), ("balance", bal)):
            object.__setattr__(self, name, _frozen(arr))

    @classmethod
    def from_arcs(
        cls, n: int, arcs: Iterable[tuple[int, int, float]], balance: Sequence[int]
    ) -> "FlowNetwork":
        arcs = list(arcs)
        if arcs:
            t, h, c = zip(*arcs)
        else:
            t, h, c = (), (), ()
        return cls(n, np.array(t, dtype=np.int64), np.array(h, dtype=np.int64), np.array(c, dtype=float), balance)

    @property
    def m(self) -> int:
        return len(self.tail)


@dataclass(frozen=True, eq=False)
class Flow:
    """Integer flow value for every arc of a network (zero where idle)."""

    values: np.ndarray

    def imbalance(self, net: FlowNetwork) -> np.ndarray:
        """``e_f(v)``: balance plus inflow minus outflow."""
        e = net.balance.copy()
        np.add.at(e, net.head, self.values)
        np.subtract.at(e, net.tail, self.values)
        return e

    def cost(self, net: FlowNetwork) -> float:
        return float(np.dot(self.values.astype(float), net.cost))

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)


@dataclass(frozen=True, eq=False)
class Potentials:
    values: np.ndarray

    def reduced_costs(self, net: FlowNetwork) -> np.ndarray:
        return net.cost - self.values[net.tail] + self.values[net.head]

    def dual_objective(self, net: FlowNetwork) -> float:
        return float(np.dot(net.balance.astype(float), self.values))


@dataclass(frozen=True)
class ResidualArc:
    tail: int
    head: int
    capacity: float
    cost: float
    arc: int
    forward: bool


def residual_arcs(net: FlowNetwork, f: Flow) -> list[ResidualArc]:
    """Forward arcs always (infinite capacity); a reverse arc per positive flow."""
    out = [
        ResidualArc(int(t), int(h), float("inf"), float(c), a, True)
        for a, (t, h, c) in enumerate(zip(net.tail, net.head, net.cost))
    ]
    for a in np.flatnonzero(f.values > 0):
        out.append(
            ResidualArc(int(net.head[a]), int(net.tail[a]), float(f.values[a]), -float(net.cost[a]), int(a), False)
        )
    return out


@dataclass(frozen=True)
class OptimalityReport:
    certified: bool
    arc: int | None = None
    reduced_cost: float | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.certified


def check_optimality(net: FlowNetwork, f: Flow, y: Potentials, tol: float = DEFAULT_TOL) -> OptimalityReport:
    """Certify ``(f, y)`` through complementary slackness.

    Every residual arc must have reduced cost at least ``-tol``: idle arcs
    need ``c_y >= -tol`` and arcs carrying flow need ``|c_y| <= tol``.  A flow
    that does not meet the balances is reported as a violation as well.
    """
    e = f.imbalance(net)
    if np.any(e != 0):
        v = int(np.flatnonzero(e)[0])
        return OptimalityReport(False, message=f"vertex {v} has imbalance {int(e[v])}")
    if np.any(f.values < 0):
        a = int(np.flatnonzero(f.values < 0)[0])
        return OptimalityReport(False, a, message=f"arc {a} carries negative flow")
    if net.m == 0:
        return OptimalityReport(True)
    rc = y.reduced_costs(net)
    slack = np.where(f.values > 0, -np.abs(rc), rc)
    a = int(np.argmin(slack))
    if slack[a] < -tol:
        kind = "active" if f.values[a] > 0 else "idle"
        return OptimalityReport(
            False,
            a,
            float(rc[a]),
            f"{kind} arc {a} ({int(net.tail[a])}->{int(net.head[a])}) has reduced cost {rc[a]:.3e}",
        )
    return OptimalityReport(True)


@dataclass(frozen=True)
class SolveStats:
    augmentations: int
    worst_reduced_cost: float
    imbalance_monotone: bool


def solve_detailed(net: FlowNetwork, check: bool = False) -> tuple[Flow, Potentials, SolveStats]:
    """Like :func:`solve`, also returning per-run counters.

    With ``check`` the kernel recomputes the smallest residual reduced cost
    and the total imbalance after every augmentation.
    """
    flow, y, stranded, augs, worst, mono = ssp_kernel(
        net.n, net.tail, net.head, net.cost, net.balance, check
    )
    if stranded >= 0:
        raise InfeasibleError(f"excess at vertex {stranded} cannot reach any deficit", stranded)
    return Flow(_frozen(flow)), Potentials(_frozen(y)), SolveStats(int(augs), float(worst), bool(mono))


def solve(net: FlowNetwork) -> tuple[Flow, Potentials]:
    flow, y, _ = solve_detailed(net)
    return flow, y


def transport_network(inst: TransportInstance) -> FlowNetwork:
    """Complete bipartite network: reds are vertices ``0..nr-1``, blues follow."""
    nr, nb = inst.n_red, inst.n_blue
    tail = np.repeat(np.arange(nr, dtype=np.int64), nb)
    head = np.tile(np.arange(nr, nr + nb, dtype=np.int64), nr)
    cost = inst.cost_matrix().reshape(-1)
    balance = np.concatenate([inst.red_supply, -inst.blue_demand])
    return FlowNetwork(nr + nb, tail, head, cost, balance)


def solve_bipartite(
    cost: np.ndarray, supply: np.ndarray, demand: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact transport on a dense cost matrix.

    Returns ``(red_idx, blue_idx, amount)`` for the positive entries.  This is
    the low-overhead entry point used by the recursive solvers.
    """
    nr, nb = cost.shape
    tail = np.repeat(np.arange(nr, dtype=np.int64), nb)
    head = np.tile(np.arange(nr, nr + nb, dtype=np.int64), nr)
    balance = np.concatenate([np.asarray(supply, np.int64), -np.asarray(demand, np.int64)])
    flow, _, stranded, _, _, _ = ssp_kernel(
        nr + nb, tail, head, np.ascontiguousarray(cost, dtype=np.float64).reshape(-1), balance, False
    )
    if stranded >= 0:
        raise InfeasibleError("unbalanced transport subproblem", stranded)
    pos = np.flatnonzero(flow)
    return pos // nb, pos % nb, flow[pos]


def solve_transport(inst: TransportInstance) -> TransportPlan:
    """Exact optimal plan via the complete bipartite network (quadratic size)."""
    r, b, a = solve_bipartite(inst.cost_matrix(), inst.red_supply, inst.blue_demand)
    return TransportPlan(r, b, a)
