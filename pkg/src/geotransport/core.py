"""Instance and plan data model, Lp metrics, cost evaluation and verification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InstanceError

Point = tuple[float, ...]


class Metric(enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, name: "str | Metric") -> "Metric":
        if isinstance(name, Metric):
            return name
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown metric {name!r}; expected l1, l2 or linf") from None

    @property
    def minkowski_p(self) -> float:
        """Exponent understood by scipy's Minkowski-distance routines."""
        return {Metric.L1: 1.0, Metric.L2: 2.0, Metric.LINF: math.inf}[self]

    def norm(self, diff: np.ndarray, axis: int = -1) -> np.ndarray:
        """Norm of coordinate differences along ``axis``."""
        d = np.abs(diff)
        if self is Metric.L1:
            return d.sum(axis=axis)
        if self is Metric.L2:
            return np.sqrt((d * d).sum(axis=axis))
        return d.max(axis=axis)

    def dist(self, a: Sequence[float], b: Sequence[float]) -> float:
        if len(a) != len(b):
            raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
        diffs = [abs(float(x) - float(y)) for x, y in zip(a, b)]
        if not diffs:
            return 0.0
        if self is Metric.L1:
            return math.fsum(diffs)
        if self is Metric.L2:
            return math.hypot(*diffs)
        return max(diffs)

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Distance matrix between the rows of ``a`` and the rows of ``b``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return self.norm(a[:, None, :] - b[None, :, :])

    def box_diameter(self, width: float, height: float) -> float:
        """Diameter of an axis-parallel box with the given side lengths."""
        if self is Metric.L1:
            return width + height
        if self is Metric.L2:
            return math.hypot(width, height)
        return max(width, height)

    def cell_half_diameter(self, side: float) -> float:
        """Largest distance from the centre of a square cell to a point inside it."""
        return 0.5 * self.box_diameter(side, side)


def metric_dist(a: Sequence[float], b: Sequence[float], m: Metric | str) -> float:
    return Metric.parse(m).dist(a, b)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TransportInstance:
    """Balanced red/blue weighted point sets under an Lp metric.

    Coordinates are stored as ``(k, d)`` float arrays and weights as int64
    arrays; all arrays are read-only after construction.
    """

    red_xy: np.ndarray
    red_supply: np.ndarray
    blue_xy: np.ndarray
    blue_demand: np.ndarray
    metric: Metric = Metric.L2

    def __post_init__(self) -> None:
        metric = Metric.parse(self.metric)
        object.__setattr__(self, "metric", metric)
        rxy = np.array(self.red_xy, dtype=float, ndmin=2)
        bxy = np.array(self.blue_xy, dtype=float, ndmin=2)
        rs = np.array(self.red_supply, dtype=np.int64, ndmin=1)
        bd = np.array(self.blue_demand, dtype=np.int64, ndmin=1)
        if rxy.size == 0:
            rxy = rxy.reshape(0, bxy.shape[1] if bxy.size else 2)
        if bxy.size == 0:
            bxy = bxy.reshape(0, rxy.shape[1])
        if rxy.ndim != 2 or bxy.ndim != 2 or rxy.shape[1] != bxy.shape[1]:
            raise InstanceError("red and blue coordinates must share one dimension")
        if len(rxy) != len(rs) or len(bxy) != len(bd):
            raise InstanceError("coordinate and weight counts differ")
        if len(rs) == 0 or len(bd) == 0:
            raise InstanceError("an instance needs at least one red and one blue point")
        if not (np.all(np.isfinite(rxy)) and np.all(np.isfinite(bxy))):
            raise InstanceError("coordinates must be finite")
        if np.any(rs < 1) or np.any(bd < 1):
            raise InstanceError("supplies and demands must be positive integers")
        if int(rs.sum()) != int(bd.sum()):
            raise InstanceError(
                f"unbalanced instance: total supply {int(rs.sum())} != total demand {int(bd.sum())}"
            )
        for name, arr in (("red_xy", rxy), ("blue_xy", bxy), ("red_supply", rs), ("blue_demand", bd)):
            object.__setattr__(self, name, _frozen(arr))

    @classmethod
    def from_points(
        cls,
        reds: Iterable[tuple[Sequence[float], int]],
        blues: Iterable[tuple[Sequence[float], int]],
        metric: Metric | str = Metric.L2,
    ) -> "TransportInstance":
        reds = list(reds)
        blues = list(blues)
        return cls(
            red_xy=[p for p, _ in reds],
            red_supply=[w for _, w in reds],
            blue_xy=[p for p, _ in blues],
            blue_demand=[w for _, w in blues],
            metric=metric,
        )

    @property
    def n_red(self) -> int:
        return len(self.red_supply)

    @property
    def n_blue(self) -> int:
        return len(self.blue_demand)

    @property
    def n(self) -> int:
        return self.n_red + self.n_blue

    @property
    def dim(self) -> int:
        return self.red_xy.shape[1]

    @property
    def total_mass(self) -> int:
        return int(self.red_supply.sum())

    @property
    def max_weight(self) -> int:
        """The largest single supply or demand (U)."""
        return int(max(self.red_supply.max(), self.blue_demand.max()))

    def cost_matrix(self) -> np.ndarray:
        return self.metric.pairwise(self.red_xy, self.blue_xy)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransportInstance):
            return NotImplemented
        return (
            self.metric is other.metric
            and np.array_equal(self.red_xy, other.red_xy)
            and np.array_equal(self.blue_xy, other.blue_xy)
            and np.array_equal(self.red_supply, other.red_supply)
            and np.array_equal(self.blue_demand, other.blue_demand)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse transport map stored as parallel arrays sorted by (red, blue).

    Only the entry-level invariants are enforced here (positive amounts, one
    entry per pair); feasibility against an instance is checked by
    :func:`verify_plan`.
    """

    red: np.ndarray
    blue: np.ndarray
    amount: np.ndarray

    def __post_init__(self) -> None:
        r = np.array(self.red, dtype=np.int64, ndmin=1)
        b = np.array(self.blue, dtype=np.int64, ndmin=1)
        a = np.array(self.amount, dtype=np.int64, ndmin=1)
        if not (len(r) == len(b) == len(a)):
            raise InstanceError("plan arrays must have equal length")
        if np.any(a < 1):
            raise InstanceError("plan amounts must be positive integers")
        if np.any(r < 0) or np.any(b < 0):
            raise InstanceError("plan indices must be nonnegative")
        order = np.lexsort((b, r))
        r, b, a = r[order], b[order], a[order]
        if len(r) > 1 and np.any((r[1:] == r[:-1]) & (b[1:] == b[:-1])):
            raise InstanceError("plan contains more than one entry for some (red, blue) pair")
        for name, arr in (("red", r), ("blue", b), ("amount", a)):
            object.__setattr__(self, name, _frozen(arr))

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[int, int, int]]) -> "TransportPlan":
        entries = list(entries)
        if not entries:
            return cls([], [], [])
        r, b, a = zip(*entries)
        return cls(r, b, a)

    @classmethod
    def aggregate(cls, red: np.ndarray, blue: np.ndarray, amount: np.ndarray) -> "TransportPlan":
        """Build a plan from possibly repeated pairs by summing their amounts."""
        red = np.asarray(red, dtype=np.int64)
        blue = np.asarray(blue, dtype=np.int64)
        amount = np.asarray(amount, dtype=np.int64)
        keep = amount != 0
        red, blue, amount = red[keep], blue[keep], amount[keep]
        if len(red) == 0:
            return cls([], [], [])
        order = np.lexsort((blue, red))
        red, blue, amount = red[order], blue[order], amount[order]
        starts = np.flatnonzero(np.r_[True, (red[1:] != red[:-1]) | (blue[1:] != blue[:-1])])
        return cls(red[starts], blue[starts], np.add.reduceat(amount, starts))

    def entries(self) -> list[tuple[int, int, int]]:
        return list(zip(self.red.tolist(), self.blue.tolist(), self.amount.tolist()))

    def __len__(self) -> int:
        return len(self.amount)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransportPlan):
            return NotImplemented
        return (
            np.array_equal(self.red, other.red)
            and np.array_equal(self.blue, other.blue)
            and np.array_equal(self.amount, other.amount)
        )

    __hash__ = None  # type: ignore[assignment]


def _check_indices(inst: TransportInstance, plan: TransportPlan) -> None:
    if len(plan) and (plan.red.max() >= inst.n_red or plan.blue.max() >= inst.n_blue):
        raise IndexError("plan refers to a point index outside the instance")


def plan_cost(inst: TransportInstance, plan: TransportPlan) -> float:
    _check_indices(inst, plan)
    if len(plan) == 0:
        return 0.0
    d = inst.metric.norm(inst.red_xy[plan.red] - inst.blue_xy[plan.blue])
    return float(math.fsum((d * plan.amount).tolist()))


@dataclass(frozen=True)
class PlanReport:
    ok: bool
    violations: tuple[str, ...] = ()
    short_reds: tuple[int, ...] = ()
    short_blues: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(self.violations)


def verify_plan(inst: TransportInstance, plan: TransportPlan) -> PlanReport:
    """Check a plan against an instance; violations are returned, never raised."""
    problems: list[str] = []
    bad_r: list[int] = []
    bad_b: list[int] = []
    if len(plan) and (plan.red.max() >= inst.n_red or plan.blue.max() >= inst.n_blue):
        return PlanReport(False, ("plan refers to a point index outside the instance",))
    sent = np.bincount(plan.red, weights=plan.amount, minlength=inst.n_red).astype(np.int64)
    got = np.bincount(plan.blue, weights=plan.amount, minlength=inst.n_blue).astype(np.int64)
    for i in np.flatnonzero(sent != inst.red_supply):
        bad_r.append(int(i))
        problems.append(f"red {i}: ships {sent[i]}, supply {inst.red_supply[i]}")
    for j in np.flatnonzero(got != inst.blue_demand):
        bad_b.append(int(j))
        problems.append(f"blue {j}: receives {got[j]}, demand {inst.blue_demand[j]}")
    return PlanReport(not problems, tuple(problems), tuple(bad_r), tuple(bad_b))


@dataclass(frozen=True)
class InstanceStats:
    spread: float
    diameter: float
    total_mass: int
    min_positive_distance: float
    all_coincident: bool = field(default=False)


def _diameter(xy: np.ndarray, metric: Metric) -> float:
    if len(xy) < 2:
        return 0.0
    if metric is Metric.L1 and xy.shape[1] == 2:
        s, t = xy[:, 0] + xy[:, 1], xy[:, 0] - xy[:, 1]
        return float(max(np.ptp(s), np.ptp(t)))
    if metric is Metric.LINF:
        return float(np.ptp(xy, axis=0).max())
    cand = xy
    if metric is Metric.L2 and xy.shape[1] == 2 and len(xy) > 64:
        from scipy.spatial import ConvexHull, QhullError

        try:
            cand = xy[ConvexHull(xy).vertices]
        except QhullError:  # collinear input
            lo = np.lexsort((xy[:, 1], xy[:, 0]))
            cand = xy[[lo[0], lo[-1]]]
    best = 0.0
    for start in range(0, len(cand), 512):
        best = max(best, float(metric.pairwise(cand[start:start + 512], cand).max()))
    return best


def instance_stats(inst: TransportInstance) -> InstanceStats:
    """Spread, diameter and total mass of ``R ∪ B``.

    When every point coincides the spread is undefined; it is reported as 1
    with ``all_coincident`` set.
    """
    from scipy.spatial import cKDTree

    xy = np.unique(np.vstack([inst.red_xy, inst.blue_xy]), axis=0)
    mass = inst.total_mass
    if len(xy) < 2:
        return InstanceStats(1.0, 0.0, mass, 0.0, all_coincident=True)
    dist, _ = cKDTree(xy).query(xy, k=2, p=inst.metric.minkowski_p)
    dmin = float(dist[:, 1].min())
    diam = _diameter(xy, inst.metric)
    return InstanceStats(diam / dmin, diam, mass, dmin)
