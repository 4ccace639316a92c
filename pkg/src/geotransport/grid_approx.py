"""Randomized recursive grid approximation for planar transport.

A subproblem covering ``m`` points is cut by a randomly shifted grid whose
cells have side ``ell / m**(1/6)`` (``ell`` is the side of the smallest
bounding square).  Each nonempty cell keeps the balanced part of its mass as
an internal subproblem, and the surplus of every imbalanced cell is merged
into one point at the cell centre.  Those merged points form a single
external subproblem; its plan is then spread back over the real points the
surplus came from.  Subproblems with at most ``max(n**(eps/4), 2)`` points
(``n`` is the size of the root instance) are solved exactly.

Two drivers exist:

* ``bounded`` buckets explicit point arrays and solves every external
  subproblem exactly.
* ``general`` keeps the primary recursion inside two :class:`RangeStore`
  instances (one per colour) so a subproblem is just a rectangle, finds the
  nonempty cells by a top-down descent over the grid, and hands every
  external subproblem to the explicit driver one level down.  External
  subproblems two levels down are solved exactly.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import Metric, TransportInstance, TransportPlan
from .mcf import solve_bipartite
from .rangestore import RangeStore, _sum_count

log = logging.getLogger(__name__)

#: Exponent of the cell side: cells have side ``ell / m**CELL_EXPONENT``.
CELL_EXPONENT = 1.0 / 6.0
#: Relative slack allowed in the redistribution bound (cell sides are floats).
REDISTRIBUTION_SLACK = 1e-9

Rect = tuple[float, float, float, float]


class GridMode(enum.Enum):
    BOUNDED = "bounded"
    GENERAL = "general"

    @classmethod
    def parse(cls, mode: "str | GridMode") -> "GridMode":
        if isinstance(mode, GridMode):
            return mode
        key = str(mode).strip().lower()
        if key in ("bounded", "bounded-spread", "bounded_spread"):
            return cls.BOUNDED
        if key == "general":
            return cls.GENERAL
        raise ValueError(f"unknown grid mode {mode!r}")


# --------------------------------------------------------------------------
# grid geometry


def grid_params(side: float, m: int) -> tuple[float, int, float]:
    """``(cell side, levels, span)`` for a bounding square of ``side`` over ``m`` points."""
    if side <= 0 or m < 1:
        raise ValueError("side must be positive and m at least 1")
    cell = side / m**CELL_EXPONENT
    levels = math.ceil(math.log2(1.0 + side / cell))
    return cell, levels, 2.0 ** (levels + 1) * cell


@dataclass(frozen=True)
class ShiftedGrid:
    """Uniform grid of ``2**(levels+1)`` cells per side over the square
    ``[a - span, a] x [b - span, b]`` translated by ``shift``, where ``(a, b)``
    is the top-right corner of the bounding square."""

    corner: tuple[float, float]
    side: float
    cell: float
    shift: tuple[float, float]
    levels: int

    @classmethod
    def build(cls, corner: tuple[float, float], side: float, cell: float, shift: tuple[float, float]) -> "ShiftedGrid":
        levels = math.ceil(math.log2(1.0 + side / cell))
        return cls((float(corner[0]), float(corner[1])), float(side), float(cell),
                   (float(shift[0]), float(shift[1])), levels)

    @property
    def span(self) -> float:
        return 2.0 ** (self.levels + 1) * self.cell

    @property
    def cells_per_side(self) -> int:
        return 2 ** (self.levels + 1)

    @property
    def origin(self) -> tuple[float, float]:
        return (self.corner[0] - self.span + self.shift[0], self.corner[1] - self.span + self.shift[1])

    def lines(self, axis: int) -> np.ndarray:
        """Grid line coordinates along ``axis``; cell ``i`` is ``[lines[i], lines[i+1])``."""
        return self.origin[axis] + np.arange(self.cells_per_side + 1) * self.cell

    def locate(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cell indices of each point (may fall outside ``0..cells_per_side-1``)."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        ix = np.searchsorted(self.lines(0), xy[:, 0], side="right") - 1
        iy = np.searchsorted(self.lines(1), xy[:, 1], side="right") - 1
        return ix, iy

    def cell_rect(self, ix: int, iy: int) -> Rect:
        """Closed rectangle equal to the half-open cell ``(ix, iy)``."""
        lx, ly = self.lines(0), self.lines(1)
        return (float(lx[ix]), float(np.nextafter(lx[ix + 1], -np.inf)),
                float(ly[iy]), float(np.nextafter(ly[iy + 1], -np.inf)))

    def center(self, ix: int, iy: int) -> tuple[float, float]:
        lx, ly = self.lines(0), self.lines(1)
        return (0.5 * (lx[ix] + lx[ix + 1]), 0.5 * (ly[iy] + ly[iy + 1]))


def bounding_square(xy: np.ndarray) -> tuple[tuple[float, float], float]:
    """Top-right corner and side of the smallest square anchored at the lower-left of ``xy``."""
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    side = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    return (float(lo[0] + side), float(lo[1] + side)), side


def moat_radius(side: float, m: int) -> float:
    return side / float(m) ** 3


def random_grid(corner: tuple[float, float], side: float, cell: float, rng: np.random.Generator) -> ShiftedGrid:
    shift = rng.random(2) * cell
    return ShiftedGrid.build(corner, side, cell, (shift[0], shift[1]))


def shift_is_safe(grid: ShiftedGrid, xy: np.ndarray, moat: float) -> bool:
    """True when no point lies within ``moat`` of a grid line (or outside the grid)."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    k = grid.cells_per_side
    for axis in range(2):
        lines = grid.lines(axis)
        coord = xy[:, axis]
        idx = np.searchsorted(lines, coord, side="right") - 1
        if np.any(idx < 0) or np.any(idx >= k):
            return False
        if np.any(coord - lines[idx] <= moat) or np.any(lines[idx + 1] - coord <= moat):
            return False
    return True


def _safe_grid(xy: np.ndarray, corner, side: float, cell: float, moat: float,
               rng: np.random.Generator) -> tuple[ShiftedGrid, int]:
    attempts = 0
    while True:
        attempts += 1
        grid = random_grid(corner, side, cell, rng)
        if shift_is_safe(grid, xy, moat):
            return grid, attempts


def sample_safe_grid(xy: np.ndarray, cell: float, rng: np.random.Generator) -> ShiftedGrid:
    """Resample shifts of a grid with cell side ``cell`` over ``xy`` until one is safe.

    The moat radius is ``ell / m**3`` for ``m`` points with bounding-square
    side ``ell``.
    """
    if cell <= 0:
        raise ValueError("cell side must be positive")
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    corner, side = bounding_square(xy)
    return _safe_grid(xy, corner, side, cell, moat_radius(side, len(xy)), rng)[0]


# --------------------------------------------------------------------------
# explicit subproblems


@dataclass(frozen=True, eq=False)
class Subproblem:
    """Explicit recursive work item.

    ``red_ids``/``blue_ids`` index the point universe of the run (the input
    instance or the merged points of an external subproblem); a point split
    across subproblems appears in each with part of its weight.
    """

    red_ids: np.ndarray
    red_xy: np.ndarray
    red_w: np.ndarray
    blue_ids: np.ndarray
    blue_xy: np.ndarray
    blue_w: np.ndarray
    depth: int = 0

    @classmethod
    def from_instance(cls, inst: TransportInstance) -> "Subproblem":
        return cls(np.arange(inst.n_red), inst.red_xy, inst.red_supply,
                   np.arange(inst.n_blue), inst.blue_xy, inst.blue_demand)

    @property
    def m(self) -> int:
        return len(self.red_ids) + len(self.blue_ids)

    @property
    def mass(self) -> int:
        return int(self.red_w.sum())

    @property
    def rect(self) -> Rect:
        xy = np.vstack([self.red_xy, self.blue_xy])
        return (float(xy[:, 0].min()), float(xy[:, 0].max()), float(xy[:, 1].min()), float(xy[:, 1].max()))


@dataclass(frozen=True, eq=False)
class ExternalHandles:
    """Where the merged mass of every external point came from.

    The pieces of merged red point ``c`` are
    ``red_ids[red_offsets[c]:red_offsets[c+1]]`` with amounts taken from the
    parallel ``red_amounts`` slice; likewise for blue.
    """

    red_centers: np.ndarray
    red_mass: np.ndarray
    red_offsets: np.ndarray
    red_ids: np.ndarray
    red_amounts: np.ndarray
    blue_centers: np.ndarray
    blue_mass: np.ndarray
    blue_offsets: np.ndarray
    blue_ids: np.ndarray
    blue_amounts: np.ndarray
    cell_side: float

    @property
    def n_points(self) -> int:
        return len(self.red_mass) + len(self.blue_mass)

    @property
    def mass(self) -> int:
        return int(self.red_mass.sum())

    def subproblem(self, depth: int) -> Subproblem:
        return Subproblem(np.arange(len(self.red_mass)), self.red_centers, self.red_mass,
                          np.arange(len(self.blue_mass)), self.blue_centers, self.blue_mass, depth)


@dataclass(frozen=True, eq=False)
class Partition:
    internal: list[Subproblem]
    external: Subproblem
    handles: ExternalHandles
    cells: np.ndarray  # (k, 2) indices of the nonempty cells


@njit(cache=True)
def _take_surplus(starts, weights, need):
    """Per segment, greedily take points whose weight fits the remaining need
    (in order), then split the first untouched point for whatever is left."""
    taken = np.zeros(len(weights), np.int64)
    for c in range(len(starts) - 1):
        rem = need[c]
        if rem == 0:
            continue
        for i in range(starts[c], starts[c + 1]):
            if weights[i] <= rem:
                taken[i] = weights[i]
                rem -= weights[i]
        if rem > 0:
            for i in range(starts[c], starts[c + 1]):
                if taken[i] == 0:
                    taken[i] = rem
                    rem = 0
                    break
    return taken


def _segments(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stable sort order, unique keys and segment starts (with end sentinel)."""
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]]) if len(sk) else np.empty(0, np.int64)
    return order, sk[starts], np.r_[starts, len(sk)].astype(np.int64)


def _csr(groups: np.ndarray, n_groups: int, ids: np.ndarray, amounts: np.ndarray):
    order = np.argsort(groups, kind="stable")
    offsets = np.zeros(n_groups + 1, np.int64)
    np.add.at(offsets, groups + 1, 1)
    return np.cumsum(offsets), ids[order], amounts[order]


def partition(sub: Subproblem, grid: ShiftedGrid) -> Partition:
    """Split ``sub`` along the cells of ``grid``.

    Inside each cell the lighter colour stays whole; points of the heavier
    colour are moved to the external side in index order while they fit the
    surplus, and one more point is split if needed so the exported mass
    equals the surplus exactly.
    """
    k = grid.cells_per_side
    rix, riy = grid.locate(sub.red_xy)
    bix, biy = grid.locate(sub.blue_xy)
    if min(rix.min(initial=0), riy.min(initial=0), bix.min(initial=0), biy.min(initial=0)) < 0 or \
            max(rix.max(initial=0), riy.max(initial=0), bix.max(initial=0), biy.max(initial=0)) >= k:
        raise ValueError("grid does not cover the subproblem")
    rkey = rix * k + riy
    bkey = bix * k + biy
    cells = np.union1d(rkey, bkey)
    wr = np.zeros(len(cells), np.int64)
    wb = np.zeros(len(cells), np.int64)
    rc = np.searchsorted(cells, rkey)
    bc = np.searchsorted(cells, bkey)
    np.add.at(wr, rc, sub.red_w)
    np.add.at(wb, bc, sub.blue_w)

    r_order, _, _ = _segments(rc)
    b_order, _, _ = _segments(bc)
    need_r = np.maximum(wr - wb, 0)
    need_b = np.maximum(wb - wr, 0)
    r_starts = np.searchsorted(rc[r_order], np.arange(len(cells) + 1))
    b_starts = np.searchsorted(bc[b_order], np.arange(len(cells) + 1))
    r_taken = np.empty(len(rc), np.int64)
    r_taken[r_order] = _take_surplus(r_starts, sub.red_w[r_order], need_r)
    b_taken = np.empty(len(bc), np.int64)
    b_taken[b_order] = _take_surplus(b_starts, sub.blue_w[b_order], need_b)

    centers = np.array([grid.center(c // k, c % k) for c in cells.tolist()]).reshape(-1, 2)
    red_cells = np.flatnonzero(need_r)
    blue_cells = np.flatnonzero(need_b)
    # external point index per cell
    red_slot = np.full(len(cells), -1, np.int64)
    red_slot[red_cells] = np.arange(len(red_cells))
    blue_slot = np.full(len(cells), -1, np.int64)
    blue_slot[blue_cells] = np.arange(len(blue_cells))
    rp = np.flatnonzero(r_taken)
    bp = np.flatnonzero(b_taken)
    r_off, r_ids, r_amt = _csr(red_slot[rc[rp]], len(red_cells), sub.red_ids[rp], r_taken[rp])
    b_off, b_ids, b_amt = _csr(blue_slot[bc[bp]], len(blue_cells), sub.blue_ids[bp], b_taken[bp])
    handles = ExternalHandles(
        centers[red_cells], need_r[red_cells], r_off, r_ids, r_amt,
        centers[blue_cells], need_b[blue_cells], b_off, b_ids, b_amt, grid.cell,
    )

    red_left = sub.red_w - r_taken
    blue_left = sub.blue_w - b_taken
    internal = []
    for c in np.flatnonzero(np.minimum(wr, wb) > 0).tolist():
        rs = r_order[r_starts[c]:r_starts[c + 1]]
        rs = rs[red_left[rs] > 0]
        bs = b_order[b_starts[c]:b_starts[c + 1]]
        bs = bs[blue_left[bs] > 0]
        internal.append(Subproblem(sub.red_ids[rs], sub.red_xy[rs], red_left[rs],
                                   sub.blue_ids[bs], sub.blue_xy[bs], blue_left[bs], sub.depth))
    cell_idx = np.stack([cells // k, cells % k], axis=1)
    return Partition(internal, handles.subproblem(sub.depth + 1), handles, cell_idx)


# --------------------------------------------------------------------------
# redistribution


@njit(cache=True)
def _redistribute(ci, cj, amt, r_off, r_ids, r_amt, b_off, b_ids, b_amt):
    r_left = r_amt.copy()
    b_left = b_amt.copy()
    r_ptr = r_off[:-1].copy()
    b_ptr = b_off[:-1].copy()
    cap = len(ci) + len(r_ids) + len(b_ids)
    out_r = np.empty(cap, np.int64)
    out_b = np.empty(cap, np.int64)
    out_a = np.empty(cap, np.int64)
    n_out = 0
    for e in range(len(ci)):
        rem = amt[e]
        a = ci[e]
        b = cj[e]
        while rem > 0:
            p = r_ptr[a]
            q = b_ptr[b]
            if p >= r_off[a + 1] or q >= b_off[b + 1]:
                return out_r[:0], out_b[:0], out_a[:0], False
            x = min(rem, r_left[p], b_left[q])
            out_r[n_out] = r_ids[p]
            out_b[n_out] = b_ids[q]
            out_a[n_out] = x
            n_out += 1
            rem -= x
            r_left[p] -= x
            b_left[q] -= x
            if r_left[p] == 0:
                r_ptr[a] += 1
            if b_left[q] == 0:
                b_ptr[b] += 1
    return out_r[:n_out], out_b[:n_out], out_a[:n_out], True


def redistribute(
    red_idx: np.ndarray, blue_idx: np.ndarray, amount: np.ndarray, handles: ExternalHandles
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Turn a plan on the merged points into a plan on the points they stand for.

    Each merged point's pieces are consumed first-in first-out across the
    plan entries that touch it.
    """
    out = _redistribute(
        np.asarray(red_idx, np.int64), np.asarray(blue_idx, np.int64), np.asarray(amount, np.int64),
        handles.red_offsets, handles.red_ids, handles.red_amounts,
        handles.blue_offsets, handles.blue_ids, handles.blue_amounts,
    )
    if not out[3]:
        raise ValueError("external plan does not match the merged masses")
    return out[0], out[1], out[2]


# --------------------------------------------------------------------------
# instrumentation


@dataclass(frozen=True)
class RedistributionRecord:
    """One redistribution: merged-plan cost against the cost after spreading."""

    depth: int
    cell_side: float
    half_diameter: float
    mass: int
    merged_cost: float
    derived_cost: float

    @property
    def bound(self) -> float:
        return 2.0 * self.half_diameter * self.mass

    @property
    def gap(self) -> float:
        return abs(self.derived_cost - self.merged_cost)

    @property
    def holds(self) -> bool:
        scale = max(self.bound, self.merged_cost, self.derived_cost)
        return self.gap <= self.bound + REDISTRIBUTION_SLACK * scale


@dataclass
class GridStats:
    n: int
    eps: float
    mode: GridMode
    base_threshold: float
    vacuous: bool
    subproblems: int = 0
    base_subproblems: int = 0
    external_subproblems: int = 0
    external_points: int = 0
    grids_sampled: int = 0
    unsafe_shifts: int = 0
    max_level: int = 0
    redistributions: list[RedistributionRecord] = field(default_factory=list)

    @property
    def census_ok(self) -> bool:
        return self.external_points <= 10 * self.n


class _CutTracker:
    """Records the recursion tree of one driver run to recover cut lengths.

    Every point is followed through the subproblems holding its continuing
    copy; it ends either in a base subproblem or in the subproblem that
    exported the last of it.
    """

    def __init__(self, n_red: int, n_blue: int):
        self.parent: list[int] = []
        self.side: list[float] = []
        self.final = (np.full(n_red, -1, np.int64), np.full(n_blue, -1, np.int64))
        self.base = (np.zeros(n_red, bool), np.zeros(n_blue, bool))
        self.export_node = (np.full(n_red, -1, np.int64), np.full(n_blue, -1, np.int64))
        self.export_slot = (np.full(n_red, -1, np.int64), np.full(n_blue, -1, np.int64))
        self.secondary: dict[int, _CutTracker] = {}

    def node(self, parent: int, side: float) -> int:
        self.parent.append(parent)
        self.side.append(side)
        return len(self.parent) - 1

    def settle(self, node: int, red_ids, blue_ids, base: bool) -> None:
        for color, ids in ((0, red_ids), (1, blue_ids)):
            ids = np.asarray(ids, np.int64)
            self.final[color][ids] = node
            self.base[color][ids] = base

    def exported(self, node: int, color: int, ids, slots) -> None:
        ids = np.asarray(ids, np.int64)
        self.final[color][ids] = node
        self.base[color][ids] = False
        self.export_node[color][ids] = node
        self.export_slot[color][ids] = slots

    def _paths(self, finals: np.ndarray, depth_cap: int) -> np.ndarray:
        out = np.full((len(finals), depth_cap), -1, np.int64)
        for i, v in enumerate(finals.tolist()):
            chain = []
            while v >= 0:
                chain.append(v)
                v = self.parent[v]
            chain.reverse()
            out[i, : len(chain)] = chain
        return out

    def lca(self) -> np.ndarray:
        """Last common subproblem of every red/blue pair."""
        depth = 1
        for v in range(len(self.parent)):
            d, u = 1, self.parent[v]
            while u >= 0:
                d, u = d + 1, self.parent[u]
            depth = max(depth, d)
        pr = self._paths(self.final[0], depth)
        pb = self._paths(self.final[1], depth)
        same = (pr[:, None, :] == pb[None, :, :]) & (pr[:, None, :] >= 0)
        common = np.cumprod(same, axis=2).sum(axis=2)
        return pr[np.arange(len(pr))[:, None], np.maximum(common - 1, 0)]

    def cut_lengths(self) -> np.ndarray:
        lca = self.lca()
        sides = np.asarray(self.side)
        out = sides[lca] if lca.size else np.zeros(lca.shape)
        together = (self.final[0][:, None] == self.final[1][None, :]) & self.base[0][:, None]
        return np.where(together, 0.0, out)


@dataclass(frozen=True, eq=False)
class CutDiagnostics:
    """Per-pair cut lengths of one run.

    ``primary[r, b]`` is the cell side of the subproblem that separated ``r``
    and ``b`` (zero when they shared a base subproblem).  ``secondary`` is the
    same quantity measured in the external recursion started by that
    subproblem between the merged points carrying ``r`` and ``b``; it is NaN
    when one of them was not exported there.  It is ``None`` in bounded mode.
    """

    primary: np.ndarray
    secondary: np.ndarray | None

    def ratios(self, inst: TransportInstance) -> np.ndarray:
        """``primary / distance`` for pairs at positive distance."""
        d = inst.cost_matrix()
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(d > 0, self.primary / d, np.nan)


def _cut_diagnostics(tracker: _CutTracker, with_secondary: bool) -> CutDiagnostics:
    primary = tracker.cut_lengths()
    if not with_secondary:
        return CutDiagnostics(primary, None)
    secondary = np.full(primary.shape, np.nan)
    secondary[primary == 0] = 0.0
    lca = tracker.lca()
    inner = {v: t.cut_lengths() for v, t in tracker.secondary.items()}
    nr, nb = primary.shape
    for r in range(nr):
        vr = tracker.export_node[0][r]
        if vr < 0 or vr not in inner:
            continue
        for b in range(nb):
            if primary[r, b] == 0 or tracker.export_node[1][b] != vr or lca[r, b] != vr:
                continue
            secondary[r, b] = inner[vr][tracker.export_slot[0][r], tracker.export_slot[1][b]]
    return CutDiagnostics(primary, secondary)


# --------------------------------------------------------------------------
# drivers


@dataclass
class _Context:
    metric: Metric
    threshold: float
    mode: GridMode
    rng: np.random.Generator
    stats: GridStats


def _exact(metric: Metric, rxy, rw, bxy, bw) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(rw) == 1 or len(bw) == 1:
        if len(rw) == 1:
            return np.zeros(len(bw), np.int64), np.arange(len(bw)), np.asarray(bw, np.int64)
        return np.arange(len(rw)), np.zeros(len(rw), np.int64), np.asarray(rw, np.int64)
    return solve_bipartite(metric.pairwise(rxy, bxy), rw, bw)


@njit(cache=True)
def _pair_in_order(rw, bw):
    """Northwest-corner pairing of two equal-mass weight lists."""
    out_r = np.empty(len(rw) + len(bw), np.int64)
    out_b = np.empty(len(rw) + len(bw), np.int64)
    out_a = np.empty(len(rw) + len(bw), np.int64)
    i = j = n = 0
    r_left = rw[0] if len(rw) else 0
    b_left = bw[0] if len(bw) else 0
    while i < len(rw) and j < len(bw):
        x = min(r_left, b_left)
        out_r[n] = i
        out_b[n] = j
        out_a[n] = x
        n += 1
        r_left -= x
        b_left -= x
        if r_left == 0:
            i += 1
            if i < len(rw):
                r_left = rw[i]
        if b_left == 0:
            j += 1
            if j < len(bw):
                b_left = bw[j]
    return out_r[:n], out_b[:n], out_a[:n]


def _record(ctx: _Context, handles: ExternalHandles, depth: int, ci, cj, amt, rr, bb, aa,
            red_xy: np.ndarray, blue_xy: np.ndarray) -> None:
    metric = ctx.metric
    merged = float(np.dot(amt, metric.norm(handles.red_centers[ci] - handles.blue_centers[cj])))
    derived = float(np.dot(aa, metric.norm(red_xy[rr] - blue_xy[bb])))
    ctx.stats.redistributions.append(RedistributionRecord(
        depth, handles.cell_side, metric.cell_half_diameter(handles.cell_side),
        handles.mass, merged, derived,
    ))


class _ExplicitRun:
    """Recursion over explicit point arrays (a whole bounded run, or one
    external subproblem of the general driver)."""

    def __init__(self, ctx: _Context, red_xy: np.ndarray, blue_xy: np.ndarray, tracker: _CutTracker | None):
        self.ctx = ctx
        self.red_xy = red_xy
        self.blue_xy = blue_xy
        self.tracker = tracker
        self.out: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []

    def run(self, root: Subproblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        stack: list[tuple[Subproblem, int, int]] = [(root, -1, 0)]
        while stack:
            sub, parent, level = stack.pop()
            self._step(sub, parent, level, stack)
        if not self.out:
            return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64)
        r, b, a = zip(*self.out)
        return np.concatenate(r), np.concatenate(b), np.concatenate(a)

    def _emit(self, sub: Subproblem, r, b, a) -> None:
        self.out.append((sub.red_ids[r], sub.blue_ids[b], np.asarray(a, np.int64)))

    def _step(self, sub: Subproblem, parent: int, level: int, stack) -> None:
        ctx = self.ctx
        stats = ctx.stats
        stats.subproblems += 1
        stats.max_level = max(stats.max_level, level)
        corner, side = bounding_square(np.vstack([sub.red_xy, sub.blue_xy]))
        m = sub.m
        if m <= ctx.threshold or side == 0.0:
            stats.base_subproblems += 1
            if side == 0.0:
                r, b, a = _pair_in_order(sub.red_w, sub.blue_w)
            else:
                r, b, a = _exact(ctx.metric, sub.red_xy, sub.red_w, sub.blue_xy, sub.blue_w)
            self._emit(sub, r, b, a)
            if self.tracker is not None:
                node = self.tracker.node(parent, 0.0)
                self.tracker.settle(node, sub.red_ids, sub.blue_ids, True)
            return

        cell, _, _ = grid_params(side, m)
        xy = np.vstack([sub.red_xy, sub.blue_xy])
        grid, attempts = _safe_grid(xy, corner, side, cell, moat_radius(side, m), ctx.rng)
        stats.grids_sampled += attempts
        stats.unsafe_shifts += attempts - 1
        part = partition(sub, grid)
        h = part.handles
        node = -1
        if self.tracker is not None:
            node = self.tracker.node(parent, grid.cell)
            self.tracker.exported(node, 0, h.red_ids, np.repeat(np.arange(len(h.red_mass)), np.diff(h.red_offsets)))
            self.tracker.exported(node, 1, h.blue_ids, np.repeat(np.arange(len(h.blue_mass)), np.diff(h.blue_offsets)))
        if h.n_points:
            stats.external_subproblems += 1
            stats.external_points += h.n_points
            ci, cj, amt = _exact(ctx.metric, h.red_centers, h.red_mass, h.blue_centers, h.blue_mass)
            rr, bb, aa = redistribute(ci, cj, amt, h)
            _record(ctx, h, sub.depth + 1, ci, cj, amt, rr, bb, aa, self.red_xy, self.blue_xy)
            self.out.append((rr, bb, aa))
        for child in reversed(part.internal):
            stack.append((child, node, level + 1))


@njit(cache=True)
def _scan_cells(st_r, st_b, x0, x1, y0, y1, lx, ly, moat):
    """Nonempty grid cells inside the rectangle by top-down quadtree descent.

    Returns ``(ix, iy, red weight, blue weight, safe)``.  With ``moat >= 0``
    each found cell is also checked for points within ``moat`` of its
    boundary, and the scan stops at the first such cell.
    """
    k = len(lx) - 1
    cap = 64
    out_i = np.empty(cap, np.int64)
    out_j = np.empty(cap, np.int64)
    out_wr = np.empty(cap, np.int64)
    out_wb = np.empty(cap, np.int64)
    n_out = 0
    stack = np.empty((4 * 64 + 4, 3), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = k
    ns = 1
    while ns > 0:
        ns -= 1
        i0 = stack[ns, 0]
        j0 = stack[ns, 1]
        size = stack[ns, 2]
        cx0 = max(x0, lx[i0])
        cx1 = min(x1, np.nextafter(lx[i0 + size], -np.inf))
        cy0 = max(y0, ly[j0])
        cy1 = min(y1, np.nextafter(ly[j0 + size], -np.inf))
        if cx0 > cx1 or cy0 > cy1:
            continue
        if size > 1:
            if _sum_count(st_r, cx0, cx1, cy0, cy1, True)[1] == 0 and \
                    _sum_count(st_b, cx0, cx1, cy0, cy1, True)[1] == 0:
                continue
            half = size // 2
            # pushed in reverse so cells come out in (i, j) order
            for di in (1, 0):
                for dj in (1, 0):
                    stack[ns, 0] = i0 + di * half
                    stack[ns, 1] = j0 + dj * half
                    stack[ns, 2] = half
                    ns += 1
            continue
        wr, cr = _sum_count(st_r, cx0, cx1, cy0, cy1, False)
        wb, cb = _sum_count(st_b, cx0, cx1, cy0, cy1, False)
        if cr == 0 and cb == 0:
            continue
        if moat >= 0.0:
            sx0 = max(cx0, np.nextafter(lx[i0] + moat, np.inf))
            sx1 = min(cx1, np.nextafter(lx[i0 + 1] - moat, -np.inf))
            sy0 = max(cy0, np.nextafter(ly[j0] + moat, np.inf))
            sy1 = min(cy1, np.nextafter(ly[j0 + 1] - moat, -np.inf))
            inner = 0
            if sx0 <= sx1 and sy0 <= sy1:
                inner = _sum_count(st_r, sx0, sx1, sy0, sy1, False)[1] + \
                    _sum_count(st_b, sx0, sx1, sy0, sy1, False)[1]
            if inner != cr + cb:
                return out_i[:0], out_j[:0], out_wr[:0], out_wb[:0], False
        if n_out == cap:
            cap *= 2
            grow_i = np.empty(cap, np.int64)
            grow_j = np.empty(cap, np.int64)
            grow_r = np.empty(cap, np.int64)
            grow_b = np.empty(cap, np.int64)
            grow_i[:n_out] = out_i[:n_out]
            grow_j[:n_out] = out_j[:n_out]
            grow_r[:n_out] = out_wr[:n_out]
            grow_b[:n_out] = out_wb[:n_out]
            out_i, out_j, out_wr, out_wb = grow_i, grow_j, grow_r, grow_b
        out_i[n_out] = i0
        out_j[n_out] = j0
        out_wr[n_out] = wr
        out_wb[n_out] = wb
        n_out += 1
    return out_i[:n_out], out_j[:n_out], out_wr[:n_out], out_wb[:n_out], True


def enumerate_nonempty_cells(store_red: RangeStore, store_blue: RangeStore, grid: ShiftedGrid,
                             rect: Rect) -> list[tuple[int, int]]:
    """Cells of ``grid`` holding a live point of either store inside ``rect``."""
    ci, cj, _, _, _ = _scan_cells(store_red.kernel_state, store_blue.kernel_state, *(float(v) for v in rect),
                                  grid.lines(0), grid.lines(1), -1.0)
    return list(zip(ci.tolist(), cj.tolist()))


def _merge_rect(a: Rect | None, b: Rect | None) -> Rect | None:
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), max(a[3], b[3]))


class _StoreRun:
    """Primary recursion of the general driver; subproblems are rectangles."""

    def __init__(self, ctx: _Context, inst: TransportInstance, tracker: _CutTracker | None):
        self.ctx = ctx
        self.inst = inst
        self.tracker = tracker
        self.reds = RangeStore(inst.red_xy, inst.red_supply)
        self.blues = RangeStore(inst.blue_xy, inst.blue_demand)
        self.out: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []

    def run(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        everything = (-np.inf, np.inf, -np.inf, np.inf)
        stack: list[tuple[Rect, int, int]] = [(everything, -1, 0)]
        while stack:
            rect, parent, level = stack.pop()
            self._step(rect, parent, level, stack)
        r, b, a = zip(*self.out)
        return np.concatenate(r), np.concatenate(b), np.concatenate(a)

    def _step(self, rect: Rect, parent: int, level: int, stack) -> None:
        ctx = self.ctx
        stats = ctx.stats
        stats.subproblems += 1
        stats.max_level = max(stats.max_level, level)
        m = self.reds.count(rect) + self.blues.count(rect)
        box = _merge_rect(self.reds.bbox(rect), self.blues.bbox(rect))
        side = max(box[1] - box[0], box[3] - box[2])
        if m <= ctx.threshold or side == 0.0:
            stats.base_subproblems += 1
            rid, rw = self.reds.points(rect)
            bid, bw = self.blues.points(rect)
            if side == 0.0:
                r, b, a = _pair_in_order(rw, bw)
            else:
                r, b, a = _exact(ctx.metric, self.inst.red_xy[rid], rw, self.inst.blue_xy[bid], bw)
            self.out.append((rid[r], bid[b], np.asarray(a, np.int64)))
            if self.tracker is not None:
                node = self.tracker.node(parent, 0.0)
                self.tracker.settle(node, rid, bid, True)
            return

        corner = (box[0] + side, box[2] + side)
        cell, _, _ = grid_params(side, m)
        moat = moat_radius(side, m)
        while True:
            grid = random_grid(corner, side, cell, ctx.rng)
            stats.grids_sampled += 1
            lx, ly = grid.lines(0), grid.lines(1)
            ci, cj, wr, wb, safe = _scan_cells(self.reds.kernel_state, self.blues.kernel_state, *rect, lx, ly, moat)
            if safe:
                break
            stats.unsafe_shifts += 1

        node = self.tracker.node(parent, cell) if self.tracker is not None else -1
        red_pieces: list[tuple[np.ndarray, np.ndarray]] = []
        blue_pieces: list[tuple[np.ndarray, np.ndarray]] = []
        red_centers: list[tuple[float, float]] = []
        blue_centers: list[tuple[float, float]] = []
        children: list[Rect] = []
        for i, j, r_w, b_w in zip(ci.tolist(), cj.tolist(), wr.tolist(), wb.tolist()):
            cell_rect = (max(rect[0], lx[i]), min(rect[1], np.nextafter(lx[i + 1], -np.inf)),
                         max(rect[2], ly[j]), min(rect[3], np.nextafter(ly[j + 1], -np.inf)))
            centre = (0.5 * (lx[i] + lx[i + 1]), 0.5 * (ly[j] + ly[j + 1]))
            if r_w > b_w:
                red_pieces.append(self.reds.export(cell_rect, r_w - b_w))
                red_centers.append(centre)
            elif b_w > r_w:
                blue_pieces.append(self.blues.export(cell_rect, b_w - r_w))
                blue_centers.append(centre)
            if min(r_w, b_w) > 0:
                children.append(cell_rect)
        for child in reversed(children):
            stack.append((child, node, level + 1))
        if not red_pieces:
            return

        handles = _handles(red_centers, red_pieces, blue_centers, blue_pieces, cell)
        stats.external_subproblems += 1
        stats.external_points += handles.n_points
        inner = None
        if self.tracker is not None:
            for color, pieces in ((0, red_pieces), (1, blue_pieces)):
                for slot, (ids, _) in enumerate(pieces):
                    self.tracker.exported(node, color, ids, slot)
            inner = _CutTracker(len(red_pieces), len(blue_pieces))
            self.tracker.secondary[node] = inner
        sub = handles.subproblem(1)
        ci2, cj2, amt = _ExplicitRun(ctx, handles.red_centers, handles.blue_centers, inner).run(sub)
        rr, bb, aa = redistribute(ci2, cj2, amt, handles)
        _record(ctx, handles, 1, ci2, cj2, amt, rr, bb, aa, self.inst.red_xy, self.inst.blue_xy)
        self.out.append((rr, bb, aa))


def _handles(red_centers, red_pieces, blue_centers, blue_pieces, cell: float) -> ExternalHandles:
    def pack(pieces):
        offsets = np.zeros(len(pieces) + 1, np.int64)
        offsets[1:] = np.cumsum([len(ids) for ids, _ in pieces])
        ids = np.concatenate([ids for ids, _ in pieces]).astype(np.int64)
        amounts = np.concatenate([amt for _, amt in pieces]).astype(np.int64)
        mass = np.array([int(amt.sum()) for _, amt in pieces], np.int64)
        return mass, offsets, ids, amounts

    rm, ro, ri, ra = pack(red_pieces)
    bm, bo, bi, ba = pack(blue_pieces)
    return ExternalHandles(np.array(red_centers, float).reshape(-1, 2), rm, ro, ri, ra,
                           np.array(blue_centers, float).reshape(-1, 2), bm, bo, bi, ba, cell)


# --------------------------------------------------------------------------
# entry points


def base_threshold(n: int, eps: float) -> float:
    """Largest subproblem size that is solved exactly: ``n**(eps/4)``."""
    return n ** (eps / 4.0)


@dataclass(frozen=True, eq=False)
class GridRun:
    plan: TransportPlan
    stats: GridStats
    cuts: CutDiagnostics | None


def _as_rng(rng: "np.random.Generator | int | None") -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def solve_detailed(
    inst: TransportInstance,
    eps: float,
    rng: "np.random.Generator | int | None" = None,
    mode: "GridMode | str" = GridMode.GENERAL,
    track_cuts: bool = False,
) -> GridRun:
    """Run the grid algorithm and keep its counters (and optionally cut lengths)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if inst.dim != 2:
        raise ValueError("the grid algorithm works in the plane only")
    mode = GridMode.parse(mode)
    n = inst.n
    threshold = base_threshold(n, eps)
    stats = GridStats(n, float(eps), mode, threshold, threshold < 2.0)
    if stats.vacuous:
        log.warning("n**(eps/4) = %.3f < 2 for n=%d, eps=%g: solving exactly in one step; "
                    "the approximation guarantee is vacuous at this size", threshold, n, eps)
        stats.subproblems = stats.base_subproblems = 1
        r, b, a = _exact(inst.metric, inst.red_xy, inst.red_supply, inst.blue_xy, inst.blue_demand)
        cuts = None
        if track_cuts:
            zeros = np.zeros((inst.n_red, inst.n_blue))
            secondary = np.full_like(zeros, np.nan) if mode is GridMode.GENERAL else None
            cuts = CutDiagnostics(zeros, secondary)
        return GridRun(TransportPlan.aggregate(r, b, a), stats, cuts)
    ctx = _Context(inst.metric, stats.base_threshold, mode, _as_rng(rng), stats)
    tracker = _CutTracker(inst.n_red, inst.n_blue) if track_cuts else None
    if mode is GridMode.BOUNDED:
        runner = _ExplicitRun(ctx, inst.red_xy, inst.blue_xy, tracker)
        r, b, a = runner.run(Subproblem.from_instance(inst))
    else:
        r, b, a = _StoreRun(ctx, inst, tracker).run()
    plan = TransportPlan.aggregate(r, b, a)
    cuts = _cut_diagnostics(tracker, mode is GridMode.GENERAL) if tracker is not None else None
    return GridRun(plan, stats, cuts)


def solve(
    inst: TransportInstance,
    eps: float,
    rng: "np.random.Generator | int | None" = None,
    mode: "GridMode | str" = GridMode.GENERAL,
) -> TransportPlan:
    """Approximate transport plan; every base and deepest external subproblem is exact."""
    return solve_detailed(inst, eps, rng, mode).plan
