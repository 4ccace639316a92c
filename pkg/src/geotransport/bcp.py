"""Dynamic additively weighted bichromatic closest pair in the plane.

Two weighted point sets P and Q are maintained; a query returns the live
pair minimising ``dist(p, q) + w(p) + w(q)``.  Q is drawn from a fixed
universe of points indexed by a kd-tree whose nodes carry the minimum live
weight below them, so a deleted point simply gets weight +inf and the
branch-and-bound search skips dead subtrees.  Every P point remembers its
best partner in a heap; entries whose partner has died are recomputed
lazily when they reach the top.
"""

from __future__ import annotations

import heapq

import numpy as np
from numba import njit

from .core import Metric

_LEAF = 8


@njit(cache=True)
def _build(xy, leaf):
    n = len(xy)
    perm = np.arange(n)
    cap = 2 * (n // leaf + 1) * 2 + 4
    lo = np.empty(cap, np.int64)
    hi = np.empty(cap, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    parent = np.full(cap, -1, np.int64)
    box = np.empty((cap, 4))
    leaf_of = np.empty(n, np.int64)
    stack = np.empty(cap, np.int64)
    lo[0] = 0
    hi[0] = n
    n_nodes = 1
    stack[0] = 0
    ns = 1
    while ns > 0:
        ns -= 1
        v = stack[ns]
        a = lo[v]
        b = hi[v]
        seg = xy[perm[a:b]]
        box[v, 0] = seg[:, 0].min()
        box[v, 1] = seg[:, 0].max()
        box[v, 2] = seg[:, 1].min()
        box[v, 3] = seg[:, 1].max()
        if b - a <= leaf:
            for i in range(a, b):
                leaf_of[perm[i]] = v
            continue
        axis = 0 if box[v, 1] - box[v, 0] >= box[v, 3] - box[v, 2] else 1
        order = np.argsort(seg[:, axis], kind="mergesort")
        perm[a:b] = perm[a:b][order]
        mid = (a + b) // 2
        for child, c_lo, c_hi in ((0, a, mid), (1, mid, b)):
            u = n_nodes
            n_nodes += 1
            lo[u] = c_lo
            hi[u] = c_hi
            parent[u] = v
            if child == 0:
                left[v] = u
            else:
                right[v] = u
            stack[ns] = u
            ns += 1
    return perm, lo[:n_nodes], hi[:n_nodes], left[:n_nodes], right[:n_nodes], parent[:n_nodes], box[:n_nodes], leaf_of


@njit(cache=True)
def _refresh(perm, lo, hi, left, right, w, minw):
    for v in range(len(lo) - 1, -1, -1):
        if left[v] < 0:
            best = np.inf
            for i in range(lo[v], hi[v]):
                if w[perm[i]] < best:
                    best = w[perm[i]]
            minw[v] = best
        else:
            minw[v] = min(minw[left[v]], minw[right[v]])


@njit(cache=True)
def _touch(perm, lo, hi, left, right, parent, w, minw, v):
    """Recompute the aggregate of leaf ``v`` and its ancestors."""
    best = np.inf
    for i in range(lo[v], hi[v]):
        if w[perm[i]] < best:
            best = w[perm[i]]
    minw[v] = best
    v = parent[v]
    while v >= 0:
        minw[v] = min(minw[left[v]], minw[right[v]])
        v = parent[v]


@njit(cache=True)
def _dist(dx, dy, p):
    dx = abs(dx)
    dy = abs(dy)
    if p == 1:
        return dx + dy
    if p == 2:
        return np.hypot(dx, dy)
    return max(dx, dy)


@njit(cache=True)
def _box_dist(x, y, bx, p):
    dx = max(bx[0] - x, 0.0, x - bx[1])
    dy = max(bx[2] - y, 0.0, y - bx[3])
    return _dist(dx, dy, p)


@njit(cache=True)
def _nearest(xy, perm, lo, hi, left, right, box, w, minw, x, y, p):
    """Live ``q`` minimising ``dist((x, y), q) + w(q)``; ``(-1, inf)`` if none."""
    best = np.inf
    best_q = -1
    stack = np.empty(128, np.int64)
    stack[0] = 0
    ns = 1
    while ns > 0:
        ns -= 1
        v = stack[ns]
        if minw[v] == np.inf:
            continue
        if _box_dist(x, y, box[v], p) + minw[v] >= best and best_q >= 0:
            continue
        if left[v] < 0:
            for i in range(lo[v], hi[v]):
                q = perm[i]
                if w[q] == np.inf:
                    continue
                val = _dist(xy[q, 0] - x, xy[q, 1] - y, p) + w[q]
                if val < best or (val == best and q < best_q):
                    best = val
                    best_q = q
            continue
        a = left[v]
        b = right[v]
        la = _box_dist(x, y, box[a], p) + minw[a]
        lb = _box_dist(x, y, box[b], p) + minw[b]
        if ns + 2 > len(stack):
            bigger = np.empty(2 * len(stack), np.int64)
            bigger[:ns] = stack[:ns]
            stack = bigger
        # nearer child on top of the stack
        if la <= lb:
            stack[ns] = b
            stack[ns + 1] = a
        else:
            stack[ns] = a
            stack[ns + 1] = b
        ns += 2
    return best_q, best


_METRIC_CODE = {Metric.L1: 1, Metric.L2: 2, Metric.LINF: 0}


class BichromaticClosestPair:
    """Closest pair between inserted P points and live members of a Q universe.

    ``q_xy`` fixes the Q universe; every Q point starts dead and is made live
    with :meth:`insert_q`.  P points are arbitrary and identified by the
    handle :meth:`insert_p` returns.
    """

    def __init__(self, q_xy: np.ndarray, metric: Metric):
        self.q_xy = np.ascontiguousarray(np.asarray(q_xy, dtype=float).reshape(-1, 2))
        self.metric = Metric.parse(metric)
        self._p = _METRIC_CODE[self.metric]
        if len(self.q_xy):
            self._tree = _build(self.q_xy, _LEAF)
        self.q_weight = np.full(len(self.q_xy), np.inf)
        self._minw = np.full(len(self._tree[1]) if len(self.q_xy) else 0, np.inf)
        self._p_xy: list[tuple[float, float]] = []
        self._p_weight: list[float] = []
        self._p_live: list[bool] = []
        self._heap: list[tuple[float, int, int, float]] = []

    # -- Q side ----------------------------------------------------------

    def reset_q(self, weights: np.ndarray, live: np.ndarray | None = None) -> None:
        """Replace all Q weights at once (dead points get ``live == False``)."""
        w = np.asarray(weights, dtype=float).copy()
        if live is not None:
            w[~np.asarray(live, bool)] = np.inf
        self.q_weight = w
        if len(self.q_xy):
            perm, lo, hi, left, right, _, _, _ = self._tree
            _refresh(perm, lo, hi, left, right, self.q_weight, self._minw)
        self._heap = []
        for h, live_p in enumerate(self._p_live):
            if live_p:
                self._push_best(h)

    def insert_q(self, q: int, weight: float) -> None:
        if not np.isfinite(weight):
            raise ValueError("weights must be finite")
        self.q_weight[q] = weight
        self._touch(q)
        x, y = self.q_xy[q]
        for h, live_p in enumerate(self._p_live):
            if live_p:
                px, py = self._p_xy[h]
                val = self.metric.dist((px, py), (x, y)) + self._p_weight[h] + weight
                heapq.heappush(self._heap, (val, h, q, weight))

    def delete_q(self, q: int) -> None:
        self.q_weight[q] = np.inf
        self._touch(q)

    def _touch(self, q: int) -> None:
        perm, lo, hi, left, right, parent, _, leaf_of = self._tree
        _touch(perm, lo, hi, left, right, parent, self.q_weight, self._minw, leaf_of[q])

    def q_live(self, q: int) -> bool:
        return bool(np.isfinite(self.q_weight[q]))

    # -- P side ----------------------------------------------------------

    def insert_p(self, xy: tuple[float, float], weight: float) -> int:
        h = len(self._p_xy)
        self._p_xy.append((float(xy[0]), float(xy[1])))
        self._p_weight.append(float(weight))
        self._p_live.append(True)
        self._push_best(h)
        return h

    def clear_p(self) -> None:
        """Drop every P point (handles restart from zero)."""
        self._p_xy.clear()
        self._p_weight.clear()
        self._p_live.clear()
        self._heap.clear()

    def delete_p(self, h: int) -> None:
        self._p_live[h] = False

    def _push_best(self, h: int) -> None:
        if not len(self.q_xy):
            return
        perm, lo, hi, left, right, _, box, _ = self._tree
        x, y = self._p_xy[h]
        q, val = _nearest(self.q_xy, perm, lo, hi, left, right, box, self.q_weight, self._minw, x, y, self._p)
        if q >= 0:
            heapq.heappush(self._heap, (val + self._p_weight[h], h, int(q), float(self.q_weight[q])))

    # -- query -----------------------------------------------------------

    def query(self) -> tuple[int, int, float] | None:
        """``(p handle, q, value)`` of the closest live pair, or ``None``."""
        heap = self._heap
        while heap:
            val, h, q, wq = heap[0]
            if not self._p_live[h]:
                heapq.heappop(heap)
                continue
            if self.q_weight[q] != wq:
                # partner died or was re-inserted with another weight
                heapq.heappop(heap)
                self._push_best(h)
                continue
            return h, q, val
        return None
