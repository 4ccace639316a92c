"""Weighted planar point set with orthogonal range queries and deletions.

The structure is a 2-D range tree laid out as a merge-sort tree: a complete
binary tree over the points in x order, where every node keeps its points
sorted by y together with a small segment tree of (weight sum, live count,
minimum live weight).  A query rectangle decomposes into O(log n) canonical
nodes, each answering in O(log n), so sums and emptiness cost O(log² n).

Deletions are tombstones (weight and count drop to zero at every level).
When half of the points are dead the tree is rebuilt from the survivors.

All rectangles are closed: ``x0 <= x <= x1`` and ``y0 <= y <= y1``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_INF_W = np.iinfo(np.int64).max


@njit(cache=True)
def _build(x, y, w):
    n = len(x)
    n2 = 1
    while n2 < n:
        n2 *= 2
    h = 0
    while (1 << h) < n2:
        h += 1
    # x-major, y-minor, ties by index (both sorts are stable)
    oy = np.argsort(y, kind="mergesort")
    order = oy[np.argsort(x[oy], kind="mergesort")]
    xs = x[order]
    ylev = np.full((h + 1, n2), np.inf)
    idlev = np.full((h + 1, n2), -1, np.int64)
    pos = np.empty((h + 1, n), np.int64)
    for p in range(n):
        ylev[0, p] = y[order[p]]
        idlev[0, p] = order[p]
    for lev in range(1, h + 1):
        s = 1 << lev
        half = s >> 1
        for b in range(n2 // s):
            base = b * s
            i = base
            j = base + half
            ie = base + half
            je = base + s
            k = base
            while i < ie or j < je:
                take_left = False
                if j >= je:
                    take_left = True
                elif i < ie:
                    yi = ylev[lev - 1, i]
                    yj = ylev[lev - 1, j]
                    if yi < yj or (yi == yj and idlev[lev - 1, i] >= 0 and
                                   (idlev[lev - 1, j] < 0 or idlev[lev - 1, i] <= idlev[lev - 1, j])):
                        take_left = True
                if take_left:
                    ylev[lev, k] = ylev[lev - 1, i]
                    idlev[lev, k] = idlev[lev - 1, i]
                    i += 1
                else:
                    ylev[lev, k] = ylev[lev - 1, j]
                    idlev[lev, k] = idlev[lev - 1, j]
                    j += 1
                k += 1
    for lev in range(h + 1):
        for p in range(n2):
            q = idlev[lev, p]
            if q >= 0:
                pos[lev, q] = p
    sm = np.zeros((h + 1, 2 * n2), np.int64)
    cnt = np.zeros((h + 1, 2 * n2), np.int64)
    mw = np.full((h + 1, 2 * n2), _INF_W, np.int64)
    for lev in range(h + 1):
        s = 1 << lev
        for b in range(n2 // s):
            off = 2 * s * b
            for j in range(s):
                q = idlev[lev, b * s + j]
                if q >= 0 and w[q] > 0:
                    sm[lev, off + s + j] = w[q]
                    cnt[lev, off + s + j] = 1
                    mw[lev, off + s + j] = w[q]
            for k in range(s - 1, 0, -1):
                sm[lev, off + k] = sm[lev, off + 2 * k] + sm[lev, off + 2 * k + 1]
                cnt[lev, off + k] = cnt[lev, off + 2 * k] + cnt[lev, off + 2 * k + 1]
                mw[lev, off + k] = min(mw[lev, off + 2 * k], mw[lev, off + 2 * k + 1])
    return xs, ylev, idlev, pos, sm, cnt, mw, h, n2


@njit(cache=True)
def _canonical(xs, n2, h, x0, x1, out_lev, out_blk):
    """Canonical primary nodes covering ``x0 <= x <= x1``, left to right."""
    lo = np.searchsorted(xs, x0, side="left")
    hi = np.searchsorted(xs, x1, side="right")
    nl = 0
    right_lev = np.empty(64, np.int64)
    right_blk = np.empty(64, np.int64)
    nr = 0
    l = lo + n2
    r = hi + n2
    depth = h
    while l < r:
        if l & 1:
            out_lev[nl] = h - depth
            out_blk[nl] = l - (1 << depth)
            nl += 1
            l += 1
        if r & 1:
            r -= 1
            right_lev[nr] = h - depth
            right_blk[nr] = r - (1 << depth)
            nr += 1
        l >>= 1
        r >>= 1
        depth -= 1
    for i in range(nr - 1, -1, -1):
        out_lev[nl] = right_lev[i]
        out_blk[nl] = right_blk[i]
        nl += 1
    return nl


@njit(cache=True)
def _yrange(ylev, lev, blk, y0, y1):
    s = 1 << lev
    base = blk * s
    row = ylev[lev, base:base + s]
    return np.searchsorted(row, y0, side="left"), np.searchsorted(row, y1, side="right")


@njit(cache=True)
def _seg_sum(arr, lev, blk, k0, k1):
    s = 1 << lev
    off = 2 * s * blk
    total = 0
    l = k0 + s
    r = k1 + s
    while l < r:
        if l & 1:
            total += arr[lev, off + l]
            l += 1
        if r & 1:
            r -= 1
            total += arr[lev, off + r]
        l >>= 1
        r >>= 1
    return total


@njit(cache=True)
def _descend_first(mw, lev, off, s, k, budget):
    while k < s:
        if mw[lev, off + 2 * k] <= budget:
            k = 2 * k
        else:
            k = 2 * k + 1
    return k - s


@njit(cache=True)
def _descend_last(mw, lev, off, s, k, budget):
    while k < s:
        if mw[lev, off + 2 * k + 1] <= budget:
            k = 2 * k + 1
        else:
            k = 2 * k
    return k - s


@njit(cache=True)
def _seg_first(mw, lev, blk, k0, k1, budget):
    """Leftmost local index in [k0, k1) whose live weight is <= budget, or -1."""
    s = 1 << lev
    off = 2 * s * blk
    l = k0 + s
    r = k1 + s
    right = np.empty(64, np.int64)
    nr = 0
    while l < r:
        if l & 1:
            if mw[lev, off + l] <= budget:
                return _descend_first(mw, lev, off, s, l, budget)
            l += 1
        if r & 1:
            r -= 1
            right[nr] = r
            nr += 1
        l >>= 1
        r >>= 1
    for i in range(nr - 1, -1, -1):
        k = right[i]
        if mw[lev, off + k] <= budget:
            return _descend_first(mw, lev, off, s, k, budget)
    return -1


@njit(cache=True)
def _seg_last(mw, lev, blk, k0, k1, budget):
    """Rightmost local index in [k0, k1) whose live weight is <= budget, or -1."""
    s = 1 << lev
    off = 2 * s * blk
    l = k0 + s
    r = k1 + s
    left = np.empty(64, np.int64)
    nl = 0
    while l < r:
        if l & 1:
            left[nl] = l
            nl += 1
            l += 1
        if r & 1:
            r -= 1
            if mw[lev, off + r] <= budget:
                return _descend_last(mw, lev, off, s, r, budget)
        l >>= 1
        r >>= 1
    for i in range(nl - 1, -1, -1):
        k = left[i]
        if mw[lev, off + k] <= budget:
            return _descend_last(mw, lev, off, s, k, budget)
    return -1


@njit(cache=True)
def _set_leaf(st, q, weight, hidden):
    """Set point ``q``'s live weight at every level (hidden: sums kept, min masked)."""
    xs, ylev, idlev, pos, sm, cnt, mw, h, n2 = st
    for lev in range(h + 1):
        s = 1 << lev
        p = pos[lev, q]
        blk = p >> lev
        off = 2 * s * blk
        k = s + (p - blk * s)
        if not hidden:
            sm[lev, off + k] = weight
            cnt[lev, off + k] = 1 if weight > 0 else 0
        mw[lev, off + k] = weight if (weight > 0 and not hidden) else _INF_W
        k >>= 1
        while k >= 1:
            if not hidden:
                sm[lev, off + k] = sm[lev, off + 2 * k] + sm[lev, off + 2 * k + 1]
                cnt[lev, off + k] = cnt[lev, off + 2 * k] + cnt[lev, off + 2 * k + 1]
            mw[lev, off + k] = min(mw[lev, off + 2 * k], mw[lev, off + 2 * k + 1])
            k >>= 1


@njit(cache=True)
def _sum_count(st, x0, x1, y0, y1, stop_at_first):
    xs, ylev, idlev, pos, sm, cnt, mw, h, n2 = st
    levs = np.empty(2 * h + 4, np.int64)
    blks = np.empty(2 * h + 4, np.int64)
    nc = _canonical(xs, n2, h, x0, x1, levs, blks)
    total = 0
    count = 0
    for i in range(nc):
        k0, k1 = _yrange(ylev, levs[i], blks[i], y0, y1)
        if k0 >= k1:
            continue
        c = _seg_sum(cnt, levs[i], blks[i], k0, k1)
        if c:
            count += c
            if stop_at_first:
                return 0, count
            total += _seg_sum(sm, levs[i], blks[i], k0, k1)
    return total, count


@njit(cache=True)
def _bbox(st, x0, x1, y0, y1):
    """Bounding box (min x, max x, min y, max y) of live points, or NaNs if none."""
    xs, ylev, idlev, pos, sm, cnt, mw, h, n2 = st
    levs = np.empty(2 * h + 4, np.int64)
    blks = np.empty(2 * h + 4, np.int64)
    nc = _canonical(xs, n2, h, x0, x1, levs, blks)
    live = _INF_W - 1
    ymin = np.inf
    ymax = -np.inf
    first = -1
    last = -1
    for i in range(nc):
        k0, k1 = _yrange(ylev, levs[i], blks[i], y0, y1)
        if k0 >= k1:
            continue
        j = _seg_first(mw, levs[i], blks[i], k0, k1, live)
        if j < 0:
            continue
        base = blks[i] << levs[i]
        ymin = min(ymin, ylev[levs[i], base + j])
        j2 = _seg_last(mw, levs[i], blks[i], k0, k1, live)
        ymax = max(ymax, ylev[levs[i], base + j2])
        if first < 0:
            first = i
        last = i
    if first < 0:
        return np.nan, np.nan, np.nan, np.nan
    out = np.empty(2)
    for side in range(2):
        i = first if side == 0 else last
        lev = levs[i]
        blk = blks[i]
        while lev > 0:
            a = 2 * blk + (1 if side == 1 else 0)
            k0, k1 = _yrange(ylev, lev - 1, a, y0, y1)
            ok = k0 < k1 and _seg_first(mw, lev - 1, a, k0, k1, live) >= 0
            if side == 0:
                blk = a if ok else a + 1
            else:
                blk = a if ok else a - 1
            lev -= 1
        out[side] = xs[blk]
    return out[0], out[1], ymin, ymax


@njit(cache=True)
def _report(st, wcur, x0, x1, y0, y1, budget, limit):
    """Greedy maximal subset of live points in the rectangle with weight <= budget.

    Points are taken in canonical-node order (x-major) and within a node in
    y order; at most ``limit`` points are returned (``limit < 0``: no cap).
    """
    xs, ylev, idlev, pos, sm, cnt, mw, h, n2 = st
    levs = np.empty(2 * h + 4, np.int64)
    blks = np.empty(2 * h + 4, np.int64)
    nc = _canonical(xs, n2, h, x0, x1, levs, blks)
    out = np.empty(16, np.int64)
    n_out = 0
    remaining = budget
    for i in range(nc):
        k0, k1 = _yrange(ylev, levs[i], blks[i], y0, y1)
        if k0 >= k1:
            continue
        while remaining > 0 and (limit < 0 or n_out < limit):
            j = _seg_first(mw, levs[i], blks[i], k0, k1, remaining)
            if j < 0:
                break
            q = idlev[levs[i], (blks[i] << levs[i]) + j]
            if n_out == len(out):
                bigger = np.empty(2 * len(out), np.int64)
                bigger[:n_out] = out[:n_out]
                out = bigger
            out[n_out] = q
            n_out += 1
            remaining -= wcur[q]
            _set_leaf(st, q, wcur[q], True)
    for t in range(n_out):
        _set_leaf(st, out[t], wcur[out[t]], False)
    return out[:n_out]


@njit(cache=True)
def _collect(st, x0, x1, y0, y1):
    """All live point ids in the rectangle."""
    xs, ylev, idlev, pos, sm, cnt, mw, h, n2 = st
    levs = np.empty(2 * h + 4, np.int64)
    blks = np.empty(2 * h + 4, np.int64)
    nc = _canonical(xs, n2, h, x0, x1, levs, blks)
    out = np.empty(16, np.int64)
    n_out = 0
    stack = np.empty(4 * (h + 2), np.int64)
    for i in range(nc):
        lev = levs[i]
        blk = blks[i]
        k0, k1 = _yrange(ylev, lev, blk, y0, y1)
        if k0 >= k1:
            continue
        s = 1 << lev
        off = 2 * s * blk
        # canonical segment nodes of [k0, k1), then DFS through live children
        l = k0 + s
        r = k1 + s
        ns = 0
        while l < r:
            if l & 1:
                stack[ns] = l
                ns += 1
                l += 1
            if r & 1:
                r -= 1
                stack[ns] = r
                ns += 1
            l >>= 1
            r >>= 1
        while ns > 0:
            ns -= 1
            k = stack[ns]
            if cnt[lev, off + k] == 0:
                continue
            if k >= s:
                q = idlev[lev, blk * s + (k - s)]
                if n_out == len(out):
                    bigger = np.empty(2 * len(out), np.int64)
                    bigger[:n_out] = out[:n_out]
                    out = bigger
                out[n_out] = q
                n_out += 1
            else:
                stack[ns] = 2 * k + 1
                stack[ns + 1] = 2 * k
                ns += 2
    return out[:n_out]


@njit(cache=True)
def _export(st, wcur, x0, x1, y0, y1, amount):
    """Remove ``amount`` of weight from the rectangle.

    Deletes a greedy maximal subset of weight <= amount and, if that falls
    short, lowers one further point by the remainder.  Returns the affected
    ids and the weight taken from each (the last entry is the split point).
    """
    ids = _report(st, wcur, x0, x1, y0, y1, amount, -1)
    taken = 0
    for q in ids:
        taken += wcur[q]
    short = amount - taken
    n_out = len(ids) + (1 if short > 0 else 0)
    out_id = np.empty(n_out, np.int64)
    out_w = np.empty(n_out, np.int64)
    for t in range(len(ids)):
        q = ids[t]
        out_id[t] = q
        out_w[t] = wcur[q]
        wcur[q] = 0
        _set_leaf(st, q, 0, False)
    if short > 0:
        extra = _report(st, wcur, x0, x1, y0, y1, _INF_W - 1, 1)
        q = extra[0]
        out_id[n_out - 1] = q
        out_w[n_out - 1] = short
        wcur[q] -= short
        _set_leaf(st, q, wcur[q], False)
    return out_id, out_w


class RangeStore:
    """Dynamic weighted point set; rectangles are ``(x0, x1, y0, y1)``, closed."""

    def __init__(self, xy: np.ndarray, weights: np.ndarray):
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        self.xy = xy.copy()
        self.weight = np.array(weights, dtype=np.int64).reshape(-1).copy()
        if len(self.weight) != len(xy):
            raise ValueError("one weight per point is required")
        if np.any(self.weight < 0):
            raise ValueError("weights must be nonnegative")
        self._size = len(xy)
        self._live = int(np.count_nonzero(self.weight))
        self._rebuild()

    def _rebuild(self) -> None:
        keep = np.flatnonzero(self.weight > 0)
        self._ids = keep
        if len(keep) == 0:
            self._st = None
            return
        sub = self.xy[keep]
        self._wsub = self.weight[keep].copy()
        self._st = _build(np.ascontiguousarray(sub[:, 0]), np.ascontiguousarray(sub[:, 1]), self._wsub)
        self._built_with = len(keep)

    def _maybe_rebuild(self) -> None:
        if self._st is not None and 0 < self._live and self._live * 2 <= self._built_with:
            self._rebuild()

    def __len__(self) -> int:
        return self._live

    @property
    def kernel_state(self):
        """Compiled tree state; an empty store yields a single zero-weight leaf."""
        if self._st is None:
            return _build(np.zeros(1), np.zeros(1), np.zeros(1, np.int64))
        return self._st

    @staticmethod
    def _rect(rect) -> tuple[float, float, float, float]:
        x0, x1, y0, y1 = (float(v) for v in rect)
        return x0, x1, y0, y1

    def wt(self, rect) -> int:
        if self._st is None:
            return 0
        return int(_sum_count(self._st, *self._rect(rect), False)[0])

    def count(self, rect) -> int:
        if self._st is None:
            return 0
        return int(_sum_count(self._st, *self._rect(rect), False)[1])

    def empty(self, rect) -> bool:
        if self._st is None:
            return True
        return _sum_count(self._st, *self._rect(rect), True)[1] == 0

    def bbox(self, rect) -> tuple[float, float, float, float] | None:
        """``(min x, max x, min y, max y)`` of live points in ``rect``."""
        if self._st is None:
            return None
        b = _bbox(self._st, *self._rect(rect))
        return None if np.isnan(b[0]) else tuple(float(v) for v in b)

    def report(self, rect, budget: int) -> list[int]:
        """A maximal subset of the live points in ``rect`` with total weight <= budget.

        Either every point in the rectangle is returned or each point left out
        weighs more than what remains of the budget.
        """
        if self._st is None or budget <= 0:
            return []
        ids = _report(self._st, self._wsub, *self._rect(rect), int(budget), -1)
        return self._ids[ids].tolist()

    def points(self, rect) -> tuple[np.ndarray, np.ndarray]:
        """Ids and current weights of every live point in ``rect``."""
        if self._st is None:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        loc = _collect(self._st, *self._rect(rect))
        return self._ids[loc], self._wsub[loc].copy()

    def _local(self, p: int) -> int:
        k = int(np.searchsorted(self._ids, p))
        if k >= len(self._ids) or self._ids[k] != p or self._wsub[k] == 0:
            raise KeyError(f"point {p} is not live")
        return k

    def delete(self, p: int) -> None:
        k = self._local(p)
        self._wsub[k] = 0
        self.weight[p] = 0
        _set_leaf(self._st, k, 0, False)
        self._live -= 1
        self._maybe_rebuild()

    def reduce_wt(self, p: int, amount: int) -> None:
        """Lower the weight of ``p`` by ``amount``; reducing to zero deletes it."""
        k = self._local(p)
        if amount <= 0 or amount > self._wsub[k]:
            raise ValueError(f"cannot reduce weight {int(self._wsub[k])} of point {p} by {amount}")
        if amount == self._wsub[k]:
            self.delete(p)
            return
        self._wsub[k] -= amount
        self.weight[p] -= amount
        _set_leaf(self._st, k, int(self._wsub[k]), False)

    def export(self, rect, amount: int) -> tuple[np.ndarray, np.ndarray]:
        """Take exactly ``amount`` weight out of ``rect`` (see :func:`_export`).

        The caller guarantees the rectangle holds more than ``amount``.
        """
        loc, taken = _export(self._st, self._wsub, *self._rect(rect), int(amount))
        ids = self._ids[loc]
        self.weight[ids] -= taken
        self._live -= int(np.count_nonzero(self.weight[ids] == 0))
        self._maybe_rebuild()
        return ids, taken
