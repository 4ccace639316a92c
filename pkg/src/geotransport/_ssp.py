"""Compiled successive-shortest-path kernel for uncapacitated min-cost flow.

Each round runs Dijkstra on reduced costs from the lowest-index vertex that
still has excess, stops at the first deficit vertex popped, updates
potentials, and pushes ``min(excess, deficit)`` along the path, further
capped by the flow on any reverse arc the path uses.

Potentials are kept up to an additive constant: instead of lowering every
unvisited vertex by the path length ``D`` we raise each visited vertex by
``D - d(v)``.  Reduced costs only see differences, so this is the same dual
solution shifted by a constant, and a round costs time proportional to the
region Dijkstra actually explored.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _heap_push(hk, hv, size, key, v):
    i = size
    hk[i] = key
    hv[i] = v
    while i > 0:
        p = (i - 1) >> 1
        if hk[p] < hk[i] or (hk[p] == hk[i] and hv[p] <= hv[i]):
            break
        hk[p], hk[i] = hk[i], hk[p]
        hv[p], hv[i] = hv[i], hv[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(hk, hv, size):
    key = hk[0]
    v = hv[0]
    size -= 1
    hk[0] = hk[size]
    hv[0] = hv[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        right = left + 1
        if right < size and (hk[right] < hk[left] or (hk[right] == hk[left] and hv[right] < hv[left])):
            c = right
        if hk[i] < hk[c] or (hk[i] == hk[c] and hv[i] <= hv[c]):
            break
        hk[c], hk[i] = hk[i], hk[c]
        hv[c], hv[i] = hv[i], hv[c]
        i = c
    return key, v, size


@njit(cache=True)
def _min_reduced_cost(tail, head, cost, flow, y):
    worst = np.inf
    for a in range(len(tail)):
        rc = cost[a] - y[tail[a]] + y[head[a]]
        if rc < worst:
            worst = rc
        if flow[a] > 0 and -rc < worst:
            worst = -rc
    return worst


@njit(cache=True)
def ssp_kernel(n, tail, head, cost, balance, check):
    """Run successive shortest paths.

    Returns ``(flow, y, stranded, augmentations, worst_rc, monotone)`` where
    ``stranded`` is -1 on success or an excess vertex that cannot reach any
    deficit, ``worst_rc`` is the most negative residual reduced cost seen
    after any augmentation (only tracked when ``check``), and ``monotone``
    reports whether total absolute imbalance fell strictly every time.
    """
    m = len(tail)
    # residual adjacency: entry k -> (arc, direction)
    deg = np.zeros(n + 1, np.int64)
    for a in range(m):
        deg[tail[a] + 1] += 1
        deg[head[a] + 1] += 1
    start = np.cumsum(deg)
    fill = start[:-1].copy()
    adj_arc = np.empty(2 * m, np.int64)
    adj_rev = np.empty(2 * m, np.bool_)
    for a in range(m):
        k = fill[tail[a]]
        adj_arc[k] = a
        adj_rev[k] = False
        fill[tail[a]] += 1
        k = fill[head[a]]
        adj_arc[k] = a
        adj_rev[k] = True
        fill[head[a]] += 1

    flow = np.zeros(m, np.int64)
    excess = balance.astype(np.int64).copy()
    y = np.zeros(n, np.float64)
    dist = np.full(n, np.inf)
    done = np.zeros(n, np.bool_)
    pred = np.full(n, -1, np.int64)
    pred_rev = np.zeros(n, np.bool_)
    touched = np.empty(n, np.int64)
    hk = np.empty(2 * m + n + 1, np.float64)
    hv = np.empty(2 * m + n + 1, np.int64)

    total = 0
    for v in range(n):
        total += abs(excess[v])
    augmentations = 0
    next_source = 0
    worst_rc = np.inf
    monotone = True

    while True:
        while next_source < n and excess[next_source] <= 0:
            next_source += 1
        if next_source == n:
            break
        source = next_source
        dist[source] = 0.0
        pred[source] = -1
        touched[0] = source
        n_touched = 1
        size = _heap_push(hk, hv, 0, 0.0, source)
        target = -1
        while size > 0:
            dv, v, size = _heap_pop(hk, hv, size)
            if done[v] or dv > dist[v]:
                continue
            done[v] = True
            if excess[v] < 0:
                target = v
                break
            for k in range(start[v], start[v + 1]):
                a = adj_arc[k]
                if adj_rev[k]:
                    if flow[a] == 0:
                        continue
                    w = tail[a]
                    rc = -cost[a] - y[v] + y[w]
                else:
                    w = head[a]
                    rc = cost[a] - y[v] + y[w]
                if done[w]:
                    continue
                if rc < 0.0:
                    rc = 0.0
                nd = dv + rc
                if nd < dist[w]:
                    if dist[w] == np.inf:
                        touched[n_touched] = w
                        n_touched += 1
                    dist[w] = nd
                    pred[w] = a
                    pred_rev[w] = adj_rev[k]
                    size = _heap_push(hk, hv, size, nd, w)

        if target < 0:
            return flow, y, source, augmentations, worst_rc, monotone

        reach = dist[target]
        for i in range(n_touched):
            v = touched[i]
            if done[v] and dist[v] < reach:
                y[v] += reach - dist[v]

        # walk back to the source to find the bottleneck
        amount = -excess[target]
        v = target
        while pred[v] >= 0:
            a = pred[v]
            if pred_rev[v]:
                if flow[a] < amount:
                    amount = flow[a]
                v = head[a]
            else:
                v = tail[a]
        if excess[source] < amount:
            amount = excess[source]
        v = target
        while pred[v] >= 0:
            a = pred[v]
            if pred_rev[v]:
                flow[a] -= amount
                v = head[a]
            else:
                flow[a] += amount
                v = tail[a]
        excess[source] -= amount
        excess[target] += amount
        augmentations += 1

        for i in range(n_touched):
            v = touched[i]
            dist[v] = np.inf
            done[v] = False
            pred[v] = -1

        if check:
            new_total = 0
            for v in range(n):
                new_total += abs(excess[v])
            if new_total >= total:
                monotone = False
            total = new_total
            rc = _min_reduced_cost(tail, head, cost, flow, y)
            if rc < worst_rc:
                worst_rc = rc

    return flow, y, -1, augmentations, worst_rc, monotone
