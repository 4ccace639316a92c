"""(1+ε)-approximate transport through a well-separated pair decomposition.

Pipeline: compressed quadtree over ``R ∪ B`` → bichromatic WSPD with
separation ``ε/2`` → sparse DAG (red up-tree, blue down-tree, one cross arc
per pair) → exact min-cost flow → greedy decomposition of that flow back into
a transport plan.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import mcf
from .core import Metric, TransportInstance, TransportPlan
from .errors import InvariantViolation


@dataclass
class QuadNode:
    """Square ``[x0, x0+side] × [y0, y0+side]``; leaves are degenerate (side 0)."""

    x0: float
    y0: float
    side: float
    parent: int
    children: list[int] = field(default_factory=list)
    points: np.ndarray | None = None  # leaf only: indices into the combined point array
    red_mass: int = 0
    blue_mass: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.points is not None


@dataclass
class CompressedQuadtree:
    """Nodes are numbered in preorder, so every child id exceeds its parent's.

    Point ``i < n_red`` is red ``i``; point ``n_red + j`` is blue ``j``.
    """

    nodes: list[QuadNode]
    xy: np.ndarray
    weights: np.ndarray
    n_red: int
    leaf_of: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    def locate(self, p: tuple[float, float]) -> int:
        """Descend from the root to the leaf whose location equals ``p`` (or -1)."""
        q = np.array([p], dtype=float)
        k = 0
        while True:
            node = self.nodes[k]
            if node.is_leaf:
                return k if (node.x0 == p[0] and node.y0 == p[1]) else -1
            code = _quadrant_codes(q, node.x0, node.y0, node.side)[0]
            for c in node.children:
                ch = self.nodes[c]
                centre = np.array([[ch.x0 + ch.side / 2.0, ch.y0 + ch.side / 2.0]])
                if _quadrant_codes(centre, node.x0, node.y0, node.side)[0] == code:
                    k = c
                    break
            else:
                return -1


def _quadrant_codes(xy: np.ndarray, x0: float, y0: float, side: float) -> np.ndarray:
    half = side / 2.0
    right = xy[:, 0] > x0 + half
    upper = xy[:, 1] > y0 + half
    return right.astype(np.int8) + 2 * upper.astype(np.int8)


def build_quadtree(inst_or_xy, n_red: int | None = None, weights: np.ndarray | None = None) -> CompressedQuadtree:
    """Compressed quadtree whose root is the smallest enclosing square.

    Accepts either a :class:`TransportInstance` or a raw ``(k, 2)`` array.
    Coincident points share a leaf.  Every internal node has at least two
    children because single-child chains are collapsed into the smallest
    quadtree descendant containing all of the node's points.
    """
    if isinstance(inst_or_xy, TransportInstance):
        inst = inst_or_xy
        xy = np.vstack([inst.red_xy, inst.blue_xy])
        n_red = inst.n_red
        weights = np.concatenate([inst.red_supply, inst.blue_demand])
    else:
        xy = np.asarray(inst_or_xy, dtype=float)
        n_red = len(xy) if n_red is None else n_red
        weights = np.ones(len(xy), np.int64) if weights is None else np.asarray(weights, np.int64)
    if len(xy) == 0:
        raise ValueError("quadtree needs at least one point")
    if xy.shape[1] != 2:
        raise ValueError("quadtree is planar")
    lo = xy.min(axis=0)
    side = float((xy.max(axis=0) - lo).max())

    nodes: list[QuadNode] = []
    leaf_of = np.full(len(xy), -1, np.int64)
    is_red = np.arange(len(xy)) < n_red

    def make(idx: np.ndarray, x0: float, y0: float, side: float, parent: int) -> None:
        # Iterative preorder construction.
        stack = [(idx, x0, y0, side, parent, False)]
        while stack:
            idx, x0, y0, side, parent, shrink = stack.pop()
            pts = xy[idx]
            k = len(nodes)
            if np.all(pts == pts[0]):
                node = QuadNode(float(pts[0, 0]), float(pts[0, 1]), 0.0, parent, points=idx)
                leaf_of[idx] = k
            else:
                if shrink:
                    while True:
                        codes = _quadrant_codes(pts, x0, y0, side)
                        if np.any(codes != codes[0]):
                            break
                        half = side / 2.0
                        c = int(codes[0])
                        x0 += half * (c & 1)
                        y0 += half * (c >> 1)
                        side = half
                codes = _quadrant_codes(pts, x0, y0, side)
                node = QuadNode(x0, y0, side, parent)
                half = side / 2.0
                kids = []
                for c in range(4):
                    sel = idx[codes == c]
                    if len(sel):
                        kids.append((sel, x0 + half * (c & 1), y0 + half * (c >> 1), half, k, True))
                # push in reverse so quadrant 0 is numbered first
                stack.extend(reversed(kids))
            nodes.append(node)
            if parent >= 0:
                nodes[parent].children.append(k)

    make(np.arange(len(xy)), float(lo[0]), float(lo[1]), side, -1)

    # subtree masses, children before parents
    for k in range(len(nodes) - 1, -1, -1):
        node = nodes[k]
        if node.is_leaf:
            w = weights[node.points]
            red = is_red[node.points]
            node.red_mass = int(w[red].sum())
            node.blue_mass = int(w[~red].sum())
        if node.parent >= 0:
            par = nodes[node.parent]
            par.red_mass += node.red_mass
            par.blue_mass += node.blue_mass
    return CompressedQuadtree(nodes, xy, weights, n_red, leaf_of)


@dataclass(frozen=True)
class WSPDPair:
    """Directed pair: reds of ``u`` are matched to blues of ``v``."""

    u: int
    v: int
    c_min: float
    cost: float


def _box_gap(a: QuadNode, b: QuadNode) -> tuple[float, float]:
    gx = max(0.0, b.x0 - (a.x0 + a.side), a.x0 - (b.x0 + b.side))
    gy = max(0.0, b.y0 - (a.y0 + a.side), a.y0 - (b.y0 + b.side))
    return gx, gy


def union_diameter(a: QuadNode, b: QuadNode, metric: Metric) -> float:
    """Exact metric diameter of the union of two axis-parallel squares."""
    fx = max(b.x0 + b.side - a.x0, a.x0 + a.side - b.x0)
    fy = max(b.y0 + b.side - a.y0, a.y0 + a.side - b.y0)
    return max(
        metric.box_diameter(fx, fy),
        metric.box_diameter(a.side, a.side),
        metric.box_diameter(b.side, b.side),
    )


def build_wspd(tree: CompressedQuadtree, eps: float, metric: Metric | str = Metric.L2) -> list[WSPDPair]:
    """Bichromatic WSPD with separation ``eps / 2``.

    Every red/blue point pair is covered by exactly one directed pair and
    each pair satisfies ``max(diam u, diam v) <= (eps/2) * c_min(u, v)``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    metric = Metric.parse(metric)
    sep = eps / 2.0
    nodes = tree.nodes
    diam = [metric.box_diameter(nd.side, nd.side) for nd in nodes]
    has_r = [nd.red_mass > 0 for nd in nodes]
    has_b = [nd.blue_mass > 0 for nd in nodes]
    out: list[WSPDPair] = []
    stack: list[tuple[int, int]] = [(0, 0)]
    while stack:
        u, v = stack.pop()
        if u == v:
            nd = nodes[u]
            if nd.is_leaf:
                if has_r[u] and has_b[u]:
                    out.append(WSPDPair(u, u, 0.0, 0.0))
                continue
            ch = nd.children
            for i in range(len(ch) - 1, -1, -1):
                for j in range(len(ch) - 1, i - 1, -1):
                    stack.append((ch[i], ch[j]))
            continue
        uv = has_r[u] and has_b[v]
        vu = has_r[v] and has_b[u]
        if not (uv or vu):
            continue
        a, b = nodes[u], nodes[v]
        gx, gy = _box_gap(a, b)
        c_min = metric.box_diameter(gx, gy)
        if max(diam[u], diam[v]) <= sep * c_min:
            cost = union_diameter(a, b, metric)
            if uv:
                out.append(WSPDPair(u, v, c_min, cost))
            if vu:
                out.append(WSPDPair(v, u, c_min, cost))
            continue
        # split the node with the larger square (ties: the lower id)
        if a.side > b.side or (a.side == b.side and u < v):
            for c in reversed(a.children):
                stack.append((c, v))
        else:
            for c in reversed(b.children):
                stack.append((u, c))
    return out


@dataclass
class SparseGraph:
    """Flow network over the up-tree (red) and down-tree (blue) copies.

    ``up[k]`` / ``down[k]`` give the vertex of quadtree node ``k`` in each
    tree (-1 when the node holds no point of that colour).  Cross arcs are the
    last ``len(pairs)`` arcs of ``network``, in pair order.
    """

    tree: CompressedQuadtree
    pairs: list[WSPDPair]
    network: mcf.FlowNetwork
    up: np.ndarray
    down: np.ndarray
    first_cross: int

    def cross_arcs(self) -> range:
        return range(self.first_cross, self.network.m)

    def dump(self, path: str | os.PathLike) -> None:
        net = self.network
        with open(path, "w", encoding="utf-8") as fh:
            for v, b in enumerate(net.balance.tolist()):
                fh.write(f"v {v} {b}\n")
            for t, h, c in zip(net.tail.tolist(), net.head.tolist(), net.cost.tolist()):
                fh.write(f"a {t} {h} {c!r}\n")


def build_graph(tree: CompressedQuadtree, pairs: list[WSPDPair], inst: TransportInstance) -> SparseGraph:
    nodes = tree.nodes
    k = len(nodes)
    up = np.full(k, -1, np.int64)
    down = np.full(k, -1, np.int64)
    nv = 0
    for i, nd in enumerate(nodes):
        if nd.red_mass:
            up[i] = nv
            nv += 1
    for i, nd in enumerate(nodes):
        if nd.blue_mass:
            down[i] = nv
            nv += 1
    tail: list[int] = []
    head: list[int] = []
    balance = np.zeros(nv, np.int64)
    for i, nd in enumerate(nodes):
        p = nd.parent
        if p >= 0:
            if up[i] >= 0:
                tail.append(up[i])
                head.append(up[p])
            if down[i] >= 0:
                tail.append(down[p])
                head.append(down[i])
        if nd.is_leaf:
            if up[i] >= 0:
                balance[up[i]] = nd.red_mass
            if down[i] >= 0:
                balance[down[i]] = -nd.blue_mass
    first_cross = len(tail)
    cost = [0.0] * first_cross
    for pr in pairs:
        tail.append(up[pr.u])
        head.append(down[pr.v])
        cost.append(pr.cost)
    net = mcf.FlowNetwork(nv, np.array(tail, np.int64), np.array(head, np.int64), np.array(cost), balance)
    return SparseGraph(tree, pairs, net, up, down, first_cross)


def recover_plan(graph: SparseGraph, flow: mcf.Flow) -> TransportPlan:
    """Decompose a feasible flow on the sparse graph into a transport plan.

    Reds are collected bottom-up through the up-tree in linked lists; every
    positive cross arc leaving a node takes its flow from the front of that
    node's list.  Blues are handled symmetrically in the down-tree, and the
    two per-arc lists are then zipped into plan entries.
    """
    tree = graph.tree
    nodes = tree.nodes
    n_red = tree.n_red
    f = flow.values
    net = graph.network
    if np.any(flow.imbalance(net) != 0):
        raise ValueError("flow is not feasible on the sparse graph")

    out_arcs: dict[int, list[int]] = {}
    in_arcs: dict[int, list[int]] = {}
    for a in graph.cross_arcs():
        if f[a] > 0:
            pr = graph.pairs[a - graph.first_cross]
            out_arcs.setdefault(pr.u, []).append(a)
            in_arcs.setdefault(pr.v, []).append(a)

    def side(is_red: bool, arcs_at: dict[int, list[int]]) -> dict[int, list[tuple[int, int]]]:
        npts = len(tree.xy)
        nxt = np.full(npts, -1, np.int64)
        remaining = np.zeros(npts, np.int64)
        if is_red:
            remaining[:n_red] = tree.weights[:n_red]
        else:
            remaining[n_red:] = tree.weights[n_red:]
        head = [-1] * len(nodes)
        tail = [-1] * len(nodes)
        assigned: dict[int, list[tuple[int, int]]] = {}
        for k in range(len(nodes) - 1, -1, -1):
            nd = nodes[k]
            if (nd.red_mass if is_red else nd.blue_mass) == 0:
                continue
            if nd.is_leaf:
                for p in nd.points.tolist():
                    if (p < n_red) == is_red:
                        if head[k] < 0:
                            head[k] = p
                        else:
                            nxt[tail[k]] = p
                        tail[k] = p
            else:
                for c in nd.children:
                    if head[c] < 0:
                        continue
                    if head[k] < 0:
                        head[k] = head[c]
                    else:
                        nxt[tail[k]] = head[c]
                    tail[k] = tail[c]
            for a in arcs_at.get(k, ()):
                need = int(f[a])
                lst = assigned.setdefault(a, [])
                while need > 0:
                    p = head[k]
                    if p < 0:
                        raise InvariantViolation(f"cross arc {a} carries more flow than node {k} holds")
                    take = min(need, int(remaining[p]))
                    lst.append((p, take))
                    remaining[p] -= take
                    need -= take
                    if remaining[p] == 0:
                        head[k] = int(nxt[p])
                        if head[k] < 0:
                            tail[k] = -1
        if head[0] >= 0:
            raise InvariantViolation("flow leaves mass stranded at the root")
        return assigned

    a_red = side(True, out_arcs)
    a_blue = side(False, in_arcs)

    rr: list[int] = []
    bb: list[int] = []
    aa: list[int] = []
    for a, reds in a_red.items():
        blues = a_blue[a]
        i = j = 0
        ri, rw = reds[0]
        bi, bw = blues[0]
        while True:
            t = min(rw, bw)
            rr.append(ri)
            bb.append(bi - n_red)
            aa.append(t)
            rw -= t
            bw -= t
            if rw == 0:
                i += 1
                if i == len(reds):
                    break
                ri, rw = reds[i]
            if bw == 0:
                j += 1
                bi, bw = blues[j]
    return TransportPlan.aggregate(np.array(rr, np.int64), np.array(bb, np.int64), np.array(aa, np.int64))


@dataclass
class WspdRun:
    plan: TransportPlan
    graph: SparseGraph
    flow: mcf.Flow
    flow_cost: float


def solve_detailed(inst: TransportInstance, eps: float) -> WspdRun:
    if not eps > 0:
        raise ValueError("eps must be positive")
    if inst.dim != 2:
        raise ValueError("the WSPD solver is planar")
    tree = build_quadtree(inst)
    pairs = build_wspd(tree, eps, inst.metric)
    graph = build_graph(tree, pairs, inst)
    flow, _ = mcf.solve(graph.network)
    plan = recover_plan(graph, flow)
    return WspdRun(plan, graph, flow, flow.cost(graph.network))


def solve(inst: TransportInstance, eps: float) -> TransportPlan:
    return solve_detailed(inst, eps).plan
