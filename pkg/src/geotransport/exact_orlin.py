"""Exact planar transport by excess scaling with supervertex contraction.

The residual graph is never materialised.  Shortest paths under reduced
costs are found by a Dijkstra search whose only explicit edges are the flow
support; every other red-to-blue relaxation is a closest-pair query between
settled reds and unsettled blues.  Blue-to-red arcs outside the support exist
only as uniform-cost dummy arcs that keep the network strongly connected.

Scales, flows and imbalances are exact rationals; potentials are floats.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bcp import BichromaticClosestPair
from .core import TransportInstance, TransportPlan
from .errors import InvariantViolation
from .mcf import DEFAULT_TOL, Flow, FlowNetwork, Potentials, check_optimality

ALPHA = Fraction(2, 3)
MAX_PHASES = 100_000

# how a vertex was reached in the search tree
ROOT, SUPPORT, FORWARD, DUMMY = 0, 1, 2, 3


def dummy_cost(n: int, max_weight: int, max_cost: float) -> float:
    """Cost of every dummy arc; a zero diameter counts as one."""
    return 2.0 * n * max_weight * (max_cost if max_cost > 0 else 1.0)


def add_dummies(inst: TransportInstance) -> FlowNetwork:
    """Complete red-to-blue network plus a dummy arc from every blue to every red.

    Arcs ``0 .. nr*nb-1`` are the red-to-blue arcs in row-major order and
    the dummy arcs follow in the same order.
    """
    nr, nb = inst.n_red, inst.n_blue
    cost = inst.cost_matrix().reshape(-1)
    big = dummy_cost(inst.n, inst.max_weight, float(cost.max()))
    reds = np.repeat(np.arange(nr, dtype=np.int64), nb)
    blues = np.tile(np.arange(nr, nr + nb, dtype=np.int64), nr)
    return FlowNetwork(
        nr + nb,
        np.concatenate([reds, blues]),
        np.concatenate([blues, reds]),
        np.concatenate([cost, np.full(nr * nb, big)]),
        np.concatenate([inst.red_supply, -inst.blue_demand]),
    )


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        # keep the smaller index as the representative
        lo, hi = min(ra, rb), max(ra, rb)
        self.parent[hi] = lo
        return lo


@dataclass
class ContractedState:
    """Supervertex partition plus the explicit flow between supervertices.

    Arcs are keyed ``(red, blue)`` with blue indices local to the blue side.
    ``contracted`` arcs carry positive flow of untracked value; ``flow``
    only holds arcs whose endpoints lie in different supervertices.
    """

    n_red: int
    balance: list[int]
    parts: _UnionFind
    contracted: set[tuple[int, int]] = field(default_factory=set)
    flow: dict[tuple[int, int], Fraction] = field(default_factory=dict)
    excess: dict[int, Fraction] = field(default_factory=dict)

    @classmethod
    def initial(cls, inst: TransportInstance) -> "ContractedState":
        balance = [int(v) for v in inst.red_supply] + [-int(v) for v in inst.blue_demand]
        state = cls(inst.n_red, balance, _UnionFind(len(balance)))
        state.recompute_excess()
        return state

    def supervertex(self, v: int) -> int:
        return self.parts.find(v)

    def endpoints(self, arc: tuple[int, int]) -> tuple[int, int]:
        return arc[0], self.n_red + arc[1]

    def recompute_excess(self) -> None:
        excess: dict[int, Fraction] = {}
        for v, b in enumerate(self.balance):
            root = self.parts.find(v)
            excess[root] = excess.get(root, Fraction(0)) + b
        for arc, value in self.flow.items():
            r, b = self.endpoints(arc)
            excess[self.parts.find(r)] -= value
            excess[self.parts.find(b)] += value
        self.excess = excess

    def members(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for v in range(len(self.balance)):
            out.setdefault(self.parts.find(v), []).append(v)
        return out

    def support(self) -> list[tuple[int, int]]:
        """Arcs with positive flow, tracked or contracted."""
        return sorted(self.contracted | {a for a, f in self.flow.items() if f > 0})

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.balance]
        for arc in self.support():
            r, b = self.endpoints(arc)
            adj[r].append(b)
            adj[b].append(r)
        return adj

    def contract(self, arc: tuple[int, int]) -> None:
        """Merge the endpoint supervertices and drop the arcs now inside one."""
        r, b = self.endpoints(arc)
        self.parts.union(r, b)
        self.contracted.add(arc)
        for other in [a for a in self.flow if self._internal(a)]:
            del self.flow[other]

    def _internal(self, arc: tuple[int, int]) -> bool:
        r, b = self.endpoints(arc)
        return self.parts.find(r) == self.parts.find(b)


@dataclass
class ScalingState:
    delta: Fraction
    alpha: Fraction = ALPHA
    phase: int = 0


@dataclass
class OrlinStats:
    phases: int = 0
    augmentations: int = 0
    contractions: int = 0
    dijkstras: int = 0
    dead_reds: int = 0
    max_support: int = 0
    invariant_checks: int = 0
    dummy_flow: int = 0


@dataclass
class OrlinState:
    inst: TransportInstance
    contracted: ContractedState
    scaling: ScalingState
    potentials: np.ndarray
    dummy: float
    bcp: BichromaticClosestPair
    stats: OrlinStats = field(default_factory=OrlinStats)
    check_invariants: bool = False
    tol: float = DEFAULT_TOL
    cost: np.ndarray | None = None

    @classmethod
    def initial(cls, inst: TransportInstance, check_invariants: bool = False) -> "OrlinState":
        cost = inst.cost_matrix()
        c_max = float(cost.max())
        return cls(
            inst=inst,
            contracted=ContractedState.initial(inst),
            scaling=ScalingState(Fraction(inst.max_weight)),
            potentials=np.zeros(inst.n),
            dummy=dummy_cost(inst.n, inst.max_weight, c_max),
            bcp=BichromaticClosestPair(inst.blue_xy, inst.metric),
            check_invariants=check_invariants,
            tol=DEFAULT_TOL * max(1.0, c_max),
            cost=cost if check_invariants else None,
        )

    @property
    def done(self) -> bool:
        return all(e == 0 for e in self.contracted.excess.values())


@dataclass(frozen=True)
class SearchTree:
    """Distances plus the predecessor and arc kind of every vertex."""

    dist: np.ndarray
    pred: np.ndarray
    kind: np.ndarray
    order: np.ndarray

    def path(self, target: int) -> list[int]:
        """Vertices from the root to ``target``."""
        out = [target]
        while self.pred[out[-1]] >= 0:
            out.append(int(self.pred[out[-1]]))
        return out[::-1]


def geometric_dijkstra(state: OrlinState, source: int) -> SearchTree:
    """Reduced-cost distances from ``source`` over the full residual graph.

    Support arcs are tight, so their far ends are settled at the current
    label before any closest-pair query.  A red vertex with no support arc to
    a settled vertex can only be reached by a dummy arc; the cheapest such
    arc is tracked with one running minimum per colour.
    """
    inst = state.inst
    nr, n = inst.n_red, inst.n
    y = state.potentials
    red_xy = inst.red_xy
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    kind = np.zeros(n, dtype=np.int8)
    settled = np.zeros(n, dtype=bool)
    order: list[int] = []
    adj = state.contracted.adjacency()

    bcp = state.bcp
    bcp.clear_p()
    bcp.reset_q(y[nr:])
    owner: list[int] = []
    # unsettled reds by potential; settled blues by label minus potential
    red_heap = [(float(y[r]), r) for r in range(nr)]
    heapq.heapify(red_heap)
    blue_best = (math.inf, -1)
    queue: deque[tuple[int, int]] = deque()

    def settle(v: int, label: float, parent: int, how: int) -> None:
        nonlocal blue_best
        dist[v] = label
        pred[v] = parent
        kind[v] = how
        settled[v] = True
        order.append(v)
        if v < nr:
            owner.append(v)
            bcp.insert_p((red_xy[v, 0], red_xy[v, 1]), label - y[v])
        else:
            bcp.delete_q(v - nr)
            key = label - y[v]
            if key < blue_best[0]:
                blue_best = (key, v)
        for w in adj[v]:
            if not settled[w]:
                queue.append((w, v))

    settle(source, 0.0, -1, ROOT)
    while len(order) < n:
        if queue:
            w, v = queue.popleft()
            if not settled[w]:
                settle(w, float(dist[v]), v, SUPPORT)
            continue
        while red_heap and settled[red_heap[0][1]]:
            heapq.heappop(red_heap)
        via_dummy = math.inf
        if red_heap and blue_best[1] >= 0:
            via_dummy = blue_best[0] + state.dummy + red_heap[0][0]
        pair = bcp.query()
        if pair is not None and pair[2] <= via_dummy:
            h, q, value = pair
            r = owner[h]
            settle(nr + q, max(float(dist[r]), value), r, FORWARD)
        elif red_heap and blue_best[1] >= 0:
            _, r = heapq.heappop(red_heap)
            b = blue_best[1]
            state.stats.dead_reds += 1
            settle(r, max(float(dist[b]), via_dummy), b, DUMMY)
        else:
            raise InvariantViolation(f"vertex unreachable from {source} in the residual graph")
    state.stats.dijkstras += 1
    return SearchTree(dist, pred, kind, np.array(order, dtype=np.int64))


def _arc_of(nr: int, u: int, v: int) -> tuple[tuple[int, int], bool]:
    """Original arc joining ``u`` and ``v`` and whether ``u -> v`` follows it."""
    if u < nr:
        return (u, v - nr), True
    return (v, u - nr), False


def _augment(state: OrlinState, tree: SearchTree, target: int) -> None:
    cs = state.contracted
    delta = state.scaling.delta
    nr = state.inst.n_red
    path = tree.path(target)
    for u, v in zip(path, path[1:]):
        if tree.kind[v] == DUMMY:
            raise InvariantViolation(f"augmenting path uses the dummy arc {u}->{v}")
        if cs.supervertex(u) == cs.supervertex(v):
            continue
        arc, forward = _arc_of(nr, u, v)
        current = cs.flow.get(arc, Fraction(0))
        if forward:
            cs.flow[arc] = current + delta
        elif current < delta:
            raise InvariantViolation(f"reverse arc {arc} carries {current} < {delta}")
        elif current == delta:
            del cs.flow[arc]
        else:
            cs.flow[arc] = current - delta
    cs.excess[cs.supervertex(path[0])] -= delta
    cs.excess[cs.supervertex(target)] += delta
    state.stats.augmentations += 1


def _contract_heavy(state: OrlinState) -> None:
    cs = state.contracted
    threshold = 3 * state.inst.n * state.scaling.delta
    merged = False
    while True:
        heavy = [a for a, f in sorted(cs.flow.items()) if f >= threshold]
        if not heavy:
            break
        cs.contract(heavy[0])
        state.stats.contractions += 1
        merged = True
    if merged:
        cs.recompute_excess()
        if state.check_invariants:
            check_state(state)


def check_state(state: OrlinState) -> None:
    """Raise if the support has a cycle or complementary slackness fails."""
    cs = state.contracted
    nr = state.inst.n_red
    support = cs.support()
    state.stats.max_support = max(state.stats.max_support, len(support))
    state.stats.invariant_checks += 1
    if len(support) > state.inst.n - 1:
        raise InvariantViolation(f"support has {len(support)} arcs on {state.inst.n} vertices")
    forest = _UnionFind(state.inst.n)
    for arc in support:
        r, b = cs.endpoints(arc)
        if forest.find(r) == forest.find(b):
            raise InvariantViolation(f"support arc {arc} closes a cycle")
        forest.union(r, b)
    cost = state.cost if state.cost is not None else state.inst.cost_matrix()
    y = state.potentials
    reduced = cost - y[:nr, None] + y[None, nr:]
    if reduced.min() < -state.tol:
        r, b = np.unravel_index(int(np.argmin(reduced)), reduced.shape)
        raise InvariantViolation(f"arc ({r}, {b}) has reduced cost {reduced[r, b]:.3e}")
    for r, b in support:
        if abs(reduced[r, b]) > state.tol:
            raise InvariantViolation(f"support arc ({r}, {b}) has reduced cost {reduced[r, b]:.3e}")
    dummy_rc = state.dummy - y[nr:].max() + y[:nr].min()
    if dummy_rc < -state.tol:
        raise InvariantViolation(f"a dummy arc has reduced cost {dummy_rc:.3e}")


def _active(state: OrlinState) -> tuple[list[int], list[int]]:
    bound = state.scaling.alpha * state.scaling.delta
    ex = sorted(v for v, e in state.contracted.excess.items() if e >= bound)
    de = sorted(v for v, e in state.contracted.excess.items() if e <= -bound)
    return ex, de


def scaling_phase(state: OrlinState) -> OrlinState:
    """Run one scale: optional rescale, contractions, augmentations, halving."""
    cs = state.contracted
    sc = state.scaling
    excess, deficit = _active(state)
    if not excess and not deficit and not cs.flow:
        largest = max(abs(e) for e in cs.excess.values())
        if largest == 0:
            sc.delta /= 2
            sc.phase += 1
            return state
        sc.delta = largest
    if state.check_invariants:
        total = sum(e for e in cs.excess.values() if e > 0)
        if total > 2 * state.inst.n * sc.delta:
            raise InvariantViolation(f"total excess {total} exceeds 2n times the scale {sc.delta}")
    _contract_heavy(state)
    while True:
        excess, deficit = _active(state)
        if not excess or not deficit:
            break
        source = excess[0]  # representatives are the smallest members
        tree = geometric_dijkstra(state, source)
        state.potentials = state.potentials - tree.dist
        sinks = set(deficit)
        target = min(
            (v for v in range(state.inst.n) if cs.supervertex(v) in sinks),
            key=lambda v: (tree.dist[v], v),
        )
        _augment(state, tree, target)
        if state.check_invariants:
            check_state(state)
    sc.delta /= 2
    sc.phase += 1
    state.stats.phases += 1
    return state


def recover_flow(state: OrlinState) -> tuple[Flow, Potentials, FlowNetwork]:
    """Tree flow on a shortest-path tree from red 0 under the final potentials.

    Returns the flow on :func:`add_dummies` of the instance together with the
    updated potentials, which certify it.
    """
    inst = state.inst
    nr, nb = inst.n_red, inst.n_blue
    tree = geometric_dijkstra(state, 0)
    y = state.potentials - tree.dist
    if np.any(tree.kind == DUMMY):
        v = int(np.flatnonzero(tree.kind == DUMMY)[0])
        raise InvariantViolation(f"shortest-path tree reaches vertex {v} through a dummy arc")
    subtree = np.array(state.contracted.balance, dtype=np.int64)
    values = np.zeros(2 * nr * nb, dtype=np.int64)
    for v in tree.order[::-1]:
        parent = int(tree.pred[v])
        if parent < 0:
            continue
        (r, b), forward = _arc_of(nr, parent, int(v))
        amount = -subtree[v] if forward else subtree[v]
        if amount < 0:
            raise InvariantViolation(f"tree flow on arc ({r}, {b}) is negative ({amount})")
        values[r * nb + b] = amount
        subtree[parent] += subtree[v]
    net = add_dummies(inst)
    flow, potentials = Flow(values), Potentials(y)
    report = check_optimality(net, flow, potentials, tol=state.tol)
    if not report:
        raise InvariantViolation(f"recovered flow is not certified: {report.message}")
    state.stats.dummy_flow = int(values[nr * nb :].sum())
    return flow, potentials, net


@dataclass(frozen=True)
class OrlinRun:
    plan: TransportPlan
    potentials: Potentials
    stats: OrlinStats


def solve_detailed(inst: TransportInstance, check_invariants: bool = False) -> OrlinRun:
    if inst.dim != 2:
        raise ValueError("the exact geometric solver works in the plane only")
    state = OrlinState.initial(inst, check_invariants)
    while not state.done:
        if state.scaling.phase >= MAX_PHASES:
            raise InvariantViolation(f"no convergence after {MAX_PHASES} scaling phases")
        scaling_phase(state)
    flow, potentials, _ = recover_flow(state)
    nr, nb = inst.n_red, inst.n_blue
    forward = flow.values[: nr * nb]
    pos = np.flatnonzero(forward)
    plan = TransportPlan(pos // nb, pos % nb, forward[pos])
    return OrlinRun(plan, potentials, state.stats)


def solve(inst: TransportInstance, check_invariants: bool = False) -> tuple[TransportPlan, Potentials]:
    """Optimal plan plus vertex potentials (reds first) certifying it."""
    run = solve_detailed(inst, check_invariants)
    return run.plan, run.potentials
