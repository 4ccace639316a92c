import numpy as np
import pytest

from geotransport import TransportInstance, plan_cost, verify_plan
from geotransport import wspd_approx as wspd
from geotransport.mcf import solve_transport

from conftest import random_instance


def points_below(tree: wspd.CompressedQuadtree, node: int) -> list[int]:
    out, stack = [], [node]
    while stack:
        nd = tree.nodes[stack.pop()]
        if nd.is_leaf:
            out.extend(nd.points.tolist())
        else:
            stack.extend(nd.children)
    return out


def coverage(tree, pairs) -> dict[tuple[int, int], list[float]]:
    """Every (red, blue) pair mapped to the costs of all WSPD pairs covering it."""
    nr = tree.n_red
    cover: dict[tuple[int, int], list[float]] = {}
    for pr in pairs:
        reds = [p for p in points_below(tree, pr.u) if p < nr]
        blues = [p - nr for p in points_below(tree, pr.v) if p >= nr]
        for r in reds:
            for b in blues:
                cover.setdefault((r, b), []).append(pr.cost)
    return cover


def test_single_point_tree():
    tree = wspd.build_quadtree(np.array([[0.3, 0.7]]), n_red=1, weights=np.array([1]))
    assert len(tree) == 1 and tree.nodes[0].is_leaf


def test_four_corners_tree():
    inst = TransportInstance([(0, 0), (1, 1)], [1, 1], [(1, 0), (0, 1)], [1, 1])
    tree = wspd.build_quadtree(inst)
    assert len(tree) == 5
    assert tree.nodes[0].children == [1, 2, 3, 4]
    assert all(tree.nodes[c].is_leaf for c in tree.nodes[0].children)


def test_large_tree_size_and_locate():
    rng = np.random.default_rng(0)
    xy = rng.random((1000, 2))
    tree = wspd.build_quadtree(xy, n_red=500, weights=np.ones(1000, dtype=np.int64))
    assert len(tree) <= 4 * 1000
    for i, p in enumerate(xy):
        leaf = tree.locate((p[0], p[1]))
        assert leaf >= 0 and i in tree.nodes[leaf].points.tolist()
        assert tree.leaf_of[i] == leaf


def test_one_red_one_blue_gives_one_pair():
    inst = TransportInstance([(0, 0)], [3], [(2, 1)], [3], "l2")
    tree = wspd.build_quadtree(inst)
    pairs = wspd.build_wspd(tree, 0.5, inst.metric)
    assert len(pairs) == 1
    graph = wspd.build_graph(tree, pairs, inst)
    assert graph.network.cost[graph.first_cross] == pytest.approx(np.hypot(2, 1))
    run = wspd.solve_detailed(inst, 0.5)
    assert run.plan.entries() == [(0, 0, 3)]


def test_nonpositive_eps_rejected():
    inst = TransportInstance([(0, 0)], [1], [(1, 1)], [1])
    with pytest.raises(ValueError):
        wspd.solve(inst, 0.0)
    with pytest.raises(ValueError):
        wspd.build_wspd(wspd.build_quadtree(inst), -1.0)


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
@pytest.mark.parametrize("eps", [0.5, 0.1])
def test_structural_properties_exhaustive(metric, eps):
    rng = np.random.default_rng(7)
    for _ in range(6):
        inst = random_instance(rng, n_max=60, metric=metric)
        tree = wspd.build_quadtree(inst)
        pairs = wspd.build_wspd(tree, eps, inst.metric)
        for pr in pairs:  # W2
            du = inst.metric.box_diameter(tree.nodes[pr.u].side, tree.nodes[pr.u].side)
            dv = inst.metric.box_diameter(tree.nodes[pr.v].side, tree.nodes[pr.v].side)
            assert max(du, dv) <= (eps / 2) * pr.c_min or (du == dv == 0)
        cover = coverage(tree, pairs)
        assert len(cover) == inst.n_red * inst.n_blue  # W1 coverage
        assert all(len(c) == 1 for c in cover.values())  # W1 uniqueness
        dist = inst.cost_matrix()
        for (r, b), (c,) in cover.items():
            assert dist[r, b] <= c * (1 + 1e-12) + 1e-15
            assert c <= (1 + eps) * dist[r, b] + 1e-12
        graph = wspd.build_graph(tree, pairs, inst)
        assert graph.network.balance.sum() == 0


def test_one_cross_edge_zip():
    inst = TransportInstance([(0.0, 0.0)], [5], [(10.0, 0.0), (10.001, 0.0)], [2, 3], "l2")
    run = wspd.solve_detailed(inst, 0.5)
    used = [a for a in run.graph.cross_arcs() if run.flow.values[a] > 0]
    assert len(used) == 1
    assert run.plan.entries() == [(0, 0, 2), (0, 1, 3)]


def test_recovered_plan_matches_flow_cost_through_cover():
    rng = np.random.default_rng(11)
    for _ in range(20):
        inst = random_instance(rng, n_max=50)
        run = wspd.solve_detailed(inst, 0.25)
        assert verify_plan(inst, run.plan)
        cover = coverage(run.graph.tree, run.graph.pairs)
        routed = sum(a * cover[(r, b)][0] for r, b, a in run.plan.entries())
        assert routed == pytest.approx(run.flow_cost, rel=1e-9, abs=1e-12)
        assert plan_cost(inst, run.plan) <= run.flow_cost * (1 + 1e-12) + 1e-12


@pytest.mark.parametrize("eps", [0.5, 0.1])
def test_ratio_to_oracle(eps):
    rng = np.random.default_rng(3)
    for _ in range(25):
        inst = random_instance(rng, n_max=60)
        opt = plan_cost(inst, solve_transport(inst))
        cost = plan_cost(inst, wspd.solve(inst, eps))
        assert opt * (1 - 1e-9) - 1e-12 <= cost <= (1 + eps) * opt + 1e-9


def test_pair_count_scaling_sanity():
    rng = np.random.default_rng(5)
    eps = 0.5
    per_point = []
    for n in (1000, 4000):
        xy = rng.random((n, 2))
        tree = wspd.build_quadtree(xy, n_red=n // 2, weights=np.ones(n, dtype=np.int64))
        per_point.append(len(wspd.build_wspd(tree, eps)) / n)
    # pairs per point approach a constant times 1/eps^2 from below as the tree deepens
    assert max(per_point) <= 64 / eps**2
    assert per_point[1] <= 1.6 * per_point[0]


def test_dump_graph_format(tmp_path):
    inst = TransportInstance([(0, 0), (1, 0)], [1, 2], [(0, 1), (1, 1)], [2, 1])
    graph = wspd.solve_detailed(inst, 0.5).graph
    path = tmp_path / "g.txt"
    graph.dump(path)
    lines = path.read_text().splitlines()
    assert sum(1 for ln in lines if ln.startswith("v ")) == graph.network.n
    assert sum(1 for ln in lines if ln.startswith("a ")) == graph.network.m
