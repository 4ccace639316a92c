import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geotransport import (
    InstanceError,
    Metric,
    TransportInstance,
    TransportPlan,
    instance_stats,
    metric_dist,
    plan_cost,
    verify_plan,
)
from geotransport.mcf import solve_transport

from conftest import lp_optimum, random_instance


@pytest.mark.parametrize(
    "a, b, metric, expected",
    [((0, 0), (3, 4), "l2", 5.0), ((0, 0), (3, 4), "l1", 7.0), ((1, 1), (1, 1), "linf", 0.0), ((0, 0), (3, 4), "linf", 4.0)],
)
def test_metric_dist_examples(a, b, metric, expected):
    assert metric_dist(a, b, metric) == expected


def test_metric_dimension_mismatch():
    with pytest.raises(ValueError):
        metric_dist((0, 0), (1, 2, 3), "l2")


coord = st.floats(-1e3, 1e3, allow_nan=False)
point = st.tuples(coord, coord)


@settings(max_examples=300, deadline=None)
@given(point, point, point, st.sampled_from(list(Metric)))
def test_metric_axioms(p, q, r, metric):
    d = lambda u, v: metric_dist(u, v, metric)  # noqa: E731
    assert d(p, q) == d(q, p) >= 0
    assert d(p, p) == 0
    assert d(p, r) <= (d(p, q) + d(q, r)) * (1 + 1e-12) + 1e-12


def _line_instance():
    return TransportInstance([(0.0, 0.0)], [2], [(1.0, 0.0), (2.0, 0.0)], [1, 1], "l2")


def test_plan_cost_forced_example():
    plan = TransportPlan.from_entries([(0, 0, 1), (0, 1, 1)])
    assert plan_cost(_line_instance(), plan) == 3.0


def test_plan_rejects_zero_and_duplicate_entries():
    with pytest.raises(InstanceError):
        TransportPlan.from_entries([(0, 0, 0)])
    with pytest.raises(InstanceError):
        TransportPlan.from_entries([(0, 0, 1), (0, 0, 2)])


def test_plan_cost_index_out_of_range():
    with pytest.raises(IndexError):
        plan_cost(_line_instance(), TransportPlan.from_entries([(0, 5, 2)]))


def test_plan_cost_matches_lp_on_small_instance(rng):
    inst = random_instance(rng, n_max=5)
    assert plan_cost(inst, solve_transport(inst)) == pytest.approx(lp_optimum(inst), rel=1e-9, abs=1e-12)


def test_plan_cost_permutation_invariant(rng):
    inst = random_instance(rng, n_max=30)
    plan = solve_transport(inst)
    entries = plan.entries()
    for perm in itertools.islice(itertools.permutations(range(len(entries))), 5):
        shuffled = TransportPlan.from_entries([entries[i] for i in perm])
        assert plan_cost(inst, shuffled) == plan_cost(inst, plan)


def test_verify_plan_ok_and_short_blue():
    inst = _line_instance()
    assert verify_plan(inst, TransportPlan.from_entries([(0, 0, 1), (0, 1, 1)]))
    report = verify_plan(inst, TransportPlan.from_entries([(0, 0, 1)]))
    assert not report
    assert report.short_blues == (1,)
    assert "blue 1" in str(report)


def test_instance_invariants():
    with pytest.raises(InstanceError):
        TransportInstance([(0, 0)], [2], [(1, 1)], [1])
    with pytest.raises(InstanceError):
        TransportInstance([(0, 0)], [0], [(1, 1)], [0])
    with pytest.raises(InstanceError):
        TransportInstance([(0, 0)], [1], [(1, 1, 1)], [1])


def test_instance_is_immutable():
    inst = _line_instance()
    with pytest.raises(ValueError):
        inst.red_xy[0, 0] = 5.0


def test_instance_stats_examples():
    inst = TransportInstance([(0, 0), (4, 0)], [1, 1], [(1, 0)], [2], "l2")
    stats = instance_stats(inst)
    assert stats.spread == 4.0 and stats.diameter == 4.0 and stats.total_mass == 2
    two = TransportInstance([(0, 0)], [3], [(2, 5)], [3], "l1")
    assert instance_stats(two).spread == 1.0


def test_instance_stats_all_coincident():
    stats = instance_stats(TransportInstance([(1, 1)], [1], [(1, 1)], [1]))
    assert stats.all_coincident and stats.spread == 1.0


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
def test_instance_stats_brute_force(rng, metric):
    xy = rng.random((50, 2))
    xy[7] = xy[3]  # a duplicate must be skipped by the minimum
    inst = TransportInstance(xy[:25], np.ones(25, int), xy[25:], np.ones(25, int), metric)
    d = Metric.parse(metric).pairwise(xy, xy)
    positive = d[d > 0]
    stats = instance_stats(inst)
    assert stats.diameter == pytest.approx(d.max(), rel=1e-12)
    assert stats.min_positive_distance == pytest.approx(positive.min(), rel=1e-12)
    assert stats.spread == pytest.approx(d.max() / positive.min(), rel=1e-12)
    assert math.isfinite(stats.spread)
