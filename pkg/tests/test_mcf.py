import numpy as np
import pytest

from geotransport import InfeasibleError, InstanceError, plan_cost
from geotransport.mcf import (
    Flow,
    FlowNetwork,
    Potentials,
    check_optimality,
    residual_arcs,
    solve,
    solve_detailed,
    solve_transport,
    transport_network,
)
from geotransport.generators import generate

from conftest import lp_optimum, random_instance, rel_gap


def _star() -> FlowNetwork:
    return FlowNetwork.from_arcs(3, [(0, 1, 1.0), (0, 2, 2.0)], [2, -1, -1])


def test_star_example():
    flow, y = solve(_star())
    assert flow.values.tolist() == [1, 1]
    assert flow.cost(_star()) == 3.0
    assert check_optimality(_star(), flow, y)


def test_zero_balances_give_zero_flow():
    net = FlowNetwork.from_arcs(3, [(0, 1, 1.0), (1, 2, 1.0)], [0, 0, 0])
    flow, _ = solve(net)
    assert not flow.values.any() and flow.cost(net) == 0


def test_infeasible_names_stranded_vertex():
    net = FlowNetwork.from_arcs(3, [(1, 2, 1.0)], [1, 0, -1])
    with pytest.raises(InfeasibleError) as info:
        solve(net)
    assert info.value.vertex == 0


def test_network_invariants():
    with pytest.raises(InstanceError):
        FlowNetwork.from_arcs(2, [(0, 0, 1.0)], [0, 0])
    with pytest.raises(InstanceError):
        FlowNetwork.from_arcs(2, [(0, 1, -1.0)], [1, -1])
    with pytest.raises(InstanceError):
        FlowNetwork.from_arcs(2, [(0, 1, 1.0)], [1, 0])


def test_eight_by_eight_matches_lp(rng):
    inst = generate(16, 9, "uniform", 8, "l2")
    assert inst.n_red == inst.n_blue == 8
    assert plan_cost(inst, solve_transport(inst)) == pytest.approx(lp_optimum(inst), rel=1e-9)


def test_random_networks_match_lp_and_certify(rng):
    for _ in range(200):
        inst = random_instance(rng, n_max=24)
        net = transport_network(inst)
        flow, y = solve(net)
        assert check_optimality(net, flow, y)
        assert rel_gap(flow.cost(net), lp_optimum(inst)) <= 1e-9


def test_perturbed_potential_is_reported(rng):
    inst = random_instance(rng, n_max=20)
    net = transport_network(inst)
    flow, y = solve(net)
    tol = 1e-9
    arc = int(np.flatnonzero(flow.values)[0])
    bumped = y.values.copy()
    bumped[net.tail[arc]] += 10 * tol
    report = check_optimality(net, flow, Potentials(bumped), tol)
    assert not report
    assert report.arc is not None


def test_suboptimal_flow_not_certified():
    net = FlowNetwork.from_arcs(4, [(0, 2, 1.0), (0, 3, 5.0), (1, 2, 5.0), (1, 3, 1.0)], [1, 1, -1, -1])
    bad = Flow(np.array([0, 1, 1, 0]))
    assert not check_optimality(net, bad, Potentials(np.zeros(4)))


def test_residual_arcs_definition():
    net = _star()
    zero = residual_arcs(net, Flow(np.zeros(2, dtype=np.int64)))
    assert all(a.forward for a in zero) and len(zero) == 2
    res = residual_arcs(net, Flow(np.array([3, 0])))
    rev = [a for a in res if not a.forward]
    assert len(rev) == 1
    assert (rev[0].tail, rev[0].head, rev[0].capacity, rev[0].cost) == (1, 0, 3.0, -1.0)


def test_residual_reverse_capacity_recount(rng):
    net = transport_network(random_instance(rng, n_max=30))
    values = rng.integers(0, 4, net.m)
    res = residual_arcs(net, Flow(values))
    assert sum(a.capacity for a in res if not a.forward) == values.sum()


def test_checked_run_reports_monotone_imbalance(rng):
    net = transport_network(random_instance(rng, n_max=30))
    flow, y, stats = solve_detailed(net, check=True)
    assert stats.imbalance_monotone
    assert stats.worst_reduced_cost >= -1e-9
    assert np.issubdtype(flow.values.dtype, np.integer)
