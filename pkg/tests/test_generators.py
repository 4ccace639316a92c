import numpy as np
import pytest

from geotransport import InstanceError, instance_stats
from geotransport.generators import Distribution, balanced_weights, generate


def test_two_points_balance():
    inst = generate(2, 5, "uniform", 0)
    assert inst.n_red == inst.n_blue == 1
    assert inst.red_supply.tolist() == inst.blue_demand.tolist()
    assert 1 <= inst.red_supply[0] <= 5


@pytest.mark.parametrize("dist", list(Distribution))
def test_same_seed_same_instance(dist):
    assert generate(31, 9, dist, 123) == generate(31, 9, dist, 123)
    assert generate(31, 9, dist, 123) != generate(31, 9, dist, 124)


@pytest.mark.parametrize("n", [3, 10, 57, 200])
def test_high_spread_reaches_cubic_spread(n):
    inst = generate(n, 4, "high-spread", n)
    assert instance_stats(inst).spread >= n**3 * (1 - 1e-9)


def test_balanced_weights_in_range():
    rng = np.random.default_rng(4)
    for _ in range(300):
        nr, nb, u = (int(v) for v in rng.integers(1, 30, 3))
        if nr > nb * u or nb > nr * u:
            continue
        supply, demand = balanced_weights(nr, nb, u, rng)
        assert supply.sum() == demand.sum()
        assert supply.min() >= 1 and demand.min() >= 1
        assert supply.max() <= u and demand.max() <= u


def test_unbalanceable_raises():
    with pytest.raises(InstanceError):
        generate(5, 1, "uniform", 0)
    with pytest.raises(InstanceError):
        generate(1, 3, "uniform", 0)
    with pytest.raises(InstanceError):
        generate(2, 3, "high-spread", 0)


def test_unknown_distribution():
    with pytest.raises(ValueError):
        generate(10, 3, "gaussian", 0)
