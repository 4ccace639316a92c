"""Seeded random instances for tests, benchmarks and the ``gen`` command."""

from __future__ import annotations

import enum
import math

import numpy as np

from .core import Metric, TransportInstance
from .errors import InstanceError


class Distribution(enum.Enum):
    UNIFORM = "uniform"
    CLUSTERED = "clustered"
    HIGH_SPREAD = "high-spread"

    @classmethod
    def parse(cls, name: "str | Distribution") -> "Distribution":
        if isinstance(name, Distribution):
            return name
        key = name.strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown distribution {name!r}")


def _shrink(weights: np.ndarray, amount: int, floor: int, rng: np.random.Generator) -> None:
    """Remove ``amount`` units in random order without going below ``floor``."""
    order = rng.permutation(len(weights))
    room = np.cumsum(weights[order] - floor)
    cut = int(np.searchsorted(room, amount))
    weights[order[:cut]] = floor
    before = int(room[cut - 1]) if cut else 0
    weights[order[cut]] -= amount - before


def _grow(weights: np.ndarray, amount: int, ceiling: int, rng: np.random.Generator) -> None:
    order = rng.permutation(len(weights))
    room = np.cumsum(ceiling - weights[order])
    cut = int(np.searchsorted(room, amount))
    weights[order[:cut]] = ceiling
    before = int(room[cut - 1]) if cut else 0
    weights[order[cut]] += amount - before


def balanced_weights(
    n_red: int, n_blue: int, max_weight: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Supplies and demands in ``[1, max_weight]`` with equal totals.

    Demands are drawn independently except the last one, which takes up the
    difference; when that falls outside the range, other weights are nudged
    in random order until it fits.
    """
    if n_red > n_blue * max_weight or n_blue > n_red * max_weight:
        raise InstanceError(
            f"{n_red} reds and {n_blue} blues cannot balance with weights in [1, {max_weight}]"
        )
    supply = rng.integers(1, max_weight + 1, n_red)
    demand = rng.integers(1, max_weight + 1, n_blue)
    total = int(supply.sum())
    if total > n_blue * max_weight:
        _shrink(supply, total - n_blue * max_weight, 1, rng)
        total = int(supply.sum())
    elif total < n_blue:
        _grow(supply, n_blue - total, max_weight, rng)
        total = int(supply.sum())
    last = total - int(demand[:-1].sum())
    if last > max_weight:
        _grow(demand[:-1], last - max_weight, max_weight, rng)
    elif last < 1:
        _shrink(demand[:-1], 1 - last, 1, rng)
    demand[-1] = total - int(demand[:-1].sum())
    return supply, demand


def _points(count: int, dist: Distribution, n: int, rng: np.random.Generator) -> np.ndarray:
    if dist is Distribution.UNIFORM:
        return rng.random((count, 2))
    if dist is Distribution.CLUSTERED:
        k = max(1, round(math.sqrt(n) / 2))
        centers = rng.random((k, 2))
        label = rng.integers(0, k, count)
        return centers[label] + rng.normal(0.0, 0.02, (count, 2))
    # radii spread geometrically over four orders of n around the origin
    scale = float(n) ** (-4.0 * rng.random(count))
    return rng.random((count, 2)) * scale[:, None]


def generate(
    n: int,
    max_weight: int,
    dist: Distribution | str = Distribution.UNIFORM,
    seed: int = 0,
    metric: Metric | str = Metric.L2,
) -> TransportInstance:
    """Random balanced instance with ``ceil(n/2)`` reds and ``floor(n/2)`` blues.

    ``high-spread`` instances pin one red at the origin, one blue at
    distance ``n**-4`` and the last point at ``(1, 1)``, so the spread is at
    least ``n**3``.
    """
    dist = Distribution.parse(dist)
    if n < 2:
        raise InstanceError("an instance needs at least two points")
    if max_weight < 1:
        raise InstanceError("the maximum weight must be at least 1")
    if dist is Distribution.HIGH_SPREAD and n < 3:
        raise InstanceError("a high-spread instance needs at least three points")
    rng = np.random.default_rng(seed)
    n_red = (n + 1) // 2
    n_blue = n - n_red
    supply, demand = balanced_weights(n_red, n_blue, max_weight, rng)
    red_xy = _points(n_red, dist, n, rng)
    blue_xy = _points(n_blue, dist, n, rng)
    if dist is Distribution.HIGH_SPREAD:
        red_xy[0] = (0.0, 0.0)
        blue_xy[0] = (float(n) ** -4.0, 0.0)
        if n_red > 1:
            red_xy[-1] = (1.0, 1.0)
        else:
            blue_xy[-1] = (1.0, 1.0)
    return TransportInstance(red_xy, supply, blue_xy, demand, metric)
