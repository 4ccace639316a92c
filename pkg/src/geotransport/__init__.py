"""Geometric transportation solvers in the plane."""

from .core import (
    InstanceStats,
    Metric,
    PlanReport,
    TransportInstance,
    TransportPlan,
    instance_stats,
    metric_dist,
    plan_cost,
    verify_plan,
)
from .errors import InfeasibleError, InstanceError, InvariantViolation, ParseError

__version__ = "0.1.0"

__all__ = [
    "InfeasibleError",
    "InstanceError",
    "InstanceStats",
    "InvariantViolation",
    "Metric",
    "ParseError",
    "PlanReport",
    "TransportInstance",
    "TransportPlan",
    "instance_stats",
    "metric_dist",
    "plan_cost",
    "verify_plan",
]
