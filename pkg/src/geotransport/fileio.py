"""Text formats for instances and plans.

Instance files::

    d 2
    metric l2
    r <x> <y> <supply>
    b <x> <y> <demand>

Plan files hold ``t <red> <blue> <amount>`` records followed by
``cost <value>``.  In both formats ``#`` starts a comment.
"""

from __future__ import annotations

import io
import math
import os
from pathlib import Path
from typing import TextIO

from .core import Metric, TransportInstance, TransportPlan, plan_cost
from .errors import InstanceError, ParseError


def _records(stream: TextIO):
    for lineno, raw in enumerate(stream, start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            yield lineno, text.split()


def _parse_int(tok: str, lineno: int, what: str) -> int:
    try:
        value = int(tok)
    except ValueError:
        raise ParseError(f"{what} must be an integer, got {tok!r}", lineno) from None
    return value


def _parse_float(tok: str, lineno: int, what: str) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise ParseError(f"{what} must be a number, got {tok!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} must be finite, got {tok!r}", lineno)
    return value


def parse_instance(stream: TextIO) -> TransportInstance:
    dim: int | None = None
    metric: Metric | None = None
    reds: list[tuple[tuple[float, ...], int]] = []
    blues: list[tuple[tuple[float, ...], int]] = []
    for lineno, toks in _records(stream):
        key = toks[0]
        if key == "d":
            if len(toks) != 2:
                raise ParseError("expected 'd <dimension>'", lineno)
            dim = _parse_int(toks[1], lineno, "dimension")
            if dim < 1:
                raise ParseError("dimension must be positive", lineno)
        elif key == "metric":
            if len(toks) != 2:
                raise ParseError("expected 'metric l1|l2|linf'", lineno)
            try:
                metric = Metric.parse(toks[1])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
        elif key in ("r", "b"):
            if dim is None:
                raise ParseError("point record before the 'd' header", lineno)
            if len(toks) != dim + 2:
                raise ParseError(f"expected {dim} coordinates and a weight", lineno)
            coords = tuple(_parse_float(t, lineno, "coordinate") for t in toks[1:-1])
            weight = _parse_int(toks[-1], lineno, "weight")
            if weight < 1:
                raise ParseError("weights must be positive integers", lineno)
            (reds if key == "r" else blues).append((coords, weight))
        else:
            raise ParseError(f"unknown record type {key!r}", lineno)
    if dim is None:
        raise ParseError("missing 'd' header")
    if metric is None:
        raise ParseError("missing 'metric' header")
    try:
        return TransportInstance.from_points(reds, blues, metric)
    except InstanceError as exc:
        raise ParseError(str(exc)) from None


def read_instance(path: str | os.PathLike) -> TransportInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh)


def format_instance(inst: TransportInstance) -> str:
    out = io.StringIO()
    out.write(f"d {inst.dim}\nmetric {inst.metric.value}\n")
    for xy, w in zip(inst.red_xy.tolist(), inst.red_supply.tolist()):
        out.write("r " + " ".join(repr(float(c)) for c in xy) + f" {w}\n")
    for xy, w in zip(inst.blue_xy.tolist(), inst.blue_demand.tolist()):
        out.write("b " + " ".join(repr(float(c)) for c in xy) + f" {w}\n")
    return out.getvalue()


def write_instance(inst: TransportInstance, path: str | os.PathLike) -> None:
    Path(path).write_text(format_instance(inst), encoding="utf-8")


def parse_plan(stream: TextIO) -> tuple[TransportPlan, float | None]:
    """Return the plan and the cost recorded in the file (if any)."""
    entries: list[tuple[int, int, int]] = []
    cost: float | None = None
    for lineno, toks in _records(stream):
        if toks[0] == "t":
            if len(toks) != 4:
                raise ParseError("expected 't <red> <blue> <amount>'", lineno)
            r, b, a = (_parse_int(t, lineno, "plan field") for t in toks[1:])
            if r < 0 or b < 0:
                raise ParseError("indices must be nonnegative", lineno)
            if a < 1:
                raise ParseError("amounts must be positive", lineno)
            entries.append((r, b, a))
        elif toks[0] == "cost":
            if len(toks) != 2:
                raise ParseError("expected 'cost <value>'", lineno)
            cost = _parse_float(toks[1], lineno, "cost")
        else:
            raise ParseError(f"unknown record type {toks[0]!r}", lineno)
    try:
        return TransportPlan.from_entries(entries), cost
    except InstanceError as exc:
        raise ParseError(str(exc)) from None


def read_plan(path: str | os.PathLike) -> tuple[TransportPlan, float | None]:
    with open(path, encoding="utf-8") as fh:
        return parse_plan(fh)


def format_plan(plan: TransportPlan, cost: float) -> str:
    lines = [f"t {r} {b} {a}" for r, b, a in plan.entries()]
    lines.append(f"cost {cost!r}")
    return "\n".join(lines) + "\n"


def write_plan(inst: TransportInstance, plan: TransportPlan, path: str | os.PathLike) -> float:
    cost = plan_cost(inst, plan)
    Path(path).write_text(format_plan(plan, cost), encoding="utf-8")
    return cost
