import io

import pytest

from geotransport import ParseError, TransportPlan
from geotransport.fileio import format_instance, format_plan, parse_instance, parse_plan
from geotransport.generators import generate

SAMPLE = """\
# two reds, one blue
d 2
metric linf
r 0 0 2
r 1.5 -2 1   # trailing comment
b 3 3 3
"""


def test_parse_sample():
    inst = parse_instance(io.StringIO(SAMPLE))
    assert inst.metric.value == "linf"
    assert inst.red_supply.tolist() == [2, 1]
    assert inst.blue_xy.tolist() == [[3.0, 3.0]]


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
def test_instance_round_trip(metric):
    inst = generate(25, 7, "clustered", 11, metric)
    assert parse_instance(io.StringIO(format_instance(inst))) == inst


def test_plan_round_trip():
    plan = TransportPlan.from_entries([(0, 1, 3), (1, 0, 2)])
    back, cost = parse_plan(io.StringIO(format_plan(plan, 1.25)))
    assert back == plan and cost == 1.25


@pytest.mark.parametrize(
    "text, line",
    [
        ("d 2\nmetric l2\nr 0 0 1\nb 1 x 1\n", 4),
        ("d 2\nmetric l7\n", 2),
        ("r 0 0 1\n", 1),
        ("d 2\nmetric l2\nr 0 0 0\nb 1 1 0\n", 3),
        ("d 2\nmetric l2\nr 0 0 1\nq 1 1 1\n", 4),
        ("d 2\nmetric l2\nr 0 1\n", 3),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        parse_instance(io.StringIO(text))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_unbalanced_instance_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_instance(io.StringIO("d 2\nmetric l2\nr 0 0 2\nb 1 1 1\n"))


def test_plan_parse_errors():
    with pytest.raises(ParseError) as info:
        parse_plan(io.StringIO("t 0 0 1\nt 0 1 0\n"))
    assert info.value.line == 2
