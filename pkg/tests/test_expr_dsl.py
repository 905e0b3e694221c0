import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformgeo.errors import DomainError, ExprSyntaxError, OrderTooHigh, UnknownFunction, UnknownVariable
from deformgeo.expr_dsl import (
    FUNCTIONS,
    BinOp,
    Call,
    Neg,
    Num,
    Pow,
    Var,
    eval_jet,
    eval_scalar,
    parse,
    to_source,
    variables,
)

# ASTs ----------------------------------------------------------------------------

names = st.sampled_from(["x", "y", "z1", "alpha"])
literals = st.floats(min_value=0, max_value=1e6, allow_nan=False).map(Num)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(children, st.integers(-4, 6)).map(lambda t: Pow(*t)),
        st.tuples(st.sampled_from(FUNCTIONS), children).map(lambda t: Call(*t)),
    )


asts = st.recursive(st.one_of(literals, names.map(Var)), _extend, max_leaves=20)


def depth(e):
    if isinstance(e, (Num, Var)):
        return 0
    if isinstance(e, (Neg, Pow)):
        return 1 + depth(e.operand if isinstance(e, Neg) else e.base)
    if isinstance(e, Call):
        return 1 + depth(e.arg)
    return 1 + max(depth(e.left), depth(e.right))


@settings(max_examples=300, deadline=None)
@given(asts.filter(lambda e: depth(e) <= 6))
def test_print_parse_round_trip(e):
    assert parse(to_source(e)) == e


def test_parse_shapes():
    assert parse("x1 + 0") == BinOp("+", Var("x1"), Num(0.0))
    assert parse("-x^2") == Neg(Pow(Var("x"), 2))
    assert parse("a - b - c") == BinOp("-", BinOp("-", Var("a"), Var("b")), Var("c"))
    assert parse("a / b * c") == BinOp("*", BinOp("/", Var("a"), Var("b")), Var("c"))
    assert parse("x**3") == parse("x^3")
    assert parse("x^-2") == Pow(Var("x"), -2)
    assert variables(parse("sin(x*y) + R")) == {"x", "y", "R"}


def test_simple_evaluation():
    assert eval_scalar(parse("x1 + 0"), {"x1": 5.0}) == 5.0
    assert eval_scalar(parse("2*3+1"), {}) == 7.0
    assert eval_scalar(parse("exp(0)"), {}) == 1.0
    assert eval_scalar(parse("-2^2"), {}) == -4.0


@given(st.floats(-50, 50))
def test_pythagoras(x):
    assert abs(eval_scalar(parse("sin(x)^2 + cos(x)^2"), {"x": x}) - 1.0) <= 1e-12


@pytest.mark.parametrize("source", ["log(x)", "sqrt(x)", "1/(x+1)"])
def test_domain_errors(source):
    with pytest.raises(DomainError):
        eval_scalar(parse(source), {"x": -1.0})


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse("1 + (x * ")
    err = info.value
    assert (err.line, err.column) == (1, 10)
    assert "'('" in err.expected and "name" in err.expected
    with pytest.raises(ExprSyntaxError) as info:
        parse("x +\n  * y")
    assert (info.value.line, info.value.column) == (2, 3)
    with pytest.raises(ExprSyntaxError):
        parse("x^1.5")


def test_unknown_function_and_variable():
    with pytest.raises(UnknownFunction):
        parse("gamma(x)")
    e = parse("x + y")
    with pytest.raises(UnknownVariable):
        eval_scalar(e, {"x": 1.0})


def test_geometric_series_jet():
    j = eval_jet(parse("1/(1+x)"), {"x": 0.0}, ["x"], 3)
    assert [j.partial(*([0] * k)) if k else j.value for k in range(4)] == pytest.approx([1, -1, 2, -6])


def test_bilinear_and_monomial():
    j = eval_jet(parse("x*y"), {"x": 2.0, "y": 3.0}, ["x", "y"], 2)
    assert (j.partial(0), j.partial(1), j.partial(0, 1), j.partial(0, 0)) == (3.0, 2.0, 1.0, 0.0)
    j = eval_jet(parse("x^3"), {"x": 2.0}, ["x"], 3)
    assert [j.value, j.partial(0), j.partial(0, 0), j.partial(0, 0, 0)] == [8.0, 12.0, 12.0, 6.0]


def test_mixed_partial_against_fd():
    e = parse("sin(x*y)")
    j = eval_jet(e, {"x": 0.3, "y": 0.7}, ["x", "y"], 2)
    h = 1e-4
    f = lambda x, y: eval_scalar(e, {"x": x, "y": y})
    fd = (f(0.3 + h, 0.7 + h) - f(0.3 + h, 0.7 - h) - f(0.3 - h, 0.7 + h) + f(0.3 - h, 0.7 - h)) / (4 * h * h)
    assert abs(j.partial(0, 1) - fd) <= 1e-6


def test_order_limits():
    with pytest.raises(OrderTooHigh):
        eval_jet(parse("x"), {"x": 1.0}, ["x"], 4)
    with pytest.raises(DomainError):
        eval_jet(parse("1/x"), {"x": 0.0}, ["x"], 2)


# jets against finite differences of the scalar evaluator ----------------------------

smooth = [
    "sin(x)*exp(y/3) + x^2*y",
    "log(2 + x^2 + y^2) * cos(y)",
    "sqrt(3 + x*y) / (2 + tanh(x))",
    "cosh(x - y)^2 - sinh(x*y)",
    "tan(0.3*x + 0.2*y) + x^-1",
]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(smooth), st.floats(0.4, 1.2), st.floats(-1.0, 1.0))
def test_jet_partials_match_fd(source, x, y):
    e = parse(source)
    f = lambda p: eval_scalar(e, {"x": p[0], "y": p[1]})
    j = eval_jet(e, {"x": x, "y": y}, ["x", "y"], 3)
    h = 1e-4
    p = np.array([x, y])
    E = np.eye(2) * h

    def close(a, b, rel):
        return abs(a - b) <= rel * max(1.0, abs(b))

    for i in range(2):
        d1 = (f(p + E[i]) - f(p - E[i])) / (2 * h)
        assert close(j.partial(i), d1, 1e-5)
        for k in range(2):
            d2 = (f(p + E[i] + E[k]) - f(p + E[i] - E[k]) - f(p - E[i] + E[k]) + f(p - E[i] - E[k])) / (4 * h * h)
            assert close(j.partial(i, k), d2, 1e-5)
    hh = 1e-3
    E3 = np.eye(2) * hh
    for i in range(2):
        d3 = (f(p + 2 * E3[i]) - 2 * f(p + E3[i]) + 2 * f(p - E3[i]) - f(p - 2 * E3[i])) / (2 * hh**3)
        assert close(j.partial(i, i, i), d3, 1e-3)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_multi_index_symmetry(x, y, z):
    j = eval_jet(parse("exp(x*y) * sin(y + 2*z) + x*y*z"), {"x": x, "y": y, "z": z}, ["x", "y", "z"], 3)
    assert j.partial(0, 1, 2) == j.partial(2, 0, 1) == j.partial(1, 2, 0)
    assert j.partial(0, 1) == j.partial(1, 0)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_leibniz_rule(x, y):
    a = eval_jet(parse("sin(x) + y^2"), {"x": x, "y": y}, ["x", "y"], 2)
    b = eval_jet(parse("exp(x*y)"), {"x": x, "y": y}, ["x", "y"], 2)
    p = a * b
    expect = a.partial(0, 1) * b.value + a.partial(0) * b.partial(1) + a.partial(1) * b.partial(0) + a.value * b.partial(0, 1)
    assert math.isclose(p.partial(0, 1), expect, rel_tol=1e-12, abs_tol=1e-12)
