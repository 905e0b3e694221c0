import numpy as np
import pytest

from deformgeo.errors import NoFiberAction, Property3Violated, Property4Violated
from deformgeo.expr_dsl import compile_expr, parse
from deformgeo.fields import ExprField
from deformgeo.gauge_bundle import (
    ConnectionField,
    check_structure_equation,
    connection_from_deformation,
    covariance_defect,
    covariance_slope,
    covariant_generators,
    field_strength,
    fiber_fields,
    gauge_transform,
    generator_commutator_residual,
    lie_bracket,
    register_fiber_action,
    right_invariance_residual,
)
from deformgeo.lie_core import abelian, bch_chart_from_constants, from_expressions, sphere_rotation_group
from deformgeo.verify_oracle import FDConfig, fd_commutator, fd_gradient, max_abs_diff, oracle_field_strength

COORDS = ["x", "y"]
SO3 = sphere_rotation_group(1.0)
U1 = abelian(1)
GRID = np.array([[a, b] for a in np.linspace(-1, 1, 4) for b in np.linspace(-1, 1, 4)])

SO3_A = [["0.3*sin(y)", "x*y"], ["0.2 + 0.1*x", "x^2"], ["cos(x)", "0.1*y - 0.2*x*y"]]
U1_A = [["x*y^2 + sin(y)", "cos(x)*y"]]


def exprs_fn(sources, names):
    fs = [compile_expr(parse(s)) for s in sources]
    return lambda x, p: [f(dict(zip(names, list(x) + list(p)))) for f in fs]


# connections from deformations -----------------------------------------------------------

def test_connection_read_off():
    H = exprs_fn(["t1", "t2", "u - t1*(x*y) - t2*sin(x)"], ["x", "y", "t1", "t2", "u"])
    A = connection_from_deformation(H, 2, U1, GRID)
    for x in GRID:
        assert max_abs_diff(A(x), [[x[0] * x[1], np.sin(x[0])]]) <= 1e-14
        fd = -fd_gradient(lambda t: np.array(H(x, list(t) + [0.0]))[2:], np.zeros(2))
        assert max_abs_diff(A(x), fd) <= 1e-6


def test_connection_without_t_dependence_is_zero():
    H = exprs_fn(["t1", "t2", "u*(1 + 0.1*x)"], ["x", "y", "t1", "t2", "u"])
    with pytest.raises(Property4Violated):
        connection_from_deformation(H, 2, U1, GRID)
    H = exprs_fn(["t1", "t2", "u"], ["x", "y", "t1", "t2", "u"])
    A = connection_from_deformation(H, 2, U1, GRID)
    assert np.all(A([0.3, 0.2]) == 0.0)
    assert np.all(field_strength(A, [0.3, 0.2]) == 0.0)


def test_property3_violation():
    H = exprs_fn(["t1 + 0.1*u*t2", "t2", "u - t1"], ["x", "y", "t1", "t2", "u"])
    with pytest.raises(Property3Violated):
        connection_from_deformation(H, 2, U1, GRID)


def test_connection_derivatives_from_deformation():
    H = exprs_fn(["t1", "t2", "u - t1*x^2*y + 0.3*t1*t2*x"], ["x", "y", "t1", "t2", "u"])
    A = connection_from_deformation(H, 2, U1, GRID)
    F = field_strength(A, [0.5, 0.7])
    # F_xy = d_x A_y - d_y A_x with A = (x^2 y, 0)
    assert F[0, 0, 1] == pytest.approx(-0.25, abs=1e-14)


# field strength -------------------------------------------------------------------------------

def test_abelian_field_strength_is_a_curl():
    A = ConnectionField.from_expressions(U1_A, COORDS, U1)
    for x in GRID:
        F = field_strength(A, x)
        curl = -np.sin(x[0]) * x[1] - (2 * x[0] * x[1] + np.cos(x[1]))
        assert F[0, 0, 1] == pytest.approx(curl, abs=1e-14)
        assert F[0, 1, 0] == -F[0, 0, 1]


def test_constant_nonabelian_field_strength():
    a = np.array([[0.1, 0.4], [-0.2, 0.3], [0.5, 0.05]])
    A = ConnectionField.from_expressions(a.astype(float).tolist(), COORDS, SO3)
    F = field_strength(A, [0.1, 0.2])
    assert max_abs_diff(F, np.einsum("ijk,jm,kn->imn", SO3.constants, a, a)) <= 1e-15


def test_field_strength_matches_oracles():
    A = ConnectionField.from_expressions(SO3_A, COORDS, SO3)
    for x in GRID[::3]:
        F = field_strength(A, x)
        assert np.array_equal(F, -np.transpose(F, (0, 2, 1)))
        assert max_abs_diff(F, oracle_field_strength(A, SO3.constants, x)) <= 1e-6


def test_field_strength_from_generator_commutator():
    eps = 0.2
    A = ConnectionField.from_expressions([["0.2*(1 + y)", "0"], ["0", "0.2*x"], ["0", "0"]], COORDS, SO3)
    gens = covariant_generators(A)
    for z in ([0.1, 0.3, 0.2, -0.1, 0.4], [-0.5, 0.2, 1.0, 0.0, -0.3]):
        br = fd_commutator(gens.horizontal[0], gens.horizontal[1], z)
        assert np.max(np.abs(br[:2])) <= 1e-6
        V = np.array([X(z) for X in gens.vertical])
        assert max_abs_diff(br, field_strength(A, z[:2])[:, 0, 1] @ V) <= 1e-6


def test_structure_equation():
    for sources, group in ((SO3_A, SO3), (U1_A, U1)):
        A = ConnectionField.from_expressions(sources, COORDS, group)
        for x in GRID:
            assert check_structure_equation(A, x) <= 1e-10


# gauge transformations ------------------------------------------------------------------------

def test_constant_abelian_transform_is_trivial():
    A = ConnectionField.from_expressions(U1_A, COORDS, U1)
    A2 = gauge_transform(A, ExprField(["0.7"], COORDS), 0.1)
    for x in GRID[::5]:
        assert np.array_equal(A2(x), A(x))


def test_abelian_invariance():
    A = ConnectionField.from_expressions(U1_A, COORDS, U1)
    lam = ExprField(["x^2*y + exp(y/2)"], COORDS)
    A2 = gauge_transform(A, lam, 0.1)
    for x in GRID:
        dl = np.array([2 * x[0] * x[1], x[0] ** 2 + 0.5 * np.exp(x[1] / 2)])
        assert max_abs_diff(A2(x), A(x) - 0.1 * dl) <= 1e-14
        # equal up to rounding in the two curl evaluations
        assert max_abs_diff(field_strength(A2, x), field_strength(A, x)) <= 1e-12
    assert covariance_defect(A, lam, 0.05, GRID) <= 1e-12


def test_nonabelian_covariance_is_second_order():
    A = ConnectionField.from_expressions(SO3_A, COORDS, SO3)
    ups = ExprField(["sin(x)", "x*y", "0.5*y + 0.1"], COORDS)
    slope, defects = covariance_slope(A, ups, GRID, eps=(1e-2, 1e-3))
    assert 1.9 <= slope <= 2.1
    assert defects[0] > 0.0


# covariant generators --------------------------------------------------------------------------

def test_zero_connection_gives_coordinate_fields():
    A = ConnectionField.from_expressions([["0", "0"]] * 3, COORDS, SO3)
    gens = covariant_generators(A)
    z = [0.2, 0.1, 0.3, -0.4, 0.5]
    for X, D in zip(gens.horizontal, gens.coordinate):
        assert X(z) == D(z)


def test_abelian_generators_read_off_connection():
    A = ConnectionField.from_expressions(U1_A, COORDS, U1)
    gens = covariant_generators(A)
    z = [0.3, -0.6, 1.7]
    for mu in range(2):
        assert gens.horizontal[mu](z)[2] == pytest.approx(A(z[:2])[0, mu], abs=1e-15)
    assert gens.at(z).shape == (5, 3)


@pytest.mark.parametrize("sources, group", [(SO3_A, SO3), (U1_A, U1)])
def test_generator_commutator_and_right_invariance(sources, group):
    A = ConnectionField.from_expressions(sources, COORDS, group)
    rng = np.random.default_rng(3)
    for x in GRID[::3]:
        z = list(x) + list(rng.uniform(-0.5, 0.5, group.dim))
        assert generator_commutator_residual(A, z) <= 1e-6
        assert right_invariance_residual(A, z) <= 1e-6
        gens = covariant_generators(A)
        assert max_abs_diff(lie_bracket(gens.horizontal[0], gens.horizontal[1], z),
                            fd_commutator(gens.horizontal[0], gens.horizontal[1], z)) <= 1e-6


def test_fiber_action_registry():
    odd = bch_chart_from_constants(SO3.constants, kind="custom")
    with pytest.raises(NoFiberAction):
        covariant_generators(ConnectionField.from_expressions(SO3_A, COORDS, odd))
    with pytest.raises(NoFiberAction):
        fiber_fields(from_expressions(["a"], ["b"], ["a + b"]))
    register_fiber_action("custom", lambda F: fiber_fields(SO3))
    A = ConnectionField.from_expressions(SO3_A, COORDS, odd)
    assert generator_commutator_residual(A, [0.1, 0.2, 0.3, 0.1, -0.2]) <= 1e-6
