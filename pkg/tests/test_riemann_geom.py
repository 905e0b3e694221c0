import numpy as np
import pytest

from conftest import POLAR_BOX, SPHERE_BOX, polar_vierbein, sphere_vierbein
from deformgeo.deformed_group import ChartDomain
from deformgeo.errors import ChartExit, DegenerateVierbein
from deformgeo.fields import ExprField
from deformgeo.riemann_geom import (
    Curve,
    VierbeinField,
    anholonomy,
    anholonomy_latin,
    bianchi_residual,
    christoffel,
    christoffel_field,
    covariant_derivative,
    flat_metric,
    gaussian_curvature,
    holonomy_defect,
    holonomy_prediction,
    induced_point,
    metric_compat_gamma,
    metric_compatibility,
    metric_field,
    metric_from_vierbein,
    parallel_transport,
    riemann_tensor,
    scalar_curvature,
    vierbein_from_metric,
    vierbein_gauge_transform,
)
from deformgeo.verify_oracle import FDConfig, fd_gradient, max_abs_diff, oracle_christoffel, oracle_riemann

FLAT = VierbeinField.from_expressions([["1", "0"], ["0", "1"]], ["x", "y"])


def plain(g):
    return lambda y: np.asarray(g(list(y)), dtype=float)


def sphere_gamma_closed(th):
    G = np.zeros((2, 2, 2))
    G[0, 1, 1] = -np.sin(th) * np.cos(th)
    G[1, 0, 1] = G[1, 1, 0] = np.cos(th) / np.sin(th)
    return G


# metric -----------------------------------------------------------------------------

def test_metric_examples():
    g, ginv = metric_from_vierbein(FLAT, [0.3, 0.2])
    assert np.array_equal(g, np.eye(2)) and np.array_equal(ginv, np.eye(2))
    g, _ = metric_from_vierbein(polar_vierbein(), [1.5, 0.2])
    assert g == pytest.approx(np.diag([1.0, 2.25]), abs=1e-15)
    R, th = 2.0, 1.1
    g, ginv = metric_from_vierbein(sphere_vierbein(R), [th, 0.3])
    assert g == pytest.approx(np.diag([R**2, R**2 * np.sin(th) ** 2]), abs=1e-14)
    assert np.array_equal(g, g.T)
    assert max_abs_diff(g @ ginv, np.eye(2)) <= 1e-12


def test_vierbein_inverse_and_degeneracy():
    vb = sphere_vierbein(2.0)
    for x in SPHERE_BOX.grid_points():
        assert max_abs_diff(vb.matrix(x) @ vb.inverse(x), np.eye(2)) <= 1e-12
    with pytest.raises(DegenerateVierbein):
        polar_vierbein().matrix([0.0, 1.0])


def test_lorentzian_signature():
    assert np.array_equal(flat_metric(3, "lorentzian"), np.diag([-1.0, 1.0, 1.0]))
    vb = VierbeinField.from_expressions([["1", "0"], ["0", "exp(t)"]], ["t", "x"], signature="lorentzian")
    g, _ = metric_from_vierbein(vb, [0.5, 0.0])
    assert g == pytest.approx(np.diag([-1.0, np.exp(1.0)]))
    assert max_abs_diff(metric_compat_gamma(vb, [0.5, 0.1]), christoffel(metric_field(vb), [0.5, 0.1])) <= 1e-12


def test_cholesky_vierbein_reproduces_metric():
    g = ExprField([["1 + x^2", "0.3*x*y"], ["0.3*x*y", "2 + sin(y)"]], ["x", "y"])
    vb = vierbein_from_metric(g)
    for x in ([0.2, 0.4], [-0.7, 1.1]):
        assert max_abs_diff(metric_from_vierbein(vb, x)[0], g(x)) <= 1e-14
        assert max_abs_diff(christoffel(metric_field(vb), x), christoffel(g, x)) <= 1e-12


# Christoffel --------------------------------------------------------------------------

def test_flat_christoffel_vanishes():
    assert np.all(christoffel(metric_field(FLAT), [0.1, 0.2]) == 0.0)


def test_polar_christoffel():
    g = metric_field(polar_vierbein())
    for x in POLAR_BOX.grid_points()[::4]:
        G = christoffel(g, x)
        expected = np.zeros((2, 2, 2))
        expected[0, 1, 1] = -x[0]
        expected[1, 0, 1] = expected[1, 1, 0] = 1.0 / x[0]
        assert max_abs_diff(G, expected) <= 1e-14
        assert max_abs_diff(G, oracle_christoffel(plain(g), x)) <= 1e-6
        assert np.array_equal(G, np.transpose(G, (0, 2, 1)))


def test_sphere_christoffel(sphere):
    g = metric_field(sphere)
    for x in SPHERE_BOX.grid_points()[::3]:
        assert max_abs_diff(christoffel(g, x), sphere_gamma_closed(x[0])) <= 1e-13
        assert max_abs_diff(christoffel(g, x), oracle_christoffel(plain(g), x)) <= 1e-6


def test_metric_compat_gamma_equals_christoffel(sphere, polar):
    assert np.all(np.abs(metric_compat_gamma(FLAT, [0.1, 0.2])) <= 1e-15)
    assert metric_compat_gamma(polar, [1.7, 0.3])[0, 1, 1] == pytest.approx(-1.7, abs=1e-12)
    for vb, box in ((sphere, SPHERE_BOX), (polar, POLAR_BOX)):
        g = metric_field(vb)
        for x in box.grid_points():
            assert max_abs_diff(metric_compat_gamma(vb, x), christoffel(g, x)) <= 1e-9


def test_metric_compatibility(sphere, sphere_gamma):
    g = metric_field(sphere)
    for x in SPHERE_BOX.grid_points():
        assert np.max(np.abs(metric_compatibility(g, sphere_gamma, x))) <= 1e-9


# anholonomy ------------------------------------------------------------------------------

def test_anholonomy(polar, sphere):
    const = VierbeinField.from_expressions([["2", "1"], ["0", "3"]], ["x", "y"])
    assert np.all(anholonomy(const, [0.1, 0.2]) == 0.0)
    F = anholonomy(polar, [1.2, 0.4])
    assert F[1, 0, 1] == -1.0 and F[1, 1, 0] == 1.0
    x = [1.0, 0.3]
    fd = np.transpose(fd_gradient(plain(sphere.h), x), (0, 2, 1))
    assert max_abs_diff(anholonomy(sphere, x), -(fd - np.transpose(fd, (0, 2, 1)))) <= 1e-8
    hinv = sphere.inverse(x)
    assert max_abs_diff(anholonomy_latin(sphere, x),
                        np.einsum("nuv,up,vq->npq", anholonomy(sphere, x), hinv, hinv)) <= 1e-14


# curvature -----------------------------------------------------------------------------

def test_flat_polar_riemann_vanishes(polar):
    gam = christoffel_field(metric_field(polar))
    for x in POLAR_BOX.grid_points():
        assert np.max(np.abs(riemann_tensor(gam, x))) <= 1e-9


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_sphere_gaussian_curvature(R):
    vb = sphere_vierbein(R)
    g = metric_field(vb)
    for x in SPHERE_BOX.grid_points()[::5]:
        assert gaussian_curvature(g, x) == pytest.approx(1.0 / R**2, abs=1e-6)
        assert scalar_curvature(g, x) == pytest.approx(2.0 / R**2, abs=1e-6)


def test_riemann_structure_and_oracle(sphere, sphere_gamma):
    g = metric_field(sphere)
    for x in SPHERE_BOX.grid_points()[::6]:
        R = riemann_tensor(sphere_gamma, x)
        assert np.array_equal(R, -np.transpose(R, (0, 1, 3, 2)))
        assert bianchi_residual(R) <= 1e-8
        assert max_abs_diff(R, oracle_riemann(plain(g), x)) <= 1e-4


def test_covariant_derivative(polar):
    flat_gamma = christoffel_field(metric_field(FLAT))
    tau = ExprField(["0.5", "-2"], ["x", "y"])
    assert np.all(covariant_derivative(tau, flat_gamma, [0.2, 0.1]) == 0.0)
    radial = ExprField(["1", "0"], ["r", "th"])
    gam = christoffel_field(metric_field(polar))
    nab = covariant_derivative(radial, gam, [1.6, 0.5])
    assert nab[1, 1] == pytest.approx(1 / 1.6, abs=1e-15)


# transport --------------------------------------------------------------------------------

def test_flat_transport_is_trivial():
    gam = christoffel_field(metric_field(FLAT))
    curve = Curve.from_expressions(["0.3*cos(5*s)", "s^2 - 0.2"], steps=100)
    res = parallel_transport([0.4, -1.0], curve, gam)
    assert max_abs_diff(res.tau, [0.4, -1.0]) <= 1e-12
    assert res.log.shape == (101, 5)


def test_transport_preserves_norm(sphere, sphere_gamma):
    g = metric_field(sphere)
    curve = Curve.from_expressions(["1.2 + 0.5*sin(3*s)", "2*s"], steps=200)
    res = parallel_transport([0.3, 0.7], curve, sphere_gamma)
    norms = [row[3:] @ g(list(row[1:3])) @ row[3:] for row in res.log]
    assert np.ptp(norms) <= 1e-8


def frame_angle(vb, x, tau):
    e = vb.matrix(x) @ tau
    return np.arctan2(e[1], e[0])


def test_latitude_rotation_angle():
    vb = sphere_vierbein(1.0)
    gam = christoffel_field(metric_field(vb))
    for th0 in (0.7, 1.0, 1.3):
        path = [f"{th0}", "6.283185307179586*s"]
        angles = []
        for steps in (200, 400):
            res = parallel_transport([1.0, 0.0], Curve.from_expressions(path, steps=steps), gam)
            turn = frame_angle(vb, res.end, res.tau) - frame_angle(vb, [th0, 0.0], [1.0, 0.0])
            angles.append(turn)
        # step halving: the RK4 answer has converged
        assert abs(angles[0] - angles[1]) <= 1e-6
        # the frame turns by 2 pi cos(th0) against the orientation of (e_th, e_ph)
        rotation = np.mod(-angles[1], 2 * np.pi)
        assert rotation == pytest.approx(np.mod(2 * np.pi * np.cos(th0), 2 * np.pi), abs=1e-5)


def test_chart_exit(sphere_gamma):
    box = ChartDomain.box(["th", "ph"], [0.6, 0.0], [2.5, 3.0], 3)
    with pytest.raises(ChartExit):
        parallel_transport([1.0, 0.0], Curve.segment([1.0, 1.0], [1.0, 5.0]), sphere_gamma, box)


def test_holonomy_flat():
    gam = christoffel_field(metric_field(FLAT))
    assert np.max(np.abs(holonomy_defect([1.0, 0.3], [0.1, 0.1], (0, 1), 0.1, gam))) <= 1e-10


def test_holonomy_sphere_equator():
    vb = sphere_vierbein(1.0)
    gam = christoffel_field(metric_field(vb))
    x = [np.pi / 2, 0.5]
    tau = np.array([0.3, 1.0])
    eps = np.array([0.02, 0.01, 0.005])
    d = [holonomy_defect(tau, x, (0, 1), e, gam) for e in eps]
    s = [di / e**2 for di, e in zip(d, eps)]
    r1 = [2 * s[1] - s[0], 2 * s[2] - s[1]]
    best = (4 * r1[1] - r1[0]) / 3
    pred = holonomy_prediction(riemann_tensor(gam, x), tau, (0, 1), 1.0)
    assert np.linalg.norm(best - pred) <= 0.02 * np.linalg.norm(pred)
    slope = np.polyfit(np.log(eps), np.log([np.linalg.norm(v) for v in d]), 1)[0]
    assert 1.9 <= slope <= 2.1


# general covariance of the vierbein ------------------------------------------------------

def test_constant_translation_leaves_flat_vierbein():
    t = ExprField(["0.3", "-0.1"], ["x", "y"])
    vb2 = vierbein_gauge_transform(FLAT, t, 0.05)
    assert np.array_equal(vb2.matrix([0.2, 0.4]), np.eye(2))


def test_vierbein_transform_terms(sphere):
    t = ExprField(["0.2*sin(ph)", "th*cos(ph)"], ["th", "ph"])
    eps = 0.03
    vb2 = vierbein_gauge_transform(sphere, t, eps)
    for x in SPHERE_BOX.grid_points()[::4]:
        F = anholonomy_latin(sphere, x)
        rot = np.einsum("mnp,nu,p->mu", F, sphere.matrix(x), t(x))
        dt = fd_gradient(plain(t), x)
        assert max_abs_diff(vb2.matrix(x), sphere.matrix(x) - eps * (rot + dt)) <= 1e-9


def test_scalar_curvature_covariance_slope():
    vb = VierbeinField.from_expressions([["1", "0"], ["0", "1 + 0.5*x^2 + 0.2*x*y"]], ["x", "y"])
    t = ExprField(["0.3*y", "0.2*x - 0.1*y^2"], ["x", "y"])
    x = np.array([0.4, 0.3])
    defects = []
    for eps in (1e-2, 5e-3):
        vb2 = vierbein_gauge_transform(vb, t, eps)
        K2 = gaussian_curvature(metric_field(vb2), x)
        K1 = gaussian_curvature(metric_field(vb), induced_point(vb, t, eps, x))
        defects.append(abs(K2 - K1))
    slope = np.log(defects[0] / defects[1]) / np.log(2.0)
    assert 1.8 <= slope <= 2.2
