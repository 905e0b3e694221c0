"""Check batteries behind the command-line subcommands.

Every check compares a jet-path quantity with an independent witness (a
finite-difference oracle, a second formula, or a closed form) over seeded
random chart points and records the worst residual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import __version__
from .builders import GaugeSetup, RiemannSetup, build_deformation, build_gauge, build_riemann
from .deformed_group import (
    DeformedGroup,
    commutator_residual,
    compose_deformed,
    curvature_from_rho,
    expansion_coeffs,
    generators,
    structure_functions,
    validate_deformation,
)
from .errors import ConditioningWarning, DeformGeoError
from .estimators import (
    ChristoffelTransformer,
    CurvatureCoefficientTransformer,
    FieldStrengthTransformer,
    GeneratorTransformer,
    MetricTransformer,
    RiemannTransformer,
    ScalarCurvatureTransformer,
    StructureFunctionTransformer,
)
from .gauge_bundle import (
    check_structure_equation,
    covariance_defect,
    covariance_slope,
    covariant_generators,
    field_strength,
    generator_commutator_residual,
    right_invariance_residual,
)
from .grid import TensorGrid, component_names
from .manifest import Manifest, VerifySettings
from .riemann_geom import (
    anholonomy,
    anholonomy_latin,
    bianchi_residual,
    christoffel,
    frame_rho,
    frame_to_coordinate_riemann,
    gaussian_curvature,
    holonomy_defect,
    holonomy_prediction,
    metric_compat_gamma,
    metric_compatibility,
    metric_from_vierbein,
    parallel_transport,
    riemann_tensor,
)
from .verify_oracle import (
    FDConfig,
    fd_anholonomy,
    fd_commutator,
    fd_expansion_from_composition,
    fd_generators,
    fd_gradient,
    max_abs_diff,
    oracle_christoffel,
    oracle_field_strength,
    oracle_gaussian_curvature,
    oracle_riemann,
)


@dataclass
class Check:
    name: str
    max_residual: float
    tolerance: float
    points: int

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "max_residual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
            "points": int(self.points),
        }


class Report:
    def __init__(self, settings: VerifySettings):
        self.settings = settings
        self.checks: list[Check] = []

    def add(self, name, residual, points, tol_name=None):
        c = Check(name, float(residual), self.settings.tol(tol_name or name), points)
        self.checks.append(c)
        return c

    def sweep(self, name, points, fn, tol_name=None):
        """Worst value of fn(x) over the points; errors carry the offending point."""
        worst = 0.0
        for x in points:
            try:
                worst = max(worst, float(fn(x)))
            except DeformGeoError as exc:
                if exc.point is None:
                    exc.point = [float(v) for v in x]
                raise
        return self.add(name, worst, len(points), tol_name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"checks": [c.as_dict() for c in self.checks], "seed": self.settings.seed,
                "pass": self.passed}


def sample_points(m: Manifest, settings: VerifySettings) -> np.ndarray:
    rng = np.random.default_rng(settings.seed)
    return m.domain.random_points(rng, settings.samples)


def _metadata(m: Manifest, settings: VerifySettings | None = None) -> dict:
    meta = {"manifest_sha256": m.sha256, "tool_version": __version__}
    if settings is not None:
        meta["seed"] = settings.seed
    return meta


def tensor_grid(name, estimator, m: Manifest, points=None, shape=None, meta=None) -> TensorGrid:
    pts = m.domain.grid_points() if points is None else points
    shape = list(m.domain.resolution) if shape is None else shape
    estimator.fit(pts)
    vals = estimator.transform(pts)
    return TensorGrid(name, list(m.coords), shape, list(estimator.index_labels),
                      list(estimator.get_feature_names_out()), pts, vals, meta or _metadata(m))


# construction ------------------------------------------------------------------------

def build(m: Manifest):
    """Build the task object and validate it on the manifest grid."""
    grid = m.domain.grid_points()
    if m.task == "riemann":
        setup = build_riemann(m)
        validate_deformation(setup.group, grid)
        for x in grid:
            try:
                metric_from_vierbein(setup.vierbein, x)
            except DeformGeoError as exc:
                exc.point = [float(v) for v in x]
                raise
        return setup
    if m.task == "deformation":
        D = build_deformation(m)
        validate_deformation(D, grid)
        return D
    setup = build_gauge(m)
    for x in grid:
        setup.connection(x)
    return setup


def _plain_metric(setup: RiemannSetup):
    """Metric as a plain float map (no jets) for the oracle."""
    vb = setup.vierbein
    if getattr(vb.h, "constants", None) is not None:
        return lambda x: (lambda h: h.T @ vb.eta @ h)(np.asarray(vb.h(list(x)), dtype=float))
    return lambda x: np.asarray(setup.metric(list(x)), dtype=float)


def _plain_vierbein(setup: RiemannSetup):
    return lambda x: np.asarray(setup.vierbein.h(list(x)), dtype=float)


# group checks ----------------------------------------------------------------------------

def _group_checks(rep: Report, D: DeformedGroup, points, fd: FDConfig):
    rep.sweep("commutator", points, lambda x: commutator_residual(D, x))

    def product(x, g, gp):
        return np.array(D.product([float(v) for v in x], [float(v) for v in g],
                                  [float(v) for v in gp]), dtype=float)

    cache = {}

    def both(x):
        key = tuple(x)
        if key not in cache:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConditioningWarning)
                cache[key] = (expansion_coeffs(D, x), fd_expansion_from_composition(product, D.dim, x, fd))
        return cache[key]

    rep.sweep("gamma_fd", points, lambda x: max_abs_diff(both(x)[0][0], both(x)[1][0]))
    rep.sweep("rho_fd", points, lambda x: max_abs_diff(both(x)[0][1], both(x)[1][1]))
    rep.sweep("xi_fd", points, lambda x: max_abs_diff(
        generators(D, x)[0], fd_generators(lambda y, g: D.act(list(y), list(g)), x, D.dim, fd)))
    return both


def _riemann_checks(rep: Report, setup: RiemannSetup, points, fd: FDConfig):
    vb, g, gam = setup.vierbein, setup.metric, setup.christoffel
    n = vb.ncoords
    D = setup.group
    plain_g = _plain_metric(setup)
    eye = np.eye(n)
    rep.sweep("vierbein_inverse", points, lambda x: max_abs_diff(vb.matrix(x) @ vb.inverse(x), eye))
    rep.sweep("metric_inverse", points, lambda x: (lambda gg: max(
        max_abs_diff(gg[0] @ gg[1], eye), max_abs_diff(gg[0], gg[0].T)))(metric_from_vierbein(vb, x)))
    rep.sweep("christoffel_fd", points, lambda x: max_abs_diff(christoffel(g, x),
                                                               oracle_christoffel(plain_g, x, fd)))
    rep.sweep("christoffel_equivalence", points,
              lambda x: max_abs_diff(metric_compat_gamma(vb, x), christoffel(g, x)))
    if setup.supplied_gamma is not None:
        rep.sweep("supplied_christoffel", points,
                  lambda x: max_abs_diff(setup.supplied_gamma(list(x)), christoffel(g, x)),
                  "christoffel_equivalence")
    rep.sweep("metric_compatibility", points,
              lambda x: np.max(np.abs(metric_compatibility(g, gam, x))))
    rep.sweep("riemann_fd", points, lambda x: max_abs_diff(riemann_tensor(gam, x),
                                                           oracle_riemann(plain_g, x, fd)))
    rep.sweep("bianchi", points, lambda x: bianchi_residual(riemann_tensor(gam, x)))
    rep.sweep("structure_vs_anholonomy", points,
              lambda x: max_abs_diff(structure_functions(D, x), anholonomy_latin(vb, x)))
    rep.sweep("anholonomy_fd", points, lambda x: max_abs_diff(
        anholonomy(vb, x), fd_anholonomy(_plain_vierbein(setup), x, fd)))
    both = _group_checks(rep, D, points, fd)

    def group_curvature(x):
        R_group = frame_to_coordinate_riemann(vb, curvature_from_rho(both(x)[0][1]), x)
        return max_abs_diff(R_group, riemann_tensor(gam, x))

    rep.sweep("curvature_equivalence", points, group_curvature)
    rep.sweep("rho_assembly", points, lambda x: max_abs_diff(
        both(x)[0][1], frame_rho(vb, setup.gamma_for_group, setup.delta, x)))
    if n == 2:
        ref = setup.expected_K
        if ref is not None:
            rep.sweep("gaussian_curvature", points, lambda x: abs(gaussian_curvature(g, x) - ref))
            rep.sweep("gaussian_curvature_fd", points,
                      lambda x: abs(oracle_gaussian_curvature(plain_g, x, fd) - ref))
        else:
            rep.sweep("gaussian_curvature_fd", points, lambda x: abs(
                oracle_gaussian_curvature(plain_g, x, fd) - gaussian_curvature(g, x)))
    transport_checks(rep, setup, emit_logs=False)


def transport_checks(rep: Report, setup: RiemannSetup, emit_logs=True):
    """Norm preservation along each curve and loop-defect checks; returns log grids."""
    logs = []
    g = setup.metric
    for spec in setup.transports:
        res = parallel_transport(spec.tau0, spec.curve, setup.christoffel, setup.group.domain)
        n = len(spec.tau0)
        norms = []
        for row in res.log:
            x, tau = row[1:1 + n], row[1 + n:]
            G = np.asarray(g(list(x)), dtype=float)
            norms.append(tau @ G @ tau)
        rep.add(f"transport_norm[{spec.label}]", np.max(np.abs(np.array(norms) - norms[0])),
                len(norms), "transport_norm")
        logs.append((spec.label, res.log))
    for k, hs in enumerate(setup.holonomies):
        rel, slope, _ = holonomy_check(setup, hs)
        rep.add(f"holonomy[{k}]", rel, len(hs.eps), "holonomy")
        if slope is not None:
            rep.add(f"holonomy_slope[{k}]", abs(slope - 2.0), len(hs.eps), "holonomy_slope")
    return logs


def holonomy_check(setup: RiemannSetup, hs):
    """(relative error of the extrapolated defect / eps^2 against -R tau, fitted slope, data).

    The slope is None when every defect is at rounding level (flat space).
    """
    gam = setup.christoffel
    R = riemann_tensor(gam, hs.point)
    pred = holonomy_prediction(R, hs.tau0, hs.plane, 1.0)
    eps = np.array(sorted(hs.eps, reverse=True))
    defects = [holonomy_defect(hs.tau0, hs.point, hs.plane, e, gam, setup.group.domain) for e in eps]
    scaled = [d / e**2 for d, e in zip(defects, eps)]
    # scaled = pred + c1 eps + c2 eps^2 ...; Richardson for successive halvings (first order)
    ratio = eps[0] / eps[1]
    best = [(ratio * s1 - s0) / (ratio - 1.0) for s0, s1 in zip(scaled[:-1], scaled[1:])]
    if len(best) > 1:
        best = [(ratio**2 * b1 - b0) / (ratio**2 - 1.0) for b0, b1 in zip(best[:-1], best[1:])]
    extrap = best[-1]
    scale = np.linalg.norm(pred)
    if scale <= 1e-12 * np.linalg.norm(hs.tau0):
        # flat at this point: measure against the size of tau0 instead
        scale = np.linalg.norm(hs.tau0)
    rel = np.linalg.norm(extrap - pred) / scale
    norms = np.array([np.linalg.norm(d) for d in defects])
    slope = None
    if np.all(norms > 1e-13 * np.linalg.norm(hs.tau0)):
        slope = float(np.polyfit(np.log(eps), np.log(norms), 1)[0])
    return float(rel), slope, {"eps": eps, "defects": np.array(defects), "prediction": pred,
                                      "extrapolated": extrap}


def _deformation_checks(rep: Report, D: DeformedGroup, points, fd: FDConfig, seed: int):
    rep.sweep("property1", points, lambda x: np.max(np.abs(np.array(D.H(list(x), [0.0] * D.dim)))))
    _group_checks(rep, D, points, fd)
    rng = np.random.default_rng(seed + 1)
    n = D.ncoords

    def linear_fn():
        c = rng.uniform(-0.03, 0.03, D.dim)
        B = rng.uniform(-0.01, 0.01, (D.dim, n))
        return lambda y: c + B @ np.asarray(y, dtype=float)

    def assoc(x):
        g1, g2, g3 = linear_fn(), linear_fn(), linear_fn()
        g12 = lambda y: compose_deformed(D, g1, g2, y)[0]
        g23 = lambda y: compose_deformed(D, g2, g3, y)[0]
        left = compose_deformed(D, g12, g3, x)[0]
        right = compose_deformed(D, g1, g23, x)[0]
        return max_abs_diff(left, right)

    rep.sweep("associativity", points[: min(len(points), 10)], assoc)


def _gauge_checks(rep: Report, setup: GaugeSetup, points, fd: FDConfig, seed: int):
    A = setup.connection
    n, m = A.ncoords, A.group.dim
    Ft = A.constants
    rng = np.random.default_rng(seed + 2)
    fiber = setup.fiber_point + rng.uniform(-0.05, 0.05, (len(points), m))
    zs = [np.concatenate([x, u]) for x, u in zip(points, fiber)]
    if setup.deformation_H is not None:
        H = setup.deformation_H
        zero_u = [0.0] * m

        def plain_A(x):
            grad = fd_gradient(lambda t: np.array(H(list(x), list(t) + zero_u), dtype=float)[n:],
                               np.zeros(n), FDConfig(fd.step, fd.levels))
            return -grad

        rep.sweep("connection_fd", points, lambda x: max_abs_diff(A(x), plain_A(x)))
    else:
        plain_A = lambda x: np.asarray(A.A(list(x)), dtype=float)
    rep.sweep("structure_equation", points, lambda x: check_structure_equation(A, x))
    rep.sweep("field_strength_fd", points, lambda x: max_abs_diff(
        field_strength(A, x), oracle_field_strength(plain_A, Ft, x, fd)))
    rep.sweep("generator_commutator", zs, lambda z: generator_commutator_residual(A, z))
    gens = covariant_generators(A)

    def fd_eq12(z):
        F = field_strength(A, z[:n])
        V = np.array([X(list(z)) for X in gens.vertical], dtype=float)
        worst = 0.0
        for mu in range(n):
            for nu in range(mu + 1, n):
                X = lambda y, k=mu: np.array(gens.horizontal[k](list(y)), dtype=float)
                Y = lambda y, k=nu: np.array(gens.horizontal[k](list(y)), dtype=float)
                br = fd_commutator(X, Y, z, FDConfig(fd.step, fd.levels))
                worst = max(worst, max_abs_diff(br, F[:, mu, nu] @ V))
        return worst

    rep.sweep("generator_commutator_fd", zs, fd_eq12)
    rep.sweep("right_invariance", zs, lambda z: right_invariance_residual(A, z))
    if setup.upsilon is not None:
        if not np.any(Ft):
            rep.add("gauge_invariance", covariance_defect(A, setup.upsilon, 0.05, points),
                    len(points))
        else:
            slope, _ = covariance_slope(A, setup.upsilon, points)
            rep.add("covariance_slope", abs(slope - 2.0), len(points))


def fd_config(m: Manifest) -> FDConfig:
    step = m.number("verify", "fd_step", 1e-3)
    levels = m.get("verify", "fd_levels", 2)
    if isinstance(levels, bool) or not isinstance(levels, int):
        raise m.error("fd_levels must be an integer", "verify", "fd_levels")
    try:
        return FDConfig(step, levels)
    except ValueError as exc:
        raise m.error(str(exc), "verify", "fd_step" if "step" in str(exc) else "fd_levels") from None


def verify(m: Manifest, settings: VerifySettings, obj=None) -> Report:
    obj = build(m) if obj is None else obj
    points = sample_points(m, settings)
    rep = Report(settings)
    fd = fd_config(m)
    if m.task == "riemann":
        _riemann_checks(rep, obj, points, fd)
    elif m.task == "deformation":
        _deformation_checks(rep, obj, points, fd, settings.seed)
    else:
        _gauge_checks(rep, obj, points, fd, settings.seed)
    return rep


def check_group(m: Manifest, settings: VerifySettings, obj=None):
    """Closure residuals over the manifest grid.

    Groups: [X_a, X_b] - F^c_{ab} X_c. Gauge: [X_mu, X_nu] - F^i_{mu nu} X~_i.
    """
    obj = build(m) if obj is None else obj
    grid = m.domain.grid_points()
    rep = Report(settings)
    if m.task == "gauge":
        A = obj.connection
        zs = [np.concatenate([x, obj.fiber_point]) for x in grid]
        vals = [generator_commutator_residual(A, z) for z in zs]
        rep.add("generator_commutator", max(vals), len(vals))
    else:
        D = obj.group if m.task == "riemann" else obj
        vals = []
        for x in grid:
            try:
                vals.append(commutator_residual(D, x))
            except DeformGeoError as exc:
                exc.point = [float(v) for v in x]
                raise
        rep.add("commutator", max(vals), len(vals))
    g = TensorGrid("commutator_residual", list(m.coords), list(m.domain.resolution), ["point"],
                   ["residual"], grid, np.array(vals)[:, None], _metadata(m, settings))
    return rep, [g]


def curvature(m: Manifest, settings: VerifySettings, obj=None):
    obj = build(m) if obj is None else obj
    rep = Report(settings)
    grids = []
    if m.task == "riemann":
        grids.append(tensor_grid("metric", MetricTransformer(obj.vierbein), m))
        grids.append(tensor_grid("christoffel", ChristoffelTransformer(obj.metric), m))
        grids.append(tensor_grid("riemann", RiemannTransformer(obj.christoffel), m))
        grids.append(tensor_grid("structure_functions", StructureFunctionTransformer(obj.group), m))
        sc = tensor_grid("scalar_curvature", ScalarCurvatureTransformer(obj.metric), m)
        grids.append(sc)
        if obj.expected_K is not None and "K" in sc.components:
            rep.add("gaussian_curvature", np.max(np.abs(sc.column("K") - obj.expected_K)),
                    len(sc.points))
        rep.add("bianchi", max(bianchi_residual(riemann_tensor(obj.christoffel, x))
                               for x in m.domain.grid_points()), len(sc.points))
    elif m.task == "deformation":
        grids.append(tensor_grid("generators", GeneratorTransformer(obj), m))
        grids.append(tensor_grid("structure_functions", StructureFunctionTransformer(obj), m))
        grids.append(tensor_grid("curvature_coefficients", CurvatureCoefficientTransformer(obj), m))
        F = grids[1].values.reshape(-1, obj.dim, obj.dim, obj.dim)
        R = grids[2].values.reshape(-1, obj.dim, obj.dim, obj.dim, obj.dim)
        rep.add("antisymmetry", max(np.max(np.abs(F + F.transpose(0, 1, 3, 2))),
                                    np.max(np.abs(R + R.transpose(0, 1, 2, 4, 3)))), len(F))
    else:
        grids.append(tensor_grid("field_strength", FieldStrengthTransformer(obj.connection), m))
        rep.add("structure_equation", max(check_structure_equation(obj.connection, x)
                                          for x in m.domain.grid_points()), len(grids[0].points))
    return rep, grids


def gauge(m: Manifest, settings: VerifySettings, obj=None):
    if m.task != "gauge":
        raise m.error("the gauge subcommand needs a [gauge] section")
    obj = build(m) if obj is None else obj
    rep = Report(settings)
    points = sample_points(m, settings)
    _gauge_checks(rep, obj, points, fd_config(m), settings.seed)
    grids = [tensor_grid("field_strength", FieldStrengthTransformer(obj.connection), m,
                         meta=_metadata(m, settings))]
    if obj.upsilon is not None and np.any(obj.connection.constants):
        eps = (1e-2, 1e-3)
        d = [covariance_defect(obj.connection, obj.upsilon, e, points) for e in eps]
        grids.append(TensorGrid("covariance_defect", ["eps"], [len(eps)], ["eps"], ["defect"],
                                np.array(eps)[:, None], np.array(d)[:, None], _metadata(m, settings)))
    return rep, grids


def transport(m: Manifest, settings: VerifySettings, obj=None):
    if m.task != "riemann":
        raise m.error("the transport subcommand needs a [riemann] section")
    obj = build(m) if obj is None else obj
    rep = Report(settings)
    logs = transport_checks(rep, obj)
    n = obj.vierbein.ncoords
    comps = [f"x[{k}]" for k in range(n)] + [f"tau[{k}]" for k in range(n)]
    grids = []
    for label, log in logs:
        grids.append(TensorGrid(f"transport_{label}", ["s"], [len(log)], ["quantity"], comps,
                                log[:, :1], log[:, 1:], _metadata(m, settings)))
    for k, hs in enumerate(obj.holonomies):
        _, _, data = holonomy_check(obj, hs)
        comps_h = component_names("defect", (n,))
        grids.append(TensorGrid(f"holonomy_{k}", ["eps"], [len(data["eps"])], ["alpha"], comps_h,
                                data["eps"][:, None], data["defects"], _metadata(m, settings)))
    return rep, grids
