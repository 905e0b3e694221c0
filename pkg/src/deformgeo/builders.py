"""Turn a validated manifest into geometric objects."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .deformed_group import (
    ClosedFormDeformation,
    CoefficientDeformation,
    DeformedGroup,
    GaugeGroup,
    expr_action,
    translation_action,
    trivial_action,
)
from .errors import DeformGeoError
from .fields import ExprField, Field
from .gauge_bundle import ConnectionField, connection_from_deformation
from .lie_core import LieGroupChart, from_expressions, parse_builtin
from .manifest import Manifest
from .riemann_geom import (
    Curve,
    VierbeinField,
    christoffel_field,
    flat_metric,
    metric_field,
    translation_deformation,
    vierbein_from_metric,
)


@dataclass
class TransportSpec:
    curve: Curve
    tau0: np.ndarray
    label: str


@dataclass
class HolonomySpec:
    point: np.ndarray
    plane: tuple
    tau0: np.ndarray
    eps: tuple


@dataclass
class RiemannSetup:
    vierbein: VierbeinField
    metric: Field
    christoffel: Field  # Levi-Civita from the metric (jets)
    supplied_gamma: Field | None  # closed-form Gamma from the manifest, if any
    delta: Field | None
    group: DeformedGroup
    transports: list = field(default_factory=list)
    holonomies: list = field(default_factory=list)
    expected_K: float | None = None

    @property
    def gamma_for_group(self) -> Field:
        return self.supplied_gamma if self.supplied_gamma is not None else self.christoffel


@dataclass
class GaugeSetup:
    connection: ConnectionField
    upsilon: Field | None
    fiber_point: np.ndarray
    deformation_H: object = None


def _field(m: Manifest, section, key, shape, required=False):
    arr = m.expr_array(section, key, shape, required=required)
    return None if arr is None else ExprField(arr, m.coords, m.constants)


def build_riemann(m: Manifest) -> RiemannSetup:
    n = len(m.coords)
    sig = m.get("riemann", "signature", "euclidean")
    if sig not in ("euclidean", "lorentzian"):
        raise m.error("signature must be 'euclidean' or 'lorentzian'", "riemann", "signature")
    has_h = "vierbein" in m.section("riemann")
    has_g = "metric" in m.section("riemann")
    if has_h == has_g:
        raise m.error("give exactly one of 'vierbein' or 'metric'", "riemann")
    if has_h:
        vb = VierbeinField(_field(m, "riemann", "vierbein", (n, n)), flat_metric(n, sig))
        g = metric_field(vb)
    else:
        if sig != "euclidean":
            raise m.error("metric input requires the euclidean signature", "riemann", "signature")
        g = _field(m, "riemann", "metric", (n, n))
        vb = vierbein_from_metric(g)
    supplied = _field(m, "riemann", "christoffel", (n, n, n))
    delta = _field(m, "riemann", "delta", (n, n, n, n))
    gamma = christoffel_field(g)
    D = translation_deformation(vb, supplied if supplied is not None else gamma, delta, m.domain)
    setup = RiemannSetup(vb, g, gamma, supplied, delta, D)
    setup.expected_K = m.number("riemann", "gaussian_curvature")

    for k, t in enumerate(m.get("riemann", "transport", [])):
        where = "riemann.transport"
        path = t.get("path")
        tau0 = t.get("tau0")
        if not isinstance(path, list) or len(path) != n or tau0 is None or len(tau0) != n:
            raise m.error(f"transport[{k}] needs 'path' and 'tau0' of length {n}", where)
        steps = t.get("steps", 200)
        if not isinstance(steps, int) or steps < 100:
            raise m.error(f"transport[{k}].steps must be an integer >= 100", where, "steps")
        try:
            curve = Curve.from_expressions(path, m.constants, steps)
        except DeformGeoError as exc:
            raise m.error(f"transport[{k}].path: {exc}", where, "path") from None
        setup.transports.append(TransportSpec(curve, np.asarray(tau0, dtype=float),
                                              t.get("label", f"curve{k}")))

    for k, h in enumerate(m.get("riemann", "holonomy", [])):
        where = "riemann.holonomy"
        try:
            point = np.asarray(h["point"], dtype=float)
            plane = tuple(int(p) for p in h.get("plane", (0, 1)))
            tau0 = np.asarray(h["tau0"], dtype=float)
            eps = tuple(float(e) for e in h.get("eps", (0.02, 0.01, 0.005)))
        except (KeyError, TypeError, ValueError):
            raise m.error(f"holonomy[{k}] needs point, tau0 (and optional plane, eps)", where) from None
        if point.size != n or tau0.size != n or len(plane) != 2 or len(set(plane)) != 2 \
                or not all(0 <= p < n for p in plane) or len(eps) < 2:
            raise m.error(f"holonomy[{k}] has inconsistent sizes", where)
        setup.holonomies.append(HolonomySpec(point, plane, tau0, eps))
    return setup


def _group(m: Manifest) -> tuple[LieGroupChart, list]:
    sec = m.section("group")
    if not sec:
        raise m.error("the deformation task needs a [group] section")
    if "builtin" in sec:
        try:
            G = parse_builtin(str(sec["builtin"]))
        except ValueError as exc:
            raise m.error(str(exc), "group", "builtin") from None
        params = m.names("group", "params", required=False) or [f"g{k + 1}" for k in range(G.dim)]
        if len(params) != G.dim:
            raise m.error("params must name every group parameter", "group", "params")
        return G, params
    left = m.names("group", "left")
    right = m.names("group", "right")
    names = set(left) | set(right)
    mult = m.expr_array("group", "mult", (len(left),), names=names, required=True)
    inv = m.expr_array("group", "inverse", (len(left),), names=left)
    radius = m.number("group", "chart_radius", np.inf)
    return from_expressions(left, right, mult, m.constants, inv, radius), left


def build_deformation(m: Manifest) -> DeformedGroup:
    G, params = _group(m)
    n = len(m.coords)
    if "action" in m.section("group"):
        act_exprs = m.expr_array("group", "action", (n,), names=set(m.coords) | set(params))
        action = expr_action(act_exprs, m.coords, params, m.constants)
    elif G.kind == "abelian" and G.dim == n:
        action = translation_action
    else:
        action = trivial_action
    base = GaugeGroup(G, action, n)
    mode = m.get("deformation", "mode", "closed-form")
    if mode == "closed-form":
        tp = m.names("deformation", "params")
        if len(tp) != G.dim:
            raise m.error("one deformation parameter per group dimension", "deformation", "params")
        H = m.expr_array("deformation", "H", (G.dim,), names=set(m.coords) | set(tp), required=True)
        ip = m.names("deformation", "inverse_params", required=False)
        K = None
        if "K" in m.section("deformation"):
            if ip is None or len(ip) != G.dim:
                raise m.error("K needs inverse_params", "deformation", "inverse_params")
            K = m.expr_array("deformation", "K", (G.dim,), names=set(m.coords) | set(ip))
        H = ClosedFormDeformation(m.coords, tp, H, K, ip, m.constants)
    elif mode == "coefficients":
        d = G.dim
        h = _field(m, "deformation", "h", (d, d), required=True)
        H = CoefficientDeformation(h, _field(m, "deformation", "christoffel", (d, d, d)),
                                   _field(m, "deformation", "delta", (d, d, d, d)))
    else:
        raise m.error("mode must be 'closed-form' or 'coefficients'", "deformation", "mode")
    return DeformedGroup(base, H, m.domain)


def build_gauge(m: Manifest) -> GaugeSetup:
    n = len(m.coords)
    name = m.get("gauge", "group", None)
    if not isinstance(name, str):
        raise m.error("gauge.group must name a builtin group", "gauge", "group")
    try:
        V = parse_builtin(name)
    except ValueError as exc:
        raise m.error(str(exc), "gauge", "group") from None
    dv = V.dim
    sec = m.section("gauge")
    H = None
    if ("connection" in sec) == ("H" in sec):
        raise m.error("give exactly one of 'connection' or 'H'", "gauge")
    if "connection" in sec:
        A = ConnectionField(_field(m, "gauge", "connection", (dv, n)), V)
    else:
        params = m.names("gauge", "params")
        if len(params) != n + dv:
            raise m.error(f"H needs {n + dv} parameters (translations then fiber)", "gauge", "params")
        exprs = m.expr_array("gauge", "H", (n + dv,), names=set(m.coords) | set(params))
        H = ClosedFormDeformation(m.coords, params, exprs, constants=m.constants).H
        A = connection_from_deformation(H, n, V, m.domain.grid_points())
    ups = _field(m, "gauge", "upsilon", (dv,))
    fp = m.vector("gauge", "fiber_point", dv, default=[0.1 * (k + 1) for k in range(dv)])
    return GaugeSetup(A, ups, fp, H)
