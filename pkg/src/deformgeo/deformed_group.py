"""Deformed groups: a Lie group acting on a chart, twisted by a point-dependent map.

A base group ``G`` with law ``phi~`` acts on chart points by ``f~(x, g~)``.
Deformation functions ``H(x, g~)`` (with ``H(x, 0) = 0`` and an inverse ``K``)
define the deformed law::

    (g * g')(x) = H(x, phi~(K(x, g(x)), K(x', g'(x'))))
    x'          = f~(x, K(x, g(x)))

Expanding the law around the identity at a fixed point ``x``::

    phi^a = g^a + g'^a + gamma^a_{bc} g^b g'^c + 1/2 rho^a_{bcd} g^d g'^b g'^c + ...

gives the structure functions ``F^a_{bc} = gamma^a_{bc} - gamma^a_{cb}`` and the
curvature coefficients ``R^a_{dbc} = rho^a_{dbc} - rho^a_{dcb}``. Every
derivative here comes from jets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    DeformGeoError,
    DegenerateDeformation,
    InverseKFailed,
    Property1Violated,
    UnknownVariable,
)
from .expr_dsl import compile_expr, parse, variables
from .fields import Field, as_field
from .jets import Jet, jet_space
from .lie_core import LieGroupChart
from .numerics import newton_solve


# chart domain ---------------------------------------------------------------

@dataclass(frozen=True)
class ChartDomain:
    coords: tuple
    lo: tuple
    hi: tuple
    resolution: tuple

    def __post_init__(self):
        n = len(self.coords)
        if not (len(self.lo) == len(self.hi) == len(self.resolution) == n):
            raise ValueError("domain bounds and resolution must match the coordinates")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("domain requires lo < hi componentwise")
        if any(r < 2 for r in self.resolution):
            raise ValueError("grid resolution must be at least 2 per axis")

    @classmethod
    def box(cls, coords, lo, hi, resolution=5):
        n = len(coords)
        if np.isscalar(resolution):
            resolution = (int(resolution),) * n
        return cls(tuple(coords), tuple(map(float, lo)), tuple(map(float, hi)),
                   tuple(int(r) for r in resolution))

    @property
    def ndim(self) -> int:
        return len(self.coords)

    def axes(self):
        return [np.linspace(a, b, r) for a, b, r in zip(self.lo, self.hi, self.resolution)]

    def grid_points(self) -> np.ndarray:
        """Row-major list of grid points, shape (prod(resolution), ndim)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def random_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = np.array(self.lo), np.array(self.hi)
        return lo + (hi - lo) * rng.random((count, self.ndim))

    def contains(self, x, slack: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.array(self.lo) - slack) and np.all(x <= np.array(self.hi) + slack))


# base groups acting on the chart -----------------------------------------------

def translation_action(x, a):
    return [xi + ai for xi, ai in zip(x, a)]


def trivial_action(x, a):
    return list(x)


def expr_action(exprs, coords, params, constants=None):
    """Action ``x' = f~(x, g~)`` given as expressions in coords and params."""
    consts = dict(constants or {})
    parsed = [parse(e) if isinstance(e, str) else e for e in exprs]
    allowed = set(coords) | set(params) | set(consts)
    for k, e in enumerate(parsed):
        unknown = variables(e) - allowed
        if unknown:
            raise UnknownVariable(f"action[{k}] uses undeclared variables {sorted(unknown)}")
    compiled = [compile_expr(e) for e in parsed]

    def action(x, a):
        env = dict(consts)
        env.update(zip(coords, x))
        env.update(zip(params, a))
        return [f(env) for f in compiled]

    return action


@dataclass(frozen=True)
class GaugeGroup:
    """Generalized gauge group: point-dependent elements of ``chart`` acting by ``action``."""

    chart: LieGroupChart
    action: Callable
    ncoords: int

    @property
    def dim(self) -> int:
        return self.chart.dim

    def product(self, x, a, b):
        return self.chart.mult(list(a), list(b))

    def act(self, x, a):
        return self.action(list(x), list(a))


# deformation maps ---------------------------------------------------------------

class DeformationMap:
    """Deformation functions ``H(x, g~)`` and their inverse ``K(x, g)``."""

    dim: int
    ncoords: int

    def H(self, x, gt) -> list:
        raise NotImplementedError

    def K(self, x, g) -> list:
        g = list(g)
        return newton_solve(lambda y: self.H(x, y), g, g, exc=InverseKFailed)

    def coefficients(self, x) -> np.ndarray:
        """Deformation coefficients h^a_alpha = dH^a/dg~^alpha at g~ = 0."""
        space = jet_space(self.dim, 1)
        out = self.H([float(v) for v in x], Jet.seed(space, [0.0] * self.dim))
        h = np.zeros((self.dim, self.dim))
        for a, comp in enumerate(out):
            if isinstance(comp, Jet):
                h[a] = [comp.partial(k) for k in range(self.dim)]
        return h


class IdentityDeformation(DeformationMap):
    def __init__(self, dim: int, ncoords: int):
        self.dim, self.ncoords = dim, ncoords

    def H(self, x, gt):
        return list(gt)

    def K(self, x, g):
        return list(g)


class ClosedFormDeformation(DeformationMap):
    """H (and optionally K) given as expressions.

    ``params`` names g~ inside ``H``; ``inverse_params`` names g inside ``K``.
    """

    def __init__(self, coords, params, H, K=None, inverse_params=None, constants=None):
        self.coords = tuple(coords)
        self.params = tuple(params)
        self.dim = len(self.params)
        self.ncoords = len(self.coords)
        self.constants = dict(constants or {})
        if len(H) != self.dim:
            raise ValueError("H needs one component per group parameter")
        self._H = self._compile(H, self.params, "H")
        self._K = None
        if K is not None:
            self.inverse_params = tuple(inverse_params or [f"{p}_" for p in self.params])
            if len(K) != self.dim or len(self.inverse_params) != self.dim:
                raise ValueError("K needs one component per group parameter")
            self._K = self._compile(K, self.inverse_params, "K")

    def _compile(self, exprs, params, label):
        parsed = [parse(e) if isinstance(e, str) else e for e in exprs]
        allowed = set(self.coords) | set(params) | set(self.constants)
        for k, e in enumerate(parsed):
            unknown = variables(e) - allowed
            if unknown:
                raise UnknownVariable(f"{label}[{k}] uses undeclared variables {sorted(unknown)}")
        compiled = [compile_expr(e) for e in parsed]

        def fn(x, p):
            env = dict(self.constants)
            env.update(zip(self.coords, x))
            env.update(zip(params, p))
            return [f(env) for f in compiled]

        return fn

    def H(self, x, gt):
        return self._H(x, gt)

    def K(self, x, g):
        if self._K is None:
            return super().K(x, g)
        return self._K(x, g)


class CoefficientDeformation(DeformationMap):
    """H^a = h^a_alpha (g~^alpha + 1/2 G^alpha_{bc} g~^b g~^c + 1/6 D^alpha_{bcd} g~^b g~^c g~^d).

    ``h``, ``second`` and ``third`` are fields over the chart; the latter two
    are optional (zero when absent).
    """

    def __init__(self, h: Field, second: Field | None = None, third: Field | None = None):
        self.h = h
        self.second = second
        self.third = third
        self.dim = h.shape[0]
        self.ncoords = h.ncoords
        if h.shape != (self.dim, self.dim):
            raise ValueError("deformation coefficients must be a square matrix field")

    def H(self, x, gt):
        n = self.dim
        s = list(gt)
        if self.second is not None:
            G = self.second(x)
            for a in range(n):
                acc = s[a]
                for b in range(n):
                    for c in range(n):
                        acc = acc + 0.5 * G[a, b, c] * (gt[b] * gt[c])
                s[a] = acc
        if self.third is not None:
            D = self.third(x)
            for a in range(n):
                acc = s[a]
                for b in range(n):
                    for c in range(n):
                        for d in range(n):
                            acc = acc + (D[a, b, c, d] / 6.0) * (gt[b] * gt[c] * gt[d])
                s[a] = acc
        h = self.h(x)
        return [sum((h[a, k] * s[k] for k in range(1, n)), h[a, 0] * s[0]) for a in range(n)]

    def coefficients(self, x) -> np.ndarray:
        return np.asarray(self.h([float(v) for v in x]), dtype=float)


class ComposedDeformation(DeformationMap):
    """``outer`` applied after ``inner``: H = H_outer(x, H_inner(x, g~))."""

    def __init__(self, outer: DeformationMap, inner: DeformationMap):
        if outer.dim != inner.dim:
            raise ValueError("dimension mismatch")
        self.outer, self.inner = outer, inner
        self.dim, self.ncoords = inner.dim, inner.ncoords

    def H(self, x, gt):
        return self.outer.H(x, self.inner.H(x, gt))

    def K(self, x, g):
        return self.inner.K(x, self.outer.K(x, g))


# deformed group ------------------------------------------------------------------

@dataclass(frozen=True)
class DeformedGroup:
    """Base group (a :class:`GaugeGroup` or another deformed group) plus deformation."""

    base: "GaugeGroup | DeformedGroup"
    deformation: DeformationMap
    domain: ChartDomain | None = None

    @property
    def dim(self) -> int:
        return self.deformation.dim

    @property
    def ncoords(self) -> int:
        return self.base.ncoords

    def H(self, x, gt):
        return self.deformation.H(x, gt)

    def K(self, x, g):
        return self.deformation.K(x, g)

    def act(self, x, g):
        """x' = f(x, g) = f~(x, K(x, g))."""
        return self.base.act(x, self.K(x, g))

    def product(self, x, g, gp):
        """phi(x, g, g') with g' the value of the second factor at x'."""
        gt = self.K(x, g)
        x1 = self.base.act(x, gt)
        gpt = self.K(x1, gp)
        return self.H(x, self.base.product(x, gt, gpt))


def _as_group(base, ncoords, action):
    if isinstance(base, (GaugeGroup, DeformedGroup)):
        return base
    if not isinstance(base, LieGroupChart):
        raise TypeError("base must be a LieGroupChart, GaugeGroup or DeformedGroup")
    if action is None:
        action = translation_action if (base.kind == "abelian" and base.dim == ncoords) else trivial_action
    return GaugeGroup(base, action, ncoords)


def deform(base, H: DeformationMap | None = None, domain: ChartDomain | None = None, *,
           action=None, samples_per_point: int = 2, seed: int = 0) -> DeformedGroup:
    """Build the deformed group and validate the deformation on the domain grid."""
    ncoords = domain.ndim if domain is not None else (H.ncoords if H is not None else base.ncoords)
    group = _as_group(base, ncoords, action)
    if H is None:
        H = IdentityDeformation(group.dim, ncoords)
    if H.dim != group.dim:
        raise ValueError("deformation dimension differs from the group dimension")
    D = DeformedGroup(group, H, domain)
    if domain is not None:
        validate_deformation(D, domain.grid_points(), samples_per_point, seed)
    return D


def validate_deformation(D: DeformedGroup, points, samples_per_point: int = 2, seed: int = 0):
    """Check H(x,0)=0, det h != 0 and K(x, H(x, g~)) = g~ at the given points."""
    rng = np.random.default_rng(seed)
    for x in np.atleast_2d(points):
        x = [float(v) for v in x]
        try:
            _validate_at(D, x, rng, samples_per_point)
        except DeformGeoError as exc:
            if exc.point is None:
                exc.point = x
            raise


def _validate_at(D: DeformedGroup, x, rng, samples_per_point):
    n = D.dim
    h = D.deformation.coefficients(x)
    det = np.linalg.det(h)
    if not np.isfinite(det) or abs(det) < 1e-8:
        raise DegenerateDeformation(f"det h = {det:.3e} at grid point {x}")
    h0 = np.array(D.H(x, [0.0] * n), dtype=float)
    if np.max(np.abs(h0)) > 1e-10:
        raise Property1Violated(f"H(x, 0) = {h0} != 0 at grid point {x}")
    for _ in range(samples_per_point):
        gt = list(rng.uniform(-0.1, 0.1, n))
        back = np.array(D.K(x, D.H(x, gt)), dtype=float)
        if np.max(np.abs(back - gt)) > 1e-8:
            raise InverseKFailed(f"K(x, H(x, g~)) != g~ at grid point {x}")


# products of parameter functions ---------------------------------------------------

def _param_fn(g, D: DeformedGroup, constants=None):
    if callable(g) and not isinstance(g, (list, tuple)):
        return g
    coords = D.domain.coords if D.domain is not None else None
    if coords is None:
        raise ValueError("expression parameter functions need a domain with coordinate names")
    f = as_field(list(g), coords, constants)
    return lambda x: np.asarray(f(list(x)), dtype=float)


def compose_deformed(D: DeformedGroup, g, gp, x, constants=None):
    """Return ((g * g')(x), x') for parameter functions g, g'.

    ``g`` and ``gp`` are callables x -> vector or expression vectors over the
    domain coordinates.
    """
    gf, gpf = _param_fn(g, D, constants), _param_fn(gp, D, constants)
    x = [float(v) for v in x]
    gx = [float(v) for v in gf(x)]
    x1 = [float(v) for v in D.act(x, gx)]
    gpx = [float(v) for v in gpf(x1)]
    value = np.array(D.product(x, gx, gpx), dtype=float)
    return value, np.array(x1)


def product_function(D: DeformedGroup, g, gp, constants=None):
    """The parameter function g * g' as a callable."""
    gf, gpf = _param_fn(g, D, constants), _param_fn(gp, D, constants)
    return lambda x: compose_deformed(D, gf, gpf, x)[0]


def regularity_det(D: DeformedGroup, g, x, step: float = 1e-6) -> float:
    """det{d_nu f^mu(x, g(x))}, the parameterization condition (central differences)."""
    gf = _param_fn(g, D)
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        fp = np.array(D.act(list(x + e), list(gf(x + e))), dtype=float)
        fm = np.array(D.act(list(x - e), list(gf(x - e))), dtype=float)
        cols.append((fp - fm) / (2 * step))
    return float(np.linalg.det(np.array(cols).T))


# expansion coefficients ----------------------------------------------------------

@dataclass(frozen=True)
class LocalCoefficients:
    """All local data of the deformed group at one chart point."""

    x: np.ndarray
    gamma: np.ndarray  # [a, b, c]
    rho: np.ndarray | None  # [a, b, c, d]: b, c on the second factor, d on the first
    F: np.ndarray  # [a, b, c]
    R: np.ndarray | None  # [a, d, b, c]
    h: np.ndarray  # h^a_alpha
    xi: np.ndarray  # xi^mu_a


def expansion_coeffs(D: DeformedGroup, x, order: int = 3):
    """(gamma, rho) of the expansion of the deformed law at x.

    gamma[a, b, c] = d2 phi^a / dg^b dg'^c and
    rho[a, b, c, d] = d3 phi^a / dg'^b dg'^c dg^d (symmetric in b, c).
    ``rho`` is None when ``order`` is 2.
    """
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    n = D.dim
    space = jet_space(2 * n, order)
    g = Jet.seed(space, [0.0] * n)
    gp = Jet.seed(space, [0.0] * n, offset=n)
    phi = D.product([float(v) for v in x], g, gp)
    gamma = np.zeros((n, n, n))
    rho = np.zeros((n, n, n, n)) if order == 3 else None
    for a, comp in enumerate(phi):
        if not isinstance(comp, Jet):
            continue
        for b in range(n):
            for c in range(n):
                gamma[a, b, c] = comp.partial(b, n + c)
                if rho is not None:
                    for d in range(n):
                        rho[a, b, c, d] = comp.partial(n + b, n + c, d)
    return gamma, rho


def structure_functions(D: DeformedGroup, x) -> np.ndarray:
    """F^a_{bc}(x) = gamma^a_{bc} - gamma^a_{cb}."""
    gamma, _ = expansion_coeffs(D, x, order=2)
    return gamma - np.transpose(gamma, (0, 2, 1))


def curvature_from_rho(rho: np.ndarray) -> np.ndarray:
    return rho - np.transpose(rho, (0, 1, 3, 2))


def curvature_coeffs(D: DeformedGroup, x) -> np.ndarray:
    """R^a_{dbc}(x) = rho^a_{dbc} - rho^a_{dcb}."""
    _, rho = expansion_coeffs(D, x, order=3)
    return curvature_from_rho(rho)


def generators(D: DeformedGroup, x):
    """(xi, hinv): xi[mu, a] = d f^mu / d g^a at g = 0 and hinv[alpha, a] = dK^alpha/dg^a."""
    n = D.dim
    x = [float(v) for v in x]
    h = D.deformation.coefficients(x)
    det = np.linalg.det(h)
    if abs(det) < 1e-8:
        raise DegenerateDeformation(f"det h = {det:.3e} at {x}")
    space = jet_space(n, 1)
    g = Jet.seed(space, [0.0] * n)
    f = D.act(x, g)
    xi = np.zeros((D.ncoords, n))
    for mu, comp in enumerate(f):
        if isinstance(comp, Jet):
            xi[mu] = [comp.partial(a) for a in range(n)]
    return xi, np.linalg.inv(h)


def generator_jets(D: DeformedGroup, x):
    """(xi, dxi) with dxi[mu, a, nu] = d_nu xi^mu_a, from one joint (x, g) jet."""
    n, m = D.dim, D.ncoords
    space = jet_space(m + n, 2)
    xj = Jet.seed(space, [float(v) for v in x])
    g = Jet.seed(space, [0.0] * n, offset=m)
    f = D.act(xj, g)
    xi = np.zeros((m, n))
    dxi = np.zeros((m, n, m))
    for mu, comp in enumerate(f):
        if not isinstance(comp, Jet):
            continue
        for a in range(n):
            xi[mu, a] = comp.partial(m + a)
            for nu in range(m):
                dxi[mu, a, nu] = comp.partial(nu, m + a)
    return xi, dxi


def commutators(D: DeformedGroup, x) -> np.ndarray:
    """[X_a, X_b]^mu = xi^nu_a d_nu xi^mu_b - xi^nu_b d_nu xi^mu_a, shape [mu, a, b]."""
    xi, dxi = generator_jets(D, x)
    t = np.einsum("na,mbn->mab", xi, dxi)
    return t - np.transpose(t, (0, 2, 1))


def commutator_residual(D: DeformedGroup, x, a: int | None = None, b: int | None = None) -> float:
    """max-norm of [X_a, X_b] - F^c_{ab} X_c at x (all pairs when a, b are None)."""
    xi, _ = generator_jets(D, x)
    comm = commutators(D, x)
    F = structure_functions(D, x)
    rhs = np.einsum("cab,mc->mab", F, xi)
    diff = comm - rhs
    if a is not None and b is not None:
        diff = diff[:, a, b]
    return float(np.max(np.abs(diff)))


def local_coefficients(D: DeformedGroup, x, order: int = 3) -> LocalCoefficients:
    gamma, rho = expansion_coeffs(D, x, order)
    xi, _ = generators(D, x)
    return LocalCoefficients(
        x=np.asarray(x, dtype=float),
        gamma=gamma,
        rho=rho,
        F=gamma - np.transpose(gamma, (0, 2, 1)),
        R=None if rho is None else curvature_from_rho(rho),
        h=D.deformation.coefficients(x),
        xi=xi,
    )
