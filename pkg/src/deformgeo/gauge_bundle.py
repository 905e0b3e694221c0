"""Connections on trivial principal bundles M x V read off deformed groups.

For a deformation of the product group T_M x V with properties

    3) H^mu(x, t~, u~) = t~^mu
    4) H^i(x, 0, u~)  = u~^i

the only x-dependent deformation coefficients are h^i_mu = dH^i/dt~^mu = -A^i_mu,
the connection. Its field strength is

    F^i_{mu nu} = F~^i_{jk} A^j_mu A^k_nu + d_mu A^i_nu - d_nu A^i_mu

and the covariant generators X_mu = d_mu + A^i_mu X~_i, X_i = X~_i close as
[X_mu, X_nu] = F^i_{mu nu} X~_i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NoFiberAction, Property3Violated, Property4Violated
from .fields import DerivedField, Field, as_field
from .jets import Jet, jeinsum, jet_space
from .lie_core import LieGroupChart, structure_constants


@dataclass(frozen=True)
class ConnectionField:
    """Connection A^i_mu(x) with values in the Lie algebra of ``group``."""

    A: Field
    group: LieGroupChart

    def __post_init__(self):
        if len(self.A.shape) != 2 or self.A.shape[0] != self.group.dim:
            raise ValueError("connection must have shape (dim V, dim M)")

    @classmethod
    def from_expressions(cls, exprs, coords, group: LieGroupChart, constants=None):
        return cls(as_field(exprs, coords, constants), group)

    @property
    def ncoords(self) -> int:
        return self.A.shape[1]

    @property
    def constants(self) -> np.ndarray:
        F = self.group.constants
        return np.asarray(F if F is not None else structure_constants(self.group), dtype=float)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.A(list(x)), dtype=float)


def connection_from_deformation(H: Callable, n: int, group: LieGroupChart, points,
                                samples_per_point: int = 2, seed: int = 0,
                                tol: float = 1e-10) -> ConnectionField:
    """Read A^i_mu = -dH^i/dt~^mu at (t~, u~) = 0 off a deformation of T_M x V.

    ``H(x, p)`` takes the joint parameters p = (t~^1..t~^n, u~^1..u~^m) and
    returns n + m components; it must accept jets. Properties 3) and 4) are
    checked at ``points`` with random small parameters.
    """
    m = group.dim
    rng = np.random.default_rng(seed)
    for x in np.atleast_2d(points):
        x = [float(v) for v in x]
        for _ in range(samples_per_point):
            t = rng.uniform(-0.1, 0.1, n)
            u = rng.uniform(-0.1, 0.1, m)
            out = np.array(H(x, list(t) + list(u)), dtype=float)
            if np.max(np.abs(out[:n] - t), initial=0.0) > tol:
                raise Property3Violated(f"H^mu(x, t, u) != t^mu at {x}")
            out0 = np.array(H(x, [0.0] * n + list(u)), dtype=float)
            if np.max(np.abs(out0[n:] - u), initial=0.0) > tol:
                raise Property4Violated(f"H^i(x, 0, u) != u^i at {x}")

    def expand(x0, k):
        # joint jet in (x, t~); A is the coefficient linear in t~, restricted to t~ = 0
        joint = jet_space(2 * n, k + 1)
        xs = Jet.seed(joint, list(x0))
        ts = Jet.seed(joint, [0.0] * n, offset=n)
        out = H(xs, ts + [0.0] * m)
        target = jet_space(n, k)
        deltas = Jet.seed(target, [0.0] * n) + [Jet.constant(target, 0.0)] * n
        rows = []
        for i in range(m):
            comp = out[n + i]
            if not isinstance(comp, Jet):
                rows.append([0.0] * n)
                continue
            rows.append([-comp.diff(n + mu).compose(deltas) for mu in range(n)])
        return Jet.stack(rows, space=target)

    return ConnectionField(DerivedField((m, n), n, expand), group)


def _field_strength_jet(A: ConnectionField, x0, order: int) -> Jet:
    n = A.ncoords
    T = A.A.taylor(x0, order + 1)
    dA = Jet.stack([T.diff(s) for s in range(n)])  # [mu, i, nu] = d_mu A^i_nu
    curl = dA.transpose(1, 0, 2)
    curl = curl - curl.transpose(0, 2, 1)
    Tk = T.truncate(order)
    quad = jeinsum("ijk,jm->ikm", A.constants, Tk)
    quad = jeinsum("ikm,kn->imn", quad, Tk)
    return quad + curl


def field_strength(A: ConnectionField, x) -> np.ndarray:
    """F[i, mu, nu]; antisymmetric in (mu, nu)."""
    return _field_strength_jet(A, np.asarray(x, dtype=float), 0).value


def field_strength_field(A: ConnectionField) -> Field:
    m, n = A.A.shape
    return DerivedField((m, n, n), n, lambda x0, k: _field_strength_jet(A, x0, k))


def check_structure_equation(A: ConnectionField, x, pairs: Sequence | None = None) -> float:
    """max |d omega(d_mu, d_nu) + 1/2 F~ (omega ^ omega)(d_mu, d_nu) - Omega(d_mu, d_nu)|.

    omega = A^i_mu dx^mu and Omega^i = 1/2 F^i_{mu nu} dx^mu ^ dx^nu.
    """
    x = np.asarray(x, dtype=float)
    n = A.ncoords
    T = A.A.taylor(x, 1)
    a = T.value
    da = T.derivatives(1)  # [i, nu, mu] = d_mu A^i_nu
    F = field_strength(A, x)
    Ft = A.constants
    pairs = [(mu, nu) for mu in range(n) for nu in range(n)] if pairs is None else pairs
    worst = 0.0
    for mu, nu in pairs:
        d_omega = da[:, nu, mu] - da[:, mu, nu]
        wedge = np.einsum("j,k->jk", a[:, mu], a[:, nu]) - np.einsum("j,k->jk", a[:, nu], a[:, mu])
        half = 0.5 * np.einsum("ijk,jk->i", Ft, wedge)
        worst = max(worst, float(np.max(np.abs(d_omega + half - F[:, mu, nu]))))
    return worst


def gauge_transform(A: ConnectionField, upsilon: Field, eps: float) -> ConnectionField:
    """A'^i_mu = A^i_mu - eps (F~^i_{jk} A^j_mu u^k + d_mu u^i)."""
    m, n = A.A.shape
    Ft = A.constants

    def expand(x0, k):
        T = A.A.taylor(x0, k)
        U = upsilon.taylor(x0, k + 1)
        dU = Jet.stack([U.diff(s) for s in range(n)]).transpose(1, 0)  # [i, mu]
        rot = jeinsum("ijmk,k->im", jeinsum("ijk,jm->ijmk", Ft, T), U.truncate(k))
        return T - eps * (rot + dU)

    return ConnectionField(DerivedField((m, n), n, expand), A.group)


def covariance_defect(A: ConnectionField, upsilon: Field, eps: float, points) -> float:
    """max over points of |F(A') - (F - eps F~^i_{jk} F^j u^k)|; O(eps^2) when covariant."""
    Ap = gauge_transform(A, upsilon, eps)
    Ft = A.constants
    worst = 0.0
    for x in np.atleast_2d(points):
        F = field_strength(A, x)
        u = np.asarray(upsilon(list(x)), dtype=float)
        expected = F - eps * np.einsum("ijk,jmn,k->imn", Ft, F, u)
        worst = max(worst, float(np.max(np.abs(field_strength(Ap, x) - expected))))
    return worst


def covariance_slope(A: ConnectionField, upsilon: Field, points, eps=(1e-2, 1e-3)):
    """Observed order p in defect ~ eps^p from the two largest-to-smallest eps values."""
    d = [covariance_defect(A, upsilon, e, points) for e in eps]
    if min(d) == 0.0:
        return float("inf"), d
    slope = np.polyfit(np.log(eps), np.log(d), 1)[0]
    return float(slope), d


# fiber actions and covariant generators -----------------------------------------------

def _linear_fiber(F: np.ndarray):
    M = -np.asarray(F, dtype=float)  # M[k, i, j]: X~_i(u)^k = M[k, i, j] u^j

    def fields(u):
        m = F.shape[0]
        return [[sum((M[k, i, j] * u[j] for j in range(m) if M[k, i, j]), 0.0) for k in range(m)]
                for i in range(m)]

    return fields


def _translation_fiber(F: np.ndarray):
    m = F.shape[0]
    eye = np.eye(m)
    return lambda u: [[float(eye[i, k]) for k in range(m)] for i in range(m)]


_FIBER_ACTIONS = {
    "abelian": _translation_fiber,
    "sphere_rotation": _linear_fiber,
}


def register_fiber_action(kind: str, factory: Callable[[np.ndarray], Callable]):
    """``factory(F~)`` returns u -> list of component lists of X~_i(u)."""
    _FIBER_ACTIONS[kind] = factory


def fiber_fields(group: LieGroupChart) -> Callable:
    try:
        factory = _FIBER_ACTIONS[group.kind]
    except KeyError:
        raise NoFiberAction(f"no fiber action registered for {group!r}") from None
    F = group.constants if group.constants is not None else structure_constants(group)
    return factory(np.asarray(F, dtype=float))


@dataclass(frozen=True)
class GeneratorSet:
    """Vector fields on the product chart z = (x, u), each z -> component list.

    ``coordinate`` are d_mu, ``horizontal`` are X_mu = d_mu + A^i_mu X~_i and
    ``vertical`` are X~_i.
    """

    n: int
    m: int
    coordinate: tuple
    horizontal: tuple
    vertical: tuple

    @property
    def all(self) -> tuple:
        return self.coordinate + self.horizontal + self.vertical

    def at(self, z) -> np.ndarray:
        """Rows are the 2n + dim V fields evaluated at z."""
        return np.array([[float(c) for c in X(list(z))] for X in self.all])


def covariant_generators(A: ConnectionField) -> GeneratorSet:
    n, m = A.ncoords, A.group.dim
    tilde = fiber_fields(A.group)

    def coord(mu):
        return lambda z: [1.0 if k == mu else 0.0 for k in range(n)] + [0.0] * m

    def vert(i):
        return lambda z: [0.0] * n + list(tilde(z[n:])[i])

    def horiz(mu):
        def X(z):
            a = A.A(z[:n])
            t = tilde(z[n:])
            fiber = [sum((a[i, mu] * t[i][k] for i in range(1, m)), a[0, mu] * t[0][k])
                     for k in range(m)]
            return [1.0 if k == mu else 0.0 for k in range(n)] + fiber
        return X

    return GeneratorSet(
        n, m,
        tuple(coord(mu) for mu in range(n)),
        tuple(horiz(mu) for mu in range(n)),
        tuple(vert(i) for i in range(m)),
    )


def lie_bracket(X: Callable, Y: Callable, z) -> np.ndarray:
    """[X, Y]^k = X^l d_l Y^k - Y^l d_l X^k with jet derivatives."""
    z = [float(v) for v in z]
    space = jet_space(len(z), 1)
    zj = Jet.seed(space, z)
    Xj = Jet.stack(X(zj), space=space)
    Yj = Jet.stack(Y(zj), space=space)
    dX, dY = Xj.derivatives(1), Yj.derivatives(1)  # [k, l]
    return dY @ Xj.value - dX @ Yj.value


def generator_commutator_residual(A: ConnectionField, z) -> float:
    """max |[X_mu, X_nu] - F^i_{mu nu} X~_i| at the product point z (jet path)."""
    gens = covariant_generators(A)
    n = A.ncoords
    F = field_strength(A, z[:n])
    V = np.array([X(list(z)) for X in gens.vertical], dtype=float)
    worst = 0.0
    for mu in range(n):
        for nu in range(mu + 1, n):
            br = lie_bracket(gens.horizontal[mu], gens.horizontal[nu], z)
            worst = max(worst, float(np.max(np.abs(br - F[:, mu, nu] @ V))))
    return worst


def right_invariance_residual(A: ConnectionField, z) -> float:
    """max |[X_mu, X~_i] - A^j_mu F~^k_{ji} X~_k| at z.

    The horizontal distribution is carried into itself by the vertical flows up
    to a term linear in A with the structure constants as coefficients.
    """
    gens = covariant_generators(A)
    n = A.ncoords
    a = A(z[:n])
    Ft = A.constants
    V = np.array([X(list(z)) for X in gens.vertical], dtype=float)
    worst = 0.0
    for mu in range(n):
        for i in range(A.group.dim):
            br = lie_bracket(gens.horizontal[mu], gens.vertical[i], z)
            expected = np.einsum("j,kj,kc->c", a[:, mu], Ft[:, :, i], V)
            worst = max(worst, float(np.max(np.abs(br - expected))))
    return worst
