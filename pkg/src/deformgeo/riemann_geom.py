"""Riemannian structure carried by deformed translation groups.

Index conventions (all arrays):

* vierbein ``h[m, mu]`` = h^m_mu, inverse ``hinv[mu, m]`` = h^mu_m
* metric ``g[mu, nu] = h^m_mu h^n_nu eta_mn``
* Christoffel ``Gamma[rho, mu, nu]`` = Gamma^rho_{mu nu}
* Riemann ``R[mu, rho, pi, nu]`` = d_pi Gamma^mu_{nu rho} - d_nu Gamma^mu_{pi rho}
  + Gamma^mu_{pi sigma} Gamma^sigma_{nu rho} - Gamma^mu_{nu sigma} Gamma^sigma_{pi rho}
* anholonomy ``F[n, mu, nu] = -(d_mu h^n_nu - d_nu h^n_mu)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .deformed_group import (
    ChartDomain,
    CoefficientDeformation,
    DeformedGroup,
    GaugeGroup,
    translation_action,
)
from .errors import ChartExit, DegenerateMetric, DegenerateVierbein, SingularSystem
from .fields import ConstantField, DerivedField, ExprField, Field, as_field
from .jets import Jet, jeinsum, jet_inv, jet_space
from .lie_core import abelian


def flat_metric(n: int, signature: str = "euclidean") -> np.ndarray:
    if signature == "euclidean":
        return np.eye(n)
    if signature == "lorentzian":
        eta = np.eye(n)
        eta[0, 0] = -1.0
        return eta
    raise ValueError(f"unknown signature {signature!r}")


def _sym(j: Jet, a: int, b: int) -> Jet:
    axes = list(range(len(j.shape)))
    axes[a], axes[b] = axes[b], axes[a]
    return 0.5 * (j + j.transpose(*axes))


def _grad(j: Jet) -> Jet:
    """Stack of partials, new leading axis indexes the differentiation variable."""
    return Jet.stack([j.diff(s) for s in range(j.space.nvars)])


def _safe_inv(j: Jet, exc, what, x0):
    try:
        inv = jet_inv(j)
    except np.linalg.LinAlgError:
        raise exc(f"{what} is singular at {list(x0)}") from None
    return inv


@dataclass(frozen=True)
class VierbeinField:
    """Frame field h^m_mu(x) together with the flat metric eta."""

    h: Field
    eta: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.h.shape[0]
        if self.h.shape != (n, n):
            raise ValueError("vierbein must be a square matrix field")
        if self.eta is None:
            object.__setattr__(self, "eta", np.eye(n))

    @classmethod
    def from_expressions(cls, exprs, coords, constants=None, signature="euclidean"):
        f = as_field(exprs, coords, constants)
        return cls(f, flat_metric(f.shape[0], signature))

    @property
    def ncoords(self) -> int:
        return self.h.shape[0]

    def matrix(self, x) -> np.ndarray:
        h = np.asarray(self.h(list(x)), dtype=float)
        det = np.linalg.det(h)
        if abs(det) < 1e-8:
            raise DegenerateVierbein(f"det h = {det:.3e} at {list(x)}")
        return h

    def inverse(self, x) -> np.ndarray:
        """h^mu_m as hinv[mu, m]."""
        return np.linalg.inv(self.matrix(x))


# metric ------------------------------------------------------------------------

def metric_taylor(vb: VierbeinField, x0, order: int) -> Jet:
    H = vb.h.taylor(x0, order)
    g = jeinsum("mi,mj->ij", jeinsum("mn,ni->mi", vb.eta, H), H)
    return _sym(g, 0, 1)


def metric_field(vb: VierbeinField) -> Field:
    n = vb.ncoords
    return DerivedField((n, n), n, lambda x0, k: metric_taylor(vb, x0, k))


def metric_from_expressions(exprs, coords, constants=None) -> Field:
    return as_field(exprs, coords, constants)


def metric_from_vierbein(vb: VierbeinField, x):
    """(g, g^-1) at x."""
    h = vb.matrix(x)
    g = h.T @ vb.eta @ h
    g = 0.5 * (g + g.T)
    return g, np.linalg.inv(g)


def vierbein_from_metric(g: Field) -> VierbeinField:
    """Euclidean vierbein from a Riemannian metric by jet Cholesky (h = L^T)."""
    n = g.shape[0]

    def expand(x0, k):
        G = g.taylor(x0, k)
        L = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1):
                acc = G[i, j]
                for p in range(j):
                    acc = acc - L[i][p] * L[j][p]
                if i == j:
                    if acc.value <= 0.0:
                        raise DegenerateMetric(f"metric not positive definite at {list(x0)}")
                    from .jets import jet_sqrt

                    L[i][j] = jet_sqrt(acc)
                else:
                    L[i][j] = acc / L[j][j]
        return Jet.stack(L, space=G.space).transpose(1, 0)

    return VierbeinField(DerivedField((n, n), n, expand), np.eye(n))


# Christoffel & curvature ---------------------------------------------------------

def christoffel_taylor(g: Field, x0, order: int) -> Jet:
    G = g.taylor(x0, order + 1)
    dg = _grad(G)  # dg[s, m, n] = d_s g_mn
    Gk = _sym(G.truncate(order), 0, 1)
    ginv = _safe_inv(Gk, DegenerateMetric, "metric", x0)
    # lower[s, m, n] = 1/2 (d_m g_ns + d_n g_ms - d_s g_mn)
    lower = 0.5 * (dg.transpose(2, 0, 1) + dg.transpose(2, 1, 0) - dg)
    gamma = jeinsum("rs,smn->rmn", ginv, lower)
    return _sym(gamma, 1, 2)


def christoffel_field(g: Field) -> Field:
    n = g.shape[0]
    return DerivedField((n, n, n), n, lambda x0, k: christoffel_taylor(g, x0, k))


def christoffel(g: Field, x) -> np.ndarray:
    """Gamma[rho, mu, nu] = 1/2 g^{rho sigma}(d_mu g_{nu sigma} + d_nu g_{mu sigma} - d_sigma g_{mu nu})."""
    return christoffel_taylor(g, np.asarray(x, dtype=float), 0).value


def riemann_taylor(gamma: Field, x0, order: int) -> Jet:
    GT = gamma.taylor(x0, order + 1)
    dG = _grad(GT)  # dG[p, m, n, r] = d_p Gamma^m_{nr}
    Gk = GT.truncate(order)
    lin = dG.transpose(1, 3, 0, 2)  # [m, r, p, n] = d_p Gamma^m_{n r}
    quad = jeinsum("mps,snr->mrpn", Gk, Gk)
    both = lin + quad
    return both - both.transpose(0, 1, 3, 2)


def riemann_field(gamma: Field) -> Field:
    n = gamma.shape[0]
    return DerivedField((n,) * 4, n, lambda x0, k: riemann_taylor(gamma, x0, k))


def riemann_tensor(gamma: Field, x) -> np.ndarray:
    """R[mu, rho, pi, nu], antisymmetric in (pi, nu)."""
    return riemann_taylor(gamma, np.asarray(x, dtype=float), 0).value


def ricci_tensor(R: np.ndarray) -> np.ndarray:
    """Ric[rho, nu] = R^mu_{rho mu nu}."""
    return np.einsum("mrmn->rn", R)


def scalar_curvature(g: Field, x) -> float:
    x = np.asarray(x, dtype=float)
    ginv = np.linalg.inv(g(list(x)))
    R = riemann_tensor(christoffel_field(g), x)
    return float(np.einsum("rn,rn->", ginv, ricci_tensor(R)))


def gaussian_curvature(g: Field, x) -> float:
    """R_{0101} / det g for a two-dimensional metric."""
    x = np.asarray(x, dtype=float)
    G = np.asarray(g(list(x)), dtype=float)
    if G.shape != (2, 2):
        raise ValueError("Gaussian curvature needs a 2-dimensional chart")
    R = riemann_tensor(christoffel_field(g), x)
    return float(G[0] @ R[:, 1, 0, 1] / np.linalg.det(G))


def bianchi_residual(R: np.ndarray) -> float:
    """max |R^m_{rpn} + R^m_{pnr} + R^m_{nrp}|."""
    cyc = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(cyc)))


# anholonomy and frame quantities ---------------------------------------------------

def _anholonomy_jet(vb: VierbeinField, x0, order: int) -> Jet:
    dh = _grad(vb.h.taylor(x0, order + 1))  # dh[s, m, n] = d_s h^m_n
    t = dh.transpose(1, 0, 2)  # [m, s, n]
    return -(t - t.transpose(0, 2, 1))


def anholonomy(vb: VierbeinField, x) -> np.ndarray:
    """F[n, mu, nu] = -(d_mu h^n_nu - d_nu h^n_mu)."""
    return _anholonomy_jet(vb, np.asarray(x, dtype=float), 0).value


def _latin_anholonomy_jet(vb: VierbeinField, x0, order: int) -> Jet:
    F = _anholonomy_jet(vb, x0, order)
    H = vb.h.taylor(x0, order)
    hinv = _safe_inv(H, DegenerateVierbein, "vierbein", x0)  # [mu, m]
    return jeinsum("mun,nq->muq", jeinsum("mvn,vp->mpn", F, hinv), hinv)


def anholonomy_latin(vb: VierbeinField, x) -> np.ndarray:
    """F^m_{pq} = F^m_{mu nu} h^mu_p h^nu_q, the structure functions in frame indices."""
    return _latin_anholonomy_jet(vb, np.asarray(x, dtype=float), 0).value


def covariant_derivative(tau: Field, gamma: Field, x) -> np.ndarray:
    """nabla[mu, nu] = d_nu tau^mu + Gamma^mu_{sigma nu} tau^sigma."""
    x = np.asarray(x, dtype=float)
    T = tau.taylor(x, 1)
    dtau = T.derivatives(1)  # [mu, nu]
    G = gamma(list(x))
    return dtau + np.einsum("msn,s->mn", G, T.value)


def metric_compatibility(g: Field, gamma: Field, x) -> np.ndarray:
    """nabla_r g_mn = d_r g_mn - Gamma^s_{rm} g_sn - Gamma^s_{rn} g_ms, as [r, m, n]."""
    x = np.asarray(x, dtype=float)
    G = g.taylor(x, 1)
    dg = np.moveaxis(G.derivatives(1), -1, 0)
    g0 = G.value
    Gam = gamma(list(x))
    return dg - np.einsum("srm,sn->rmn", Gam, g0) - np.einsum("srn,ms->rmn", Gam, g0)


def metric_compat_gamma(vb: VierbeinField, x) -> np.ndarray:
    """Solve gamma_{msn} + gamma_{nsm} = 0 for a symmetric Gamma.

    gamma^m_{pn} = h^m_mu (Gamma^mu_{pn} + h^nu_p d_nu h^mu_n) with Greek/Latin
    conversion by the vierbein, frame indices lowered with eta.
    """
    x = np.asarray(x, dtype=float)
    n = vb.ncoords
    H = vb.h.taylor(x, 1)
    hinvj = _safe_inv(H, DegenerateVierbein, "vierbein", x)  # [mu, m]
    h = H.value
    hinv = hinvj.value
    dhinv = hinvj.derivatives(1)  # [mu, m, nu] = d_nu h^mu_m
    eta = vb.eta

    def gamma_frame(Gam):
        conv = np.einsum("uvr,vp,rq->upq", Gam, hinv, hinv)
        deriv = np.einsum("vp,uqv->upq", hinv, dhinv)
        return np.einsum("mu,upq->mpq", h, conv + deriv)

    def residual(Gam):
        low = np.einsum("mk,kpq->mpq", eta, gamma_frame(Gam))  # gamma_{m p q}
        return low + low.transpose(2, 1, 0)

    unknowns = [(u, v, r) for u in range(n) for v in range(n) for r in range(v, n)]
    equations = [(m, s, q) for m in range(n) for s in range(n) for q in range(m, n)]
    c = residual(np.zeros((n, n, n)))
    A = np.zeros((len(equations), len(unknowns)))
    for col, (u, v, r) in enumerate(unknowns):
        unit = np.zeros((n, n, n))
        unit[u, v, r] = unit[u, r, v] = 1.0
        col_res = residual(unit) - c
        A[:, col] = [col_res[e] for e in equations]
    b = -np.array([c[e] for e in equations])
    if np.linalg.matrix_rank(A) < len(unknowns):
        raise SingularSystem(f"metric-compatibility system is singular at {list(x)}")
    sol = np.linalg.solve(A, b)
    Gam = np.zeros((n, n, n))
    for val, (u, v, r) in zip(sol, unknowns):
        Gam[u, v, r] = Gam[u, r, v] = val
    return Gam


# group-theoretic assembly (translation deformation) -----------------------------------

def translation_deformation(vb: VierbeinField, second: Field | str | None = "levi-civita",
                            third: Field | None = None,
                            domain: ChartDomain | None = None) -> DeformedGroup:
    """Deformed translation group with H^m = h^m_mu (t + Gamma t t / 2 + Delta t t t / 6).

    ``second="levi-civita"`` uses the Christoffel symbols of the vierbein metric.
    """
    n = vb.ncoords
    if isinstance(second, str):
        if second != "levi-civita":
            raise ValueError("second must be a field, None or 'levi-civita'")
        second = christoffel_field(metric_field(vb))
    base = GaugeGroup(abelian(n), translation_action, n)
    return DeformedGroup(base, CoefficientDeformation(vb.h, second, third), domain)


def frame_gamma(vb: VierbeinField, gamma: Field, x) -> np.ndarray:
    """gamma^m_{pn} = h^m_mu (Gamma^mu_{pn} + h^nu_p d_nu h^mu_n)."""
    x = np.asarray(x, dtype=float)
    H = vb.h.taylor(x, 1)
    hinvj = jet_inv(H)
    h, hinv, dhinv = H.value, hinvj.value, hinvj.derivatives(1)
    G = np.asarray(gamma(list(x)), dtype=float)
    conv = np.einsum("uvr,vp,rq->upq", G, hinv, hinv)
    deriv = np.einsum("vp,uqv->upq", hinv, dhinv)
    return np.einsum("mu,upq->mpq", h, conv + deriv)


def frame_rho(vb: VierbeinField, gamma: Field, delta: Field | None, x) -> np.ndarray:
    """rho^m_{prn} = h^m_mu (Delta^mu_{prn} - Gamma^mu_{ns} Gamma^s_{pr}
    - h^nu_n d_nu Gamma^mu_{pi rho} h^pi_p h^rho_r), Latin slots via the vierbein."""
    x = np.asarray(x, dtype=float)
    n = vb.ncoords
    h = vb.matrix(x)
    hinv = np.linalg.inv(h)
    GT = gamma.taylor(x, 1)
    G = GT.value
    dG = GT.derivatives(1)  # [mu, pi, rho, nu]
    D = np.zeros((n,) * 4) if delta is None else np.asarray(delta(list(x)), dtype=float)
    D_lat = np.einsum("uabc,ap,br,cq->uprq", D, hinv, hinv, hinv)
    G_lat = np.einsum("uab,ap,bq->upq", G, hinv, hinv)  # Gamma^mu_{pq}
    G_up = np.einsum("su,upq->spq", h, G_lat)  # Gamma^s_{pq}, all Latin
    quad = np.einsum("uqs,spr->uprq", G_lat, G_up)  # Gamma^mu_{n s} Gamma^s_{p r}, n -> q
    deriv = np.einsum("vq,uabv,ap,br->uprq", hinv, dG, hinv, hinv)
    return np.einsum("mu,uprq->mprq", h, D_lat - quad - deriv)


def frame_to_coordinate_riemann(vb: VierbeinField, R_frame: np.ndarray, x) -> np.ndarray:
    """R^mu_{rho pi nu} = h^mu_m R^m_{prn} h^p_rho h^r_pi h^n_nu."""
    h = vb.matrix(x)
    hinv = np.linalg.inv(h)
    return np.einsum("um,mprn,pa,rb,nc->uabc", hinv, R_frame, h, h, h)


def coordinate_to_frame_riemann(vb: VierbeinField, R: np.ndarray, x) -> np.ndarray:
    h = vb.matrix(x)
    hinv = np.linalg.inv(h)
    return np.einsum("mu,uabc,ap,br,cn->mprn", h, R, hinv, hinv, hinv)


# parallel transport -----------------------------------------------------------------

@dataclass(frozen=True)
class Curve:
    """Path x(s), s in [0, 1], with its velocity."""

    point: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]
    steps: int = 200

    @classmethod
    def from_expressions(cls, exprs, constants=None, steps: int = 200, param: str = "s"):
        path = ExprField(list(exprs), [param], constants)

        def point(s):
            return np.asarray(path([s]), dtype=float)

        def velocity(s):
            return path.taylor(np.array([s]), 1).derivatives(1)[:, 0]

        return cls(point, velocity, steps)

    @classmethod
    def segment(cls, a, b, steps: int = 50):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        return cls(lambda s: a + s * (b - a), lambda s: b - a, steps)


@dataclass(frozen=True)
class TransportResult:
    tau: np.ndarray
    end: np.ndarray
    log: np.ndarray  # rows (s, x..., tau...)


def _check_inside(x, domain, s):
    if domain is not None and not domain.contains(x, slack=1e-12):
        raise ChartExit(f"curve leaves the chart box at s={s:.6g}, x={list(x)}")


def parallel_transport(tau0, curve: Curve, gamma: Field, domain: ChartDomain | None = None,
                       steps: int | None = None) -> TransportResult:
    """Integrate d tau^mu/ds = -Gamma^mu_{sigma nu} tau^sigma dx^nu/ds with classical RK4."""
    steps = curve.steps if steps is None else steps
    if steps < 1:
        raise ValueError("steps must be positive")
    tau = np.asarray(tau0, dtype=float).copy()
    h = 1.0 / steps

    def rhs(s, t):
        x = curve.point(s)
        _check_inside(x, domain, s)
        G = np.asarray(gamma(list(x)), dtype=float)
        return -np.einsum("msn,s,n->m", G, t, curve.velocity(s))

    rows = [np.concatenate([[0.0], curve.point(0.0), tau])]
    _check_inside(curve.point(0.0), domain, 0.0)
    for k in range(steps):
        s = k * h
        k1 = rhs(s, tau)
        k2 = rhs(s + h / 2, tau + h / 2 * k1)
        k3 = rhs(s + h / 2, tau + h / 2 * k2)
        k4 = rhs(s + h, tau + h * k3)
        tau = tau + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        rows.append(np.concatenate([[s + h], curve.point(s + h), tau]))
    return TransportResult(tau, curve.point(1.0), np.array(rows))


def holonomy_defect(tau0, x, plane, eps: float, gamma: Field, domain: ChartDomain | None = None,
                    steps_per_leg: int = 40) -> np.ndarray:
    """tau(end) - tau0 after transport around the square x -> x+eps e_mu -> x+eps e_mu+eps e_nu
    -> x+eps e_nu -> x."""
    mu, nu = plane
    x = np.asarray(x, dtype=float)
    e_mu = np.zeros_like(x)
    e_nu = np.zeros_like(x)
    e_mu[mu] = eps
    e_nu[nu] = eps
    corners = [x, x + e_mu, x + e_mu + e_nu, x + e_nu, x]
    tau = np.asarray(tau0, dtype=float)
    for a, b in zip(corners[:-1], corners[1:]):
        tau = parallel_transport(tau, Curve.segment(a, b, steps_per_leg), gamma, domain).tau
    return tau - np.asarray(tau0, dtype=float)


def holonomy_prediction(R: np.ndarray, tau0, plane, eps: float) -> np.ndarray:
    """Leading-order loop defect -R^a_{s mu nu} tau0^s eps^2."""
    mu, nu = plane
    return -np.einsum("as,s->a", R[:, :, mu, nu], np.asarray(tau0, dtype=float)) * eps**2


# general covariance --------------------------------------------------------------------

def vierbein_gauge_transform(vb: VierbeinField, t: Field, eps: float) -> VierbeinField:
    """h'^m_mu = h^m_mu - eps (F^m_{np} h^n_mu t^p + d_mu t^m)."""
    n = vb.ncoords

    def expand(x0, k):
        H = vb.h.taylor(x0, k)
        F = _latin_anholonomy_jet(vb, x0, k)
        T = t.taylor(x0, k + 1)
        dT = _grad(T).transpose(1, 0)  # [m, mu] = d_mu t^m
        Tk = T.truncate(k)
        rot = jeinsum("mup,p->mu", jeinsum("mnp,nu->mup", F, H), Tk)
        return H - eps * (rot + dT)

    return VierbeinField(DerivedField((n, n), n, expand), vb.eta)


def induced_point(vb: VierbeinField, t: Field, eps: float, x) -> np.ndarray:
    """x - eps xi(x) with xi^mu = h^mu_m t^m: the coordinate move matching the transform."""
    x = np.asarray(x, dtype=float)
    return x - eps * (vb.inverse(x) @ np.asarray(t(list(x)), dtype=float))
