"""Derivative-free second witness for every jet-computed quantity.

Everything here differentiates plain float evaluations with central
differences and Richardson extrapolation; nothing imports the jet engine.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .errors import ConditioningWarning, DegenerateMetric, DomainError, StencilExit


@dataclass(frozen=True)
class FDConfig:
    """Base step and number of Richardson extrapolation levels."""

    step: float = 1e-3
    levels: int = 2
    lo: tuple | None = None
    hi: tuple | None = None

    def __post_init__(self):
        if not 1e-6 <= self.step <= 1e-1:
            raise ValueError("FD step must lie in [1e-6, 1e-1]")
        if self.levels not in (1, 2, 3):
            raise ValueError("Richardson levels must be 1, 2 or 3")

    def inside(self, x) -> bool:
        if self.lo is None or self.hi is None:
            return True
        return bool(np.all(x >= np.asarray(self.lo)) and np.all(x <= np.asarray(self.hi)))


DEFAULT = FDConfig()


def _eval(f, x, cfg):
    if not cfg.inside(x):
        raise StencilExit(f"stencil point {list(x)} leaves the box")
    try:
        return np.asarray(f(x), dtype=float)
    except (DomainError, ArithmeticError) as exc:
        raise StencilExit(f"evaluation failed on the stencil at {list(x)}: {exc}") from exc


def _central(f, x, dirs, h, cfg):
    """Mixed central difference with half-width h along each listed direction."""
    k = len(dirs)
    total = 0.0
    for signs in product((1.0, -1.0), repeat=k):
        p = x.copy()
        for s, d in zip(signs, dirs):
            p[d] += s * h
        total = total + np.prod(signs) * _eval(f, p, cfg)
    return total / (2.0 * h) ** k


def fd_partial(f: Callable, x, dirs: Sequence[int], cfg: FDConfig = DEFAULT):
    """(value, error estimate) of d^k f / dx^dirs at x, k = len(dirs) <= 3.

    ``f`` maps a float vector to a float or array. The error estimate is the
    largest gap between the result and the finest entry of every Richardson
    column, so rounding noise in the stencil shows up in it.
    """
    dirs = list(dirs)
    if not 1 <= len(dirs) <= 3:
        raise ValueError("fd_partial supports orders 1 to 3")
    x = np.asarray(x, dtype=float)
    steps = [cfg.step / 2**j for j in range(cfg.levels + 1)]
    columns = [[_central(f, x, dirs, h, cfg) for h in steps]]
    for level in range(1, cfg.levels + 1):
        factor = 4.0**level
        prev = columns[-1]
        columns.append([(factor * prev[j + 1] - prev[j]) / (factor - 1.0) for j in range(len(prev) - 1)])
    value = columns[-1][0]
    err = np.zeros_like(np.abs(value))
    for col in columns[:-1]:
        err = np.maximum(err, np.abs(value - col[-1]))
    return value, err


def fd_gradient(f, x, cfg: FDConfig = DEFAULT) -> np.ndarray:
    """Trailing axis indexes the differentiation variable."""
    x = np.asarray(x, dtype=float)
    return np.stack([fd_partial(f, x, [k], cfg)[0] for k in range(x.size)], axis=-1)


def fd_commutator(X: Callable, Y: Callable, x, cfg: FDConfig = DEFAULT) -> np.ndarray:
    """[X, Y]^mu = X^nu d_nu Y^mu - Y^nu d_nu X^mu with FD derivatives."""
    x = np.asarray(x, dtype=float)
    dX, dY = fd_gradient(X, x, cfg), fd_gradient(Y, x, cfg)
    return dY @ np.asarray(X(x), dtype=float) - dX @ np.asarray(Y(x), dtype=float)


def _warn_if_unstable(value, err, label):
    bad = (err > 0.1 * np.abs(value)) & (err > 1e-7)
    if np.any(bad):
        warnings.warn(f"{label}: Richardson levels disagree by more than 10%", ConditioningWarning,
                      stacklevel=3)


def fd_expansion_from_composition(compose: Callable, n: int, x=None, cfg: FDConfig = DEFAULT,
                                  third: bool = True):
    """(gamma, rho) from the raw two-argument map ``compose(g, g')`` (or
    ``compose(x, g, g')`` when ``x`` is given).

    gamma[a, b, c] = d2 phi^a / dg^b dg'^c and
    rho[a, b, c, d] = d3 phi^a / dg'^b dg'^c dg^d at (0, 0).
    """
    if x is None:
        fun = lambda p: compose(p[:n], p[n:])
    else:
        xx = np.asarray(x, dtype=float)
        fun = lambda p: compose(xx, p[:n], p[n:])
    zero = FDConfig(cfg.step, cfg.levels)  # parameter space carries no chart box
    p0 = np.zeros(2 * n)
    gamma = np.zeros((n, n, n))
    errs = np.zeros((n, n, n))
    for b in range(n):
        for c in range(n):
            gamma[:, b, c], errs[:, b, c] = fd_partial(fun, p0, [b, n + c], zero)
    _warn_if_unstable(gamma, errs, "second-order expansion coefficients")
    if not third:
        return gamma, None
    rho = np.zeros((n, n, n, n))
    errs = np.zeros((n, n, n, n))
    for b in range(n):
        for c in range(b, n):
            for d in range(n):
                val, err = fd_partial(fun, p0, [n + b, n + c, d], zero)
                rho[:, b, c, d] = rho[:, c, b, d] = val
                errs[:, b, c, d] = errs[:, c, b, d] = err
    _warn_if_unstable(rho, errs, "third-order expansion coefficients")
    return gamma, rho


def fd_generators(act: Callable, x, n: int, cfg: FDConfig = DEFAULT) -> np.ndarray:
    """xi[mu, a] = d f^mu(x, g) / dg^a at g = 0."""
    x = np.asarray(x, dtype=float)
    zero = FDConfig(cfg.step, cfg.levels)
    return fd_gradient(lambda g: act(x, g), np.zeros(n), zero)


def fd_anholonomy(h: Callable, x, cfg: FDConfig = DEFAULT) -> np.ndarray:
    """F[n, mu, nu] = -(d_mu h^n_nu - d_nu h^n_mu) with h a plain matrix map."""
    dh = fd_gradient(h, x, cfg)  # [n, nu, mu]
    t = np.transpose(dh, (0, 2, 1))
    return -(t - np.transpose(t, (0, 2, 1)))


def oracle_christoffel(g: Callable, x, cfg: FDConfig = DEFAULT) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    G = _eval(g, x, cfg)
    G = 0.5 * (G + G.T)
    if abs(np.linalg.det(G)) < 1e-12:
        raise DegenerateMetric(f"metric is singular at {list(x)}")
    ginv = np.linalg.inv(G)
    dg = fd_gradient(g, x, cfg)  # [m, n, s] = d_s g_mn
    dg = 0.5 * (dg + np.transpose(dg, (1, 0, 2)))
    # lower[s, m, n] = 1/2 (d_m g_ns + d_n g_ms - d_s g_mn)
    lower = 0.5 * (dg.transpose(1, 2, 0) + dg.transpose(1, 0, 2) - dg.transpose(2, 0, 1))
    gamma = np.einsum("rs,smn->rmn", ginv, lower)
    return 0.5 * (gamma + np.transpose(gamma, (0, 2, 1)))


def oracle_riemann(g: Callable, x, cfg: FDConfig = DEFAULT) -> np.ndarray:
    """R[mu, rho, pi, nu] from FD Christoffel symbols and their FD derivatives."""
    x = np.asarray(x, dtype=float)
    inner = FDConfig(cfg.step / 4, cfg.levels, cfg.lo, cfg.hi)
    Gam = lambda y: oracle_christoffel(g, y, inner)
    G0 = Gam(x)
    dG = fd_gradient(Gam, x, cfg)  # [m, n, r, p] = d_p Gamma^m_{nr}
    lin = np.transpose(dG, (0, 2, 3, 1))  # [m, r, p, n]
    quad = np.einsum("mps,snr->mrpn", G0, G0)
    both = lin + quad
    return both - np.transpose(both, (0, 1, 3, 2))


def oracle_gaussian_curvature(g: Callable, x, cfg: FDConfig = DEFAULT) -> float:
    x = np.asarray(x, dtype=float)
    R = oracle_riemann(g, x, cfg)
    G = np.asarray(g(x), dtype=float)
    return float(G[0] @ R[:, 1, 0, 1] / np.linalg.det(G))


def oracle_field_strength(A: Callable, F_tilde, x, cfg: FDConfig = DEFAULT) -> np.ndarray:
    """F[i, mu, nu] from an FD curl of a plain connection map A(x)[i, mu]."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(A(x), dtype=float)
    dA = fd_gradient(A, x, cfg)  # [i, nu, mu] = d_mu A^i_nu
    curl = np.transpose(dA, (0, 2, 1)) - dA
    return np.einsum("ijk,jm,kn->imn", np.asarray(F_tilde, dtype=float), a, a) + curl


def observed_order(errors, steps) -> float:
    """Log-log slope of error against step."""
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


def max_abs_diff(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), initial=0.0))
