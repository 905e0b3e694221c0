"""Finite-parameter Lie groups in a chart around the identity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ChartOverflow, JacobiViolated, UnknownVariable
from .expr_dsl import compile_expr, parse, variables
from .jets import Jet, jet_space
from .numerics import newton_solve


@dataclass(frozen=True)
class LieGroupChart:
    """A Lie group in coordinates with the identity at the origin.

    ``mult(a, b)`` returns the coordinates of ``a . b`` as a list; it must work on
    floats and on jets. ``kind`` names built-in families (``"abelian"``,
    ``"sphere_rotation"``, ``"bch"``, ``"expr"``) and is used to look up
    registered fiber actions.
    """

    dim: int
    mult: Callable[[Sequence, Sequence], list]
    kind: str = "expr"
    constants: np.ndarray | None = None
    chart_radius: float = np.inf
    inverse_map: Callable[[Sequence], list] | None = None
    label: str = ""
    meta: Mapping = field(default_factory=dict)

    def __repr__(self):
        return f"LieGroupChart({self.label or self.kind}, dim={self.dim})"


def abelian(n: int, chart_radius: float = np.inf) -> LieGroupChart:
    """The additive group R^n."""
    return LieGroupChart(
        dim=n,
        mult=lambda a, b: [x + y for x, y in zip(a, b)],
        kind="abelian",
        constants=np.zeros((n, n, n)),
        chart_radius=chart_radius,
        inverse_map=lambda a: [-x for x in a],
        label=f"abelian({n})",
    )


def from_expressions(
    left: Sequence[str],
    right: Sequence[str],
    exprs: Sequence[str],
    constants: Mapping[str, float] | None = None,
    inverse: Sequence[str] | None = None,
    chart_radius: float = np.inf,
) -> LieGroupChart:
    """Group law given as expressions in the parameter names ``left`` and ``right``."""
    left, right = list(left), list(right)
    n = len(left)
    if len(right) != n or len(exprs) != n:
        raise ValueError("left, right and exprs must all have the group dimension")
    consts = dict(constants or {})
    allowed = set(left) | set(right) | set(consts)
    parsed = [parse(e) if isinstance(e, str) else e for e in exprs]
    for k, e in enumerate(parsed):
        unknown = variables(e) - allowed
        if unknown:
            raise UnknownVariable(f"mult[{k}] uses undeclared variables {sorted(unknown)}")
    compiled = [compile_expr(e) for e in parsed]

    def mult(a, b):
        env = dict(consts)
        env.update(zip(left, a))
        env.update(zip(right, b))
        return [f(env) for f in compiled]

    inverse_map = None
    if inverse is not None:
        inv_compiled = [compile_expr(parse(e)) for e in inverse]

        def inverse_map(a):
            env = dict(consts)
            env.update(zip(left, a))
            return [f(env) for f in inv_compiled]

    return LieGroupChart(n, mult, "expr", None, chart_radius, inverse_map, label="expr")


def bracket(F: np.ndarray, a, b) -> list:
    """Lie bracket [a, b]^g = F^g_{ab} a^a b^b on coordinates (floats or jets)."""
    n = F.shape[0]
    out = []
    for g in range(n):
        acc = 0.0
        for i in range(n):
            for j in range(n):
                c = F[g, i, j]
                if c:
                    acc = acc + c * (a[i] * b[j])
        out.append(acc)
    return out


def jacobi_residual(F: np.ndarray) -> float:
    """max |sum_cyc F^d_{as} F^s_{bc}| over all index choices."""
    F = np.asarray(F, dtype=float)
    t = np.einsum("das,sbc->dabc", F, F)
    cyc = t + np.transpose(t, (0, 2, 3, 1)) + np.transpose(t, (0, 3, 1, 2))
    return float(np.max(np.abs(cyc))) if cyc.size else 0.0


def check_structure_constants(F, tol: float = 1e-10) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    if F.shape != (n, n, n):
        raise ValueError("structure constants must have shape (n, n, n)")
    if not np.array_equal(F, -np.transpose(F, (0, 2, 1))):
        raise JacobiViolated("structure constants are not antisymmetric in the lower pair")
    res = jacobi_residual(F)
    if res > tol:
        raise JacobiViolated(f"Jacobi identity residual {res:.3e} exceeds {tol:.1e}")
    return F


def bch_chart_from_constants(F, order: int = 3, chart_radius: float = 1.0, kind: str = "bch",
                             label: str = "") -> LieGroupChart:
    """Truncated Baker-Campbell-Hausdorff group law realizing the constants ``F``.

    order 2: a + b + [a,b]/2; order 3 adds ([a,[a,b]] + [b,[b,a]])/12.
    """
    if order not in (2, 3):
        raise ValueError("BCH order must be 2 or 3")
    F = check_structure_constants(F)
    F.setflags(write=False)

    def mult(a, b):
        ab = bracket(F, a, b)
        out = [x + y + 0.5 * z for x, y, z in zip(a, b, ab)]
        if order == 3:
            aab = bracket(F, a, ab)
            bba = bracket(F, b, [-z for z in ab])
            out = [o + (p + q) / 12.0 for o, p, q in zip(out, aab, bba)]
        return out

    return LieGroupChart(F.shape[0], mult, kind, F, chart_radius, label=label or f"bch{order}")


def sphere_rotation_group(R: float, order: int = 3, chart_radius: float = 1.0) -> LieGroupChart:
    """Rotation group of the sphere of radius R with constants F^3_12 = 1/R^2,
    F^2_13 = -1, F^1_23 = 1 (plus antisymmetric partners)."""
    if not R > 0:
        raise ValueError("radius must be positive")
    F = np.zeros((3, 3, 3))
    F[2, 0, 1], F[2, 1, 0] = 1.0 / R**2, -1.0 / R**2
    F[1, 0, 2], F[1, 2, 0] = -1.0, 1.0
    F[0, 1, 2], F[0, 2, 1] = 1.0, -1.0
    g = bch_chart_from_constants(F, order, chart_radius, kind="sphere_rotation",
                                 label=f"sphere_rotation({R:g})")
    return g


def compose(G: LieGroupChart, a, b) -> np.ndarray:
    """Coordinates of the product ``a . b``; raises ChartOverflow outside the chart."""
    out = np.array(G.mult(list(a), list(b)), dtype=float)
    if np.max(np.abs(out), initial=0.0) > G.chart_radius:
        raise ChartOverflow(f"product {out} leaves the chart of radius {G.chart_radius}")
    return out


def inverse(G: LieGroupChart, a, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Solve ``a . y = 0`` for y (closed form when the chart provides one)."""
    a = [float(v) for v in a]
    if G.inverse_map is not None:
        return np.array(G.inverse_map(a), dtype=float)
    zero = [0.0] * G.dim
    y = newton_solve(lambda y: G.mult(a, y), zero, [-v for v in a], tol=tol, max_iter=max_iter)
    return np.array(y, dtype=float)


def structure_constants(G: LieGroupChart) -> np.ndarray:
    """F^g_{ab} = d2 phi^g/da^a db^b - d2 phi^g/da^b db^a at the identity."""
    n = G.dim
    space = jet_space(2 * n, 2)
    a = Jet.seed(space, [0.0] * n)
    b = Jet.seed(space, [0.0] * n, offset=n)
    phi = G.mult(a, b)
    gamma = np.zeros((n, n, n))
    for g, comp in enumerate(phi):
        if not isinstance(comp, Jet):
            continue
        for i in range(n):
            for j in range(n):
                gamma[g, i, j] = comp.partial(i, n + j)
    return gamma - np.transpose(gamma, (0, 2, 1))


def identity_residual(G: LieGroupChart, a) -> float:
    zero = [0.0] * G.dim
    left = np.array(G.mult(list(a), zero), dtype=float)
    right = np.array(G.mult(zero, list(a)), dtype=float)
    return float(max(np.max(np.abs(left - a)), np.max(np.abs(right - a))))


def associativity_residual(G: LieGroupChart, a, b, c) -> float:
    ab_c = G.mult(G.mult(list(a), list(b)), list(c))
    a_bc = G.mult(list(a), G.mult(list(b), list(c)))
    return float(np.max(np.abs(np.array(ab_c, dtype=float) - np.array(a_bc, dtype=float))))


def parse_builtin(spec: str) -> LieGroupChart:
    """Parse ``"abelian(n)"``, ``"translation(n)"``, ``"so3"`` or ``"sphere_rotation(R)"``."""
    text = spec.replace(" ", "")
    name, _, rest = text.partition("(")
    arg = rest[:-1] if rest.endswith(")") else None
    if name in ("abelian", "translation") and arg:
        return abelian(int(arg))
    if name == "sphere_rotation" and arg:
        return sphere_rotation_group(float(arg))
    if name == "so3" and not rest:
        return sphere_rotation_group(1.0)
    raise ValueError(f"unknown builtin group {spec!r}")


__all__ = [
    "LieGroupChart", "abelian", "from_expressions", "bracket", "jacobi_residual",
    "check_structure_constants", "bch_chart_from_constants", "sphere_rotation_group",
    "compose", "inverse", "structure_constants", "identity_residual",
    "associativity_residual", "parse_builtin",
]
