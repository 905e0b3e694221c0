"""Truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet` stores the Taylor coefficients ``c[alpha] = d^alpha f / alpha!``
of a function of ``nvars`` seed variables, truncated at total degree ``order``.
Arithmetic on jets is exact up to rounding for every stored coefficient, which
makes them the derivative engine of the whole package.

Jets are array-valued: ``coeffs`` has shape ``shape + (n_monomials,)`` and all
operations broadcast over the leading axes.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement, product

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError


class JetSpace:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        monomials = []
        for deg in range(order + 1):
            for combo in combinations_with_replacement(range(nvars), deg):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                monomials.append(tuple(alpha))
        self.monomials = monomials
        self.size = len(monomials)
        self.index = {a: k for k, a in enumerate(monomials)}
        self.degree = np.array([sum(a) for a in monomials])
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in a) for a in monomials], dtype=float
        )

        left, right, target = [], [], []
        for i, a in enumerate(monomials):
            for j, b in enumerate(monomials):
                if sum(a) + sum(b) <= order:
                    left.append(i)
                    right.append(j)
                    target.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self._left = np.array(left)
        self._right = np.array(right)
        scatter = np.zeros((len(target), self.size))
        scatter[np.arange(len(target)), target] = 1.0
        self._scatter = scatter

    def __repr__(self):
        return f"JetSpace(nvars={self.nvars}, order={self.order})"

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a[..., self._left] * b[..., self._right]) @ self._scatter

    @lru_cache(maxsize=None)
    def _diff_map(self, var: int):
        lower = jet_space(self.nvars, self.order - 1)
        src, mult = [], []
        for a in lower.monomials:
            raised = list(a)
            raised[var] += 1
            src.append(self.index[tuple(raised)])
            mult.append(raised[var])
        return lower, np.array(src), np.array(mult, dtype=float)


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


def _is_jet(x) -> bool:
    return isinstance(x, Jet)


class Jet:
    """Array of truncated Taylor expansions sharing one :class:`JetSpace`."""

    __slots__ = ("space", "coeffs")
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, space: JetSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1:] != (space.size,):
            raise ValueError("coefficient axis does not match jet space")
        self.space = space
        self.coeffs = coeffs

    # construction -----------------------------------------------------------
    @classmethod
    def constant(cls, space: JetSpace, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (space.size,))
        coeffs[..., 0] = value
        return cls(space, coeffs)

    @classmethod
    def variable(cls, space: JetSpace, var: int, value: float = 0.0) -> "Jet":
        coeffs = np.zeros(space.size)
        coeffs[0] = value
        if space.order >= 1:
            unit = [0] * space.nvars
            unit[var] = 1
            coeffs[space.index[tuple(unit)]] = 1.0
        return cls(space, coeffs)

    @classmethod
    def seed(cls, space: JetSpace, values, offset: int = 0) -> list["Jet"]:
        """Jets ``values[i] + d(var offset+i)``."""
        return [cls.variable(space, offset + i, v) for i, v in enumerate(values)]

    @classmethod
    def stack(cls, items, space: JetSpace | None = None) -> "Jet":
        """Build a jet array from a (nested) sequence of jets and numbers."""
        flat, shape = _flatten(items)
        if space is None:
            space = next((x.space for x in flat if _is_jet(x)), None)
            if space is None:
                raise ValueError("stack needs at least one jet or an explicit space")
        rows = []
        for x in flat:
            if _is_jet(x):
                if x.space is not space:
                    raise ValueError("mixed jet spaces")
                rows.append(x.coeffs)
            else:
                row = np.zeros(space.size)
                row[0] = float(x)
                rows.append(row)
        return cls(space, np.array(rows).reshape(shape + (space.size,)))

    # structure --------------------------------------------------------------
    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    @property
    def value(self):
        v = self.coeffs[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        if len(key) > len(self.shape) or any(k is Ellipsis for k in key):
            raise IndexError("jets index their leading axes only")
        return Jet(self.space, self.coeffs[key])

    def __len__(self):
        return self.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def __repr__(self):
        return f"Jet(shape={self.shape}, value={self.value}, {self.space})"

    def coefficient(self, alpha) -> np.ndarray | float:
        c = self.coeffs[..., self.space.index[tuple(alpha)]]
        return float(c) if np.ndim(c) == 0 else c

    def partial(self, *variables: int):
        """Mixed partial derivative, e.g. ``j.partial(0, 0, 1)`` = d^3/dx0^2 dx1."""
        alpha = [0] * self.space.nvars
        for v in variables:
            alpha[v] += 1
        if sum(alpha) > self.space.order:
            raise ValueError("derivative order exceeds jet order")
        k = self.space.index[tuple(alpha)]
        c = self.coeffs[..., k] * self.space.factorial[k]
        return float(c) if np.ndim(c) == 0 else c

    def derivatives(self, k: int, variables=None) -> np.ndarray:
        """Symmetric tensor of k-th partials; trailing axes index the variables."""
        variables = range(self.space.nvars) if variables is None else list(variables)
        variables = list(variables)
        out = np.empty(self.shape + (len(variables),) * k)
        for idx in product(range(len(variables)), repeat=k):
            out[(Ellipsis,) + idx] = self.partial(*(variables[i] for i in idx))
        return out

    def diff(self, var: int) -> "Jet":
        """Partial derivative as a jet of one order less."""
        if self.space.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        lower, src, mult = self.space._diff_map(var)
        return Jet(lower, self.coeffs[..., src] * mult)

    def truncate(self, order: int) -> "Jet":
        lower = jet_space(self.space.nvars, order)
        return Jet(lower, self.coeffs[..., : lower.size])

    def transpose(self, *axes) -> "Jet":
        axes = tuple(axes) if axes else tuple(reversed(range(len(self.shape))))
        return Jet(self.space, np.transpose(self.coeffs, axes + (len(self.shape),)))

    def nilpotent(self) -> "Jet":
        c = self.coeffs.copy()
        c[..., 0] = 0.0
        return Jet(self.space, c)

    def compose(self, deltas) -> "Jet":
        """Evaluate this Taylor polynomial at displacements given as jets.

        ``deltas`` are jets (in another space) with zero constant part; the
        result lives in their space. Exact whenever their order does not exceed
        this jet's order.
        """
        if len(deltas) != self.space.nvars:
            raise ValueError("one displacement per variable required")
        target = deltas[0].space
        if target.order > self.space.order:
            raise ValueError("displacement order exceeds the expanded order")
        # powers[v][e] = deltas[v] ** e
        powers = []
        for d in deltas:
            if d.space is not target:
                raise ValueError("mixed jet spaces")
            d = d.nilpotent()
            seq = [None, d]
            for _ in range(2, target.order + 1):
                seq.append(seq[-1] * d)
            powers.append(seq)
        out = np.zeros(self.shape + (target.size,))
        out[..., 0] = self.coeffs[..., 0]
        for k, alpha in enumerate(self.space.monomials):
            deg = sum(alpha)
            if deg == 0 or deg > target.order:
                continue
            term = None
            for v, e in enumerate(alpha):
                if e:
                    term = powers[v][e] if term is None else term * powers[v][e]
            out = out + self.coeffs[..., k, None] * term.coeffs
        return Jet(target, out)

    # arithmetic -------------------------------------------------------------
    def _coeffs_of(self, other):
        if _is_jet(other):
            if other.space is not self.space:
                raise ValueError("mixed jet spaces")
            return other.coeffs
        other = np.asarray(other, dtype=float)
        c = np.zeros(other.shape + (self.space.size,))
        c[..., 0] = other
        return c

    def __add__(self, other):
        return Jet(self.space, self.coeffs + self._coeffs_of(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.space, self.coeffs - self._coeffs_of(other))

    def __rsub__(self, other):
        return Jet(self.space, self._coeffs_of(other) - self.coeffs)

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if _is_jet(other):
            if other.space is not self.space:
                raise ValueError("mixed jet spaces")
            return Jet(self.space, self.space.mul(self.coeffs, other.coeffs))
        return Jet(self.space, self.coeffs * np.asarray(other, dtype=float)[..., None])

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.coeffs[..., 0]
        if np.any(v == 0.0):
            raise DomainError("division by a jet with zero value part")
        k = np.arange(self.space.order + 1)
        derivs = [(-1.0) ** j * math.factorial(j) / v ** (j + 1) for j in k]
        return self._taylor(derivs)

    def __truediv__(self, other):
        if _is_jet(other):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        if np.any(other == 0.0):
            raise DomainError("division by zero")
        return Jet(self.space, self.coeffs / other[..., None])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, (bool, np.bool_)) or int(n) != n:
            raise TypeError("jets support integer powers only")
        n = int(n)
        if n < 0:
            return self.reciprocal() ** (-n)
        result = Jet.constant(self.space, np.ones(self.shape))
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def _taylor(self, derivs) -> "Jet":
        """f(self) given f^(k)(value) for k = 0..order (Horner in the nilpotent part)."""
        u = self.nilpotent()
        order = self.space.order
        result = Jet.constant(self.space, derivs[order] / math.factorial(order))
        for k in range(order - 1, -1, -1):
            result = result * u + derivs[k] / math.factorial(k)
        return result


def _flatten(items):
    if _is_jet(items):
        if items.shape == ():
            return [items], ()
        return [items[k] for k in np.ndindex(items.shape)], items.shape
    if isinstance(items, (list, tuple)):
        if not items:
            return [], (0,)
        parts = [_flatten(x) for x in items]
        inner = parts[0][1]
        if any(p[1] != inner for p in parts):
            raise ValueError("ragged nesting")
        return [x for p in parts for x in p[0]], (len(items),) + inner
    arr = np.asarray(items, dtype=float)
    if arr.ndim == 0:
        return [float(arr)], ()
    return list(arr.reshape(-1)), arr.shape


# elementary functions ------------------------------------------------------

def _cyclic(value, table, order):
    return [table[k % len(table)](value) for k in range(order + 1)]


def _poly_derivs(t, order, sign):
    """Derivatives of tan (sign=+1) or tanh (sign=-1) as polynomials in t."""
    poly = np.array([0.0, 1.0])
    out = []
    for _ in range(order + 1):
        out.append(P.polyval(t, poly))
        poly = P.polymul([1.0, 0.0, sign], P.polyder(poly))
    return out


def jet_sin(x: Jet) -> Jet:
    v = x.coeffs[..., 0]
    return x._taylor(_cyclic(v, [np.sin, np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a)], x.space.order))


def jet_cos(x: Jet) -> Jet:
    v = x.coeffs[..., 0]
    return x._taylor(_cyclic(v, [np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a), np.sin], x.space.order))


def jet_tan(x: Jet) -> Jet:
    v = x.coeffs[..., 0]
    if np.any(np.cos(v) == 0.0):
        raise DomainError("tan at a pole")
    return x._taylor(_poly_derivs(np.tan(v), x.space.order, 1.0))


def jet_exp(x: Jet) -> Jet:
    e = np.exp(x.coeffs[..., 0])
    if not np.all(np.isfinite(e)):
        raise DomainError("exp overflow")
    return x._taylor([e] * (x.space.order + 1))


def jet_log(x: Jet) -> Jet:
    v = x.coeffs[..., 0]
    if np.any(v <= 0.0):
        raise DomainError("log of a nonpositive value")
    derivs = [np.log(v)] + [
        (-1.0) ** (k - 1) * math.factorial(k - 1) / v**k for k in range(1, x.space.order + 1)
    ]
    return x._taylor(derivs)


def jet_sqrt(x: Jet) -> Jet:
    v = x.coeffs[..., 0]
    if np.any(v < 0.0) or (x.space.order > 0 and np.any(v == 0.0)):
        raise DomainError("sqrt of a negative value (or non-differentiable at 0)")
    derivs, c = [], 1.0
    for k in range(x.space.order + 1):
        derivs.append(c * v ** (0.5 - k))
        c *= 0.5 - k
    return x._taylor(derivs)


def jet_sinh(x: Jet) -> Jet:
    return x._taylor(_cyclic(x.coeffs[..., 0], [np.sinh, np.cosh], x.space.order))


def jet_cosh(x: Jet) -> Jet:
    return x._taylor(_cyclic(x.coeffs[..., 0], [np.cosh, np.sinh], x.space.order))


def jet_tanh(x: Jet) -> Jet:
    return x._taylor(_poly_derivs(np.tanh(x.coeffs[..., 0]), x.space.order, -1.0))


# tensor helpers -------------------------------------------------------------

def jeinsum(subscripts: str, a, b):
    """Two-operand einsum where either operand may be a :class:`Jet` array."""
    inputs, out = subscripts.replace(" ", "").split("->")
    sa, sb = inputs.split(",")
    if _is_jet(a) and _is_jet(b):
        if a.space is not b.space:
            raise ValueError("mixed jet spaces")
        sp = a.space
        pa = a.coeffs[..., sp._left]
        pb = b.coeffs[..., sp._right]
        return Jet(sp, np.einsum(f"{sa}Z,{sb}Z->{out}Z", pa, pb) @ sp._scatter)
    if _is_jet(a):
        return Jet(a.space, np.einsum(f"{sa}Z,{sb}->{out}Z", a.coeffs, np.asarray(b, dtype=float)))
    if _is_jet(b):
        return Jet(b.space, np.einsum(f"{sa},{sb}Z->{out}Z", np.asarray(a, dtype=float), b.coeffs))
    return np.einsum(subscripts, a, b)


def jet_inv(a: Jet) -> Jet:
    """Inverse of a square jet matrix (Neumann series around its value part)."""
    a0 = a.coeffs[..., 0]
    inv0 = np.linalg.inv(a0)
    step = -jeinsum("ij,jk->ik", inv0, a.nilpotent())
    term = Jet.constant(a.space, np.eye(a0.shape[0]))
    total = term
    for _ in range(a.space.order):
        term = jeinsum("ij,jk->ik", step, term)
        total = total + term
    return jeinsum("ij,jk->ik", total, inv0)


def jet_det(a: Jet) -> Jet:
    """Determinant of a small square jet matrix by cofactor expansion."""
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    total = None
    for j in range(n):
        rows = [r for r in range(1, n)]
        cols = [c for c in range(n) if c != j]
        minor = Jet(a.space, a.coeffs[np.ix_(rows, cols)])
        term = a[0, j] * jet_det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total


def as_value(x):
    """Plain value of a jet or number (arrays pass through)."""
    return x.value if _is_jet(x) else x
