"""Tensor fields over a coordinate chart.

A field can be evaluated at a plain point (returning an ndarray) or at a point
whose coordinates are jets (returning a :class:`Jet` array in that jet space).
Fields built from expressions evaluate directly on jets; derived fields supply
their own Taylor expansion and are composed with the jet displacement.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .expr_dsl import Expr, compile_expr, parse, variables
from .errors import UnknownVariable
from .jets import Jet, jet_space


def _jet_space_of(point):
    for c in point:
        if isinstance(c, Jet):
            return c.space
    return None


def _nest(flat, shape):
    """Row-major nesting of a flat list into lists of the given shape."""
    if not shape:
        return flat[0]
    step = len(flat) // shape[0]
    return [_nest(flat[k * step:(k + 1) * step], shape[1:]) for k in range(shape[0])]


class Field:
    """Base class; subclasses implement :meth:`taylor`."""

    shape: tuple = ()
    ncoords: int = 0

    def taylor(self, x0: np.ndarray, order: int) -> Jet:
        """Expansion around the float point ``x0`` in the chart coordinates."""
        raise NotImplementedError

    def __call__(self, point):
        space = _jet_space_of(point)
        if space is None:
            x0 = np.asarray(point, dtype=float)
            return self.taylor(x0, 0).value
        x0 = np.array([c.value if isinstance(c, Jet) else float(c) for c in point])
        deltas = [
            (c - v) if isinstance(c, Jet) else Jet.constant(space, 0.0) for c, v in zip(point, x0)
        ]
        return self.taylor(x0, space.order).compose(deltas)


class ExprField(Field):
    """A field whose components are expressions in the chart coordinates."""

    def __init__(self, exprs, coords: Sequence[str], constants: Mapping[str, float] | None = None):
        arr = np.array(exprs, dtype=object)
        parsed = np.empty(arr.shape, dtype=object)
        for idx in np.ndindex(arr.shape):
            item = arr[idx]
            parsed[idx] = parse(item) if isinstance(item, str) else item
        self.exprs = parsed
        self.shape = arr.shape
        self.coords = tuple(coords)
        self.ncoords = len(self.coords)
        self.constants = dict(constants or {})
        allowed = set(self.coords) | set(self.constants)
        for idx in np.ndindex(self.shape):
            unknown = variables(self.exprs[idx]) - allowed
            if unknown:
                raise UnknownVariable(
                    f"component {idx} uses undeclared variables {sorted(unknown)}"
                )
        self._compiled = [compile_expr(self.exprs[idx]) for idx in np.ndindex(self.shape)]

    def sources(self):
        from .expr_dsl import to_source

        return np.vectorize(to_source, otypes=[object])(self.exprs).tolist()

    def _eval(self, env):
        return [f(env) for f in self._compiled]

    def taylor(self, x0, order):
        space = jet_space(self.ncoords, order)
        env = dict(self.constants)
        for i, name in enumerate(self.coords):
            env[name] = Jet.variable(space, i, float(x0[i]))
        return Jet.stack(_nest(self._eval(env), self.shape), space=space)

    def __call__(self, point):
        env = dict(self.constants)
        env.update(zip(self.coords, point))
        vals = self._eval(env)
        space = _jet_space_of(point)
        if space is None:
            return np.array(vals, dtype=float).reshape(self.shape)
        return Jet.stack(_nest(vals, self.shape), space=space)


class DerivedField(Field):
    """A field defined by a function producing its Taylor expansion.

    ``expand(x0, order)`` must return a :class:`Jet` of the given shape over
    ``jet_space(ncoords, order)``.
    """

    def __init__(self, shape, ncoords: int, expand: Callable[[np.ndarray, int], Jet]):
        self.shape = tuple(shape)
        self.ncoords = ncoords
        self._expand = expand

    def taylor(self, x0, order):
        return self._expand(np.asarray(x0, dtype=float), order)


class ConstantField(Field):
    def __init__(self, value, ncoords: int):
        self.value = np.asarray(value, dtype=float)
        self.shape = self.value.shape
        self.ncoords = ncoords

    def taylor(self, x0, order):
        return Jet.constant(jet_space(self.ncoords, order), self.value)


def as_field(spec, coords, constants=None, shape=None) -> Field:
    """Coerce expressions, numbers or an existing field to a :class:`Field`."""
    if isinstance(spec, Field):
        return spec
    arr = np.array(spec, dtype=object)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"expected field shape {tuple(shape)}, got {arr.shape}")
    if all(isinstance(v, (int, float)) for v in arr.reshape(-1)):
        return ConstantField(arr.astype(float), len(coords))
    return ExprField(np.vectorize(lambda v: v if isinstance(v, (str, Expr.__args__)) else repr(float(v)),
                                  otypes=[object])(arr), coords, constants)
