"""scikit-learn style transformers: chart points in, flattened tensor components out.

Each transformer maps an array of points ``X`` with shape (n_samples, n_coords)
to (n_samples, n_components), components in lexicographic index order. The
geometric object is a constructor parameter, so ``get_params``/``set_params``
and ``clone`` behave as usual.

    >>> est = RiemannTransformer(christoffel=gamma).fit(points)
    >>> est.transform(points).shape
    (50, 16)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .deformed_group import DeformedGroup, curvature_coeffs, generators, structure_functions
from .errors import DeformGeoError
from .fields import Field
from .gauge_bundle import ConnectionField, field_strength
from .grid import component_names
from .riemann_geom import (
    VierbeinField,
    christoffel,
    gaussian_curvature,
    metric_from_vierbein,
    riemann_tensor,
    scalar_curvature,
)


class _PointTransformer(TransformerMixin, BaseEstimator):
    symbol = "T"
    index_labels: tuple = ()

    def _ncoords(self) -> int:
        raise NotImplementedError

    def _shape(self) -> tuple:
        raise NotImplementedError

    def _at(self, x) -> np.ndarray:
        raise NotImplementedError

    def _check_points(self, X):
        X = check_array(X, dtype=np.float64, ensure_min_features=1)
        n = self._ncoords()
        if X.shape[1] != n:
            raise ValueError(f"expected points with {n} coordinates, got {X.shape[1]}")
        return X

    def fit(self, X, y=None):
        X = self._check_points(X)
        self.n_features_in_ = X.shape[1]
        self.feature_names_out_ = np.array(component_names(self.symbol, self._shape()), dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "feature_names_out_")
        X = self._check_points(X)
        out = np.empty((X.shape[0], len(self.feature_names_out_)))
        for k, x in enumerate(X):
            try:
                out[k] = np.asarray(self._at(x), dtype=float).reshape(-1)
            except DeformGeoError as exc:
                if exc.point is None:
                    exc.point = x.tolist()
                raise
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return self.feature_names_out_


class MetricTransformer(_PointTransformer):
    """g_{mu nu} = h^m_mu h^n_nu eta_mn."""

    symbol = "g"
    index_labels = ("mu", "nu")

    def __init__(self, vierbein: VierbeinField | None = None):
        self.vierbein = vierbein

    def _ncoords(self):
        return self.vierbein.ncoords

    def _shape(self):
        return (self.vierbein.ncoords,) * 2

    def _at(self, x):
        return metric_from_vierbein(self.vierbein, x)[0]


class ChristoffelTransformer(_PointTransformer):
    symbol = "Gamma"
    index_labels = ("rho", "mu", "nu")

    def __init__(self, metric: Field | None = None):
        self.metric = metric

    def _ncoords(self):
        return self.metric.ncoords

    def _shape(self):
        return (self.metric.ncoords,) * 3

    def _at(self, x):
        return christoffel(self.metric, x)


class RiemannTransformer(_PointTransformer):
    symbol = "R"
    index_labels = ("mu", "rho", "pi", "nu")

    def __init__(self, christoffel: Field | None = None):
        self.christoffel = christoffel

    def _ncoords(self):
        return self.christoffel.ncoords

    def _shape(self):
        return (self.christoffel.ncoords,) * 4

    def _at(self, x):
        return riemann_tensor(self.christoffel, x)


class ScalarCurvatureTransformer(_PointTransformer):
    """Scalar curvature, plus the Gaussian curvature K for two-dimensional charts."""

    symbol = "curvature"
    index_labels = ("quantity",)

    def __init__(self, metric: Field | None = None):
        self.metric = metric

    def _ncoords(self):
        return self.metric.ncoords

    def _shape(self):
        return (2,) if self.metric.ncoords == 2 else (1,)

    def fit(self, X, y=None):
        super().fit(X, y)
        names = ["scalar", "K"] if self.metric.ncoords == 2 else ["scalar"]
        self.feature_names_out_ = np.array(names, dtype=object)
        return self

    def _at(self, x):
        s = scalar_curvature(self.metric, x)
        return [s, gaussian_curvature(self.metric, x)] if self.metric.ncoords == 2 else [s]


class StructureFunctionTransformer(_PointTransformer):
    """F^a_{bc}(x) of a deformed group."""

    symbol = "F"
    index_labels = ("a", "b", "c")

    def __init__(self, group: DeformedGroup | None = None):
        self.group = group

    def _ncoords(self):
        return self.group.ncoords

    def _shape(self):
        return (self.group.dim,) * 3

    def _at(self, x):
        return structure_functions(self.group, x)


class CurvatureCoefficientTransformer(_PointTransformer):
    """R^a_{dbc}(x) of a deformed group."""

    symbol = "R"
    index_labels = ("a", "d", "b", "c")

    def __init__(self, group: DeformedGroup | None = None):
        self.group = group

    def _ncoords(self):
        return self.group.ncoords

    def _shape(self):
        return (self.group.dim,) * 4

    def _at(self, x):
        return curvature_coeffs(self.group, x)


class GeneratorTransformer(_PointTransformer):
    """xi^mu_a(x), components of the generators X_a = xi^mu_a d_mu."""

    symbol = "xi"
    index_labels = ("mu", "a")

    def __init__(self, group: DeformedGroup | None = None):
        self.group = group

    def _ncoords(self):
        return self.group.ncoords

    def _shape(self):
        return (self.group.ncoords, self.group.dim)

    def _at(self, x):
        return generators(self.group, x)[0]


class FieldStrengthTransformer(_PointTransformer):
    symbol = "F"
    index_labels = ("i", "mu", "nu")

    def __init__(self, connection: ConnectionField | None = None):
        self.connection = connection

    def _ncoords(self):
        return self.connection.ncoords

    def _shape(self):
        m, n = self.connection.A.shape
        return (m, n, n)

    def _at(self, x):
        return field_strength(self.connection, x)
