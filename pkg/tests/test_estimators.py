import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from conftest import SPHERE_BOX, polar_vierbein, sphere_vierbein
from deformgeo.errors import DegenerateVierbein
from deformgeo.estimators import (
    ChristoffelTransformer,
    CurvatureCoefficientTransformer,
    FieldStrengthTransformer,
    GeneratorTransformer,
    MetricTransformer,
    RiemannTransformer,
    ScalarCurvatureTransformer,
    StructureFunctionTransformer,
)
from deformgeo.gauge_bundle import ConnectionField
from deformgeo.lie_core import sphere_rotation_group
from deformgeo.riemann_geom import christoffel, christoffel_field, metric_field, riemann_tensor, translation_deformation


@pytest.fixture
def points():
    return SPHERE_BOX.random_points(np.random.default_rng(1), 7)


def test_riemann_transformer(points):
    vb = sphere_vierbein(2.0)
    gam = christoffel_field(metric_field(vb))
    est = RiemannTransformer(christoffel=gam).fit(points)
    out = est.transform(points)
    assert out.shape == (7, 16)
    assert np.array_equal(out[3], riemann_tensor(gam, points[3]).reshape(-1))
    assert est.get_feature_names_out()[5] == "R[0][1][0][1]"
    assert est.n_features_in_ == 2


def test_all_transformers_shapes(points):
    vb = sphere_vierbein(2.0)
    g = metric_field(vb)
    D = translation_deformation(vb)
    A = ConnectionField.from_expressions([["x", "y"], ["0", "x*y"], ["1", "0"]], ["x", "y"], sphere_rotation_group(1.0))
    cases = [
        (MetricTransformer(vb), 4), (ChristoffelTransformer(g), 8), (ScalarCurvatureTransformer(g), 2),
        (StructureFunctionTransformer(D), 8), (CurvatureCoefficientTransformer(D), 16),
        (GeneratorTransformer(D), 4), (FieldStrengthTransformer(A), 12),
    ]
    for est, width in cases:
        assert est.fit_transform(points).shape == (7, width)
    K = ScalarCurvatureTransformer(g).fit(points)
    assert list(K.get_feature_names_out()) == ["scalar", "K"]
    assert np.allclose(K.transform(points)[:, 1], 0.25, atol=1e-12)
    assert np.array_equal(ChristoffelTransformer(g).fit_transform(points)[0],
                          christoffel(g, points[0]).reshape(-1))


def test_sklearn_protocol(points):
    g = metric_field(sphere_vierbein(2.0))
    est = ChristoffelTransformer(metric=g)
    twin = clone(est).fit(points)
    assert est.get_params()["metric"] is g
    assert np.array_equal(twin.transform(points), ChristoffelTransformer(g).fit_transform(points))
    pipe = make_pipeline(ChristoffelTransformer(metric=g), StandardScaler())
    assert pipe.fit_transform(points).shape == (7, 8)
    with pytest.raises(ValueError):
        est.fit(np.ones((3, 3)))
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        ChristoffelTransformer(metric=g).transform(points)


def test_error_carries_point():
    est = MetricTransformer(polar_vierbein()).fit(np.array([[1.0, 0.0]]))
    with pytest.raises(DegenerateVierbein) as info:
        est.transform(np.array([[1.0, 0.0], [0.0, 0.5]]))
    assert info.value.point == [0.0, 0.5]
