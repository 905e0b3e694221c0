import numpy as np
import pytest

from deformgeo.deformed_group import ChartDomain
from deformgeo.riemann_geom import VierbeinField, christoffel_field, metric_field


def sphere_vierbein(R=1.0):
    return VierbeinField.from_expressions([["R", "0"], ["0", "R*sin(th)"]], ["th", "ph"], {"R": R})


def polar_vierbein():
    return VierbeinField.from_expressions([["1", "0"], ["0", "r"]], ["r", "th"])


@pytest.fixture
def sphere():
    return sphere_vierbein(2.0)


@pytest.fixture
def polar():
    return polar_vierbein()


@pytest.fixture
def sphere_gamma(sphere):
    return christoffel_field(metric_field(sphere))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SPHERE_BOX = ChartDomain.box(["th", "ph"], [0.6, 0.0], [2.5, 6.3], 5)
POLAR_BOX = ChartDomain.box(["r", "th"], [0.5, 0.0], [2.0, 6.3], 5)
