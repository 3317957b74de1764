"""
Shared fixtures for the Beltrami Field Laboratory tests
"""
import math

import numpy as np
import pytest

from app.models import AbcParams, BallDomain, TorusDomain
from app.services.fields import abc_field, spheromak_field


@pytest.fixture
def torus():
    return TorusDomain()


@pytest.fixture
def ball():
    return BallDomain(radius=1.0)


@pytest.fixture
def degenerate_abc():
    """ABC(1, 0, -1): integrable, zero set made of closed curves"""
    return abc_field(AbcParams(A=1, B=0, C=-1))


@pytest.fixture
def abc_111():
    return abc_field(AbcParams(A=1, B=1, C=1))


@pytest.fixture
def spheromak():
    return spheromak_field(1.0, 1.0)


@pytest.fixture
def torus_points():
    rng = np.random.default_rng(11)
    return rng.uniform(0.0, 2.0 * math.pi, size=(50, 3))


@pytest.fixture
def ball_points():
    rng = np.random.default_rng(12)
    directions = rng.standard_normal(size=(50, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * 0.9 * np.cbrt(rng.uniform(0.0, 1.0, size=(50, 1)))
