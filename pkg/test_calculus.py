"""
Tests for finite-difference operators and Beltrami residuals
"""
import math

import numpy as np
import pytest

from app.exceptions import ParameterError, StencilOutOfDomainError
from app.services.calculus import (
    beltrami_residual,
    collinearity_residual,
    fd_jacobian,
    fd_partial,
    helmholtz_residual,
)
from app.services.exprfield import parse_field


def sine_product(q):
    return np.sin(q[..., 0]) * np.sin(q[..., 1])


def test_first_and_mixed_partials():
    p = np.array([0.3, 1.2, 0.0])
    assert float(fd_partial(sine_product, (1, 0, 0), p)) == pytest.approx(math.cos(0.3) * math.sin(1.2), abs=1e-10)
    assert float(fd_partial(sine_product, (1, 1, 0), p)) == pytest.approx(math.cos(0.3) * math.cos(1.2), abs=1e-8)
    assert float(fd_partial(sine_product, (0, 0, 1), p)) == pytest.approx(0.0, abs=1e-12)


def test_higher_order_partials():
    p = np.array([0.3, 1.2, 0.0])
    expected = math.sin(0.3) * math.sin(1.2)
    assert float(fd_partial(sine_product, (4, 0, 0), p)) == pytest.approx(expected, abs=1e-5)
    assert float(fd_partial(sine_product, (2, 2, 0), p)) == pytest.approx(expected, abs=1e-5)
    with pytest.raises(ParameterError):
        fd_partial(sine_product, (7, 0, 0), p)
    with pytest.raises(ParameterError):
        fd_partial(sine_product, (1, -1, 0), p)


def test_torus_base_point_is_wrapped(torus):
    p = np.array([0.3, 1.2, 0.0])
    shifted = p + 2.0 * math.pi * np.array([3.0, -2.0, 1.0])
    assert float(fd_partial(sine_product, (1, 0, 0), shifted, domain=torus)) == pytest.approx(
        float(fd_partial(sine_product, (1, 0, 0), p, domain=torus)), abs=1e-9
    )


def test_ball_stencil_stays_inside(spheromak):
    near = np.array([0.0, 0.0, 1.0 - 1e-5])
    with pytest.raises(StencilOutOfDomainError):
        fd_partial(spheromak.eval, (1, 0, 0), near, domain=spheromak.domain)
    shrunk = fd_partial(spheromak.eval, (1, 0, 0), near, domain=spheromak.domain, shrink=True)
    assert np.allclose(shrunk, spheromak.jacobian(near)[:, 0], atol=1e-6)
    with pytest.raises(StencilOutOfDomainError):
        fd_partial(spheromak.eval, (1, 0, 0), [0.0, 0.0, 1.1], domain=spheromak.domain, shrink=True)


def test_fd_jacobian_matches_analytic(abc_111, spheromak, torus_points, ball_points):
    assert np.allclose(fd_jacobian(abc_111, torus_points), abc_111.jacobian(torus_points), atol=1e-9)
    assert np.allclose(fd_jacobian(spheromak, ball_points), spheromak.jacobian(ball_points), atol=1e-8)


def test_catalog_fields_have_small_residuals(abc_111, degenerate_abc, spheromak, torus_points, ball_points):
    for field, points in ((abc_111, torus_points), (degenerate_abc, torus_points), (spheromak, ball_points)):
        assert np.max(beltrami_residual(field, points)) < 1e-6
        assert np.max(collinearity_residual(field, points)) < 1e-6
        assert np.max(helmholtz_residual(field, points)) < 1e-6


def test_non_beltrami_fields_are_flagged(torus_points):
    shear = parse_field("sin(z), 0, 0")
    assert np.max(collinearity_residual(shear, torus_points)) > 0.1

    compressible = parse_field("sin(x), 0, 0")
    assert np.max(beltrami_residual(compressible, torus_points)) > 0.1


def test_collinearity_of_linear_shear():
    shear = parse_field("y, 0, 0")
    ys = np.array([0.5, 1.0, 2.0])
    points = np.stack([np.zeros(3), ys, np.zeros(3)], axis=1)
    assert np.allclose(collinearity_residual(shear, points), ys / (ys**2 + 1.0), rtol=1e-8)
    assert collinearity_residual(shear, np.zeros((1, 3)))[0] == pytest.approx(0.0, abs=1e-12)
