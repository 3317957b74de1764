"""
Tests for the exact field catalog
"""
import math

import numpy as np
import pytest

from app.exceptions import CatalogError, IncompatibleDomainError, ParameterError
from app.models import AbcParams, BallDomain
from app.services.fields import (
    abc_field,
    bernoulli_pressure,
    catalog_lookup,
    first_j1_root,
    scale_field,
    spherical_j1,
    spherical_j1_prime,
)


def test_abc_is_curl_eigenfield(abc_111, degenerate_abc, torus_points):
    for field in (abc_111, degenerate_abc):
        assert np.allclose(field.curl(torus_points), field.eval(torus_points), atol=1e-14)
        assert np.allclose(field.divergence(torus_points), 0.0, atol=1e-14)
        assert field.lam == 1.0


def test_abc_higher_partials_follow_shift_rule(degenerate_abc):
    p = np.array([0.3, 1.1, 2.2])
    x, y, z = p
    assert np.allclose(degenerate_abc.partial((0, 0, 2), p), [-math.sin(z), -math.cos(z), 0.0])
    assert np.allclose(degenerate_abc.partial((0, 3, 0), p), [-math.sin(y), 0.0, math.cos(y)])
    assert np.allclose(degenerate_abc.partial((2, 0, 0), p), 0.0)
    assert np.allclose(degenerate_abc.partial((1, 1, 0), p), 0.0)
    assert np.allclose(degenerate_abc.partial((0, 0, 1), p), degenerate_abc.jacobian(p)[:, 2])


def test_degenerate_abc_first_integral(degenerate_abc, abc_111, torus_points):
    assert degenerate_abc.is_degenerate and not abc_111.is_degenerate
    gradient = degenerate_abc.first_integral_gradient(torus_points)
    assert np.allclose(np.sum(gradient * degenerate_abc.eval(torus_points), axis=1), 0.0, atol=1e-14)


def test_degenerate_abc_zero_circles(degenerate_abc):
    on_circles = np.array([[0.3, 0.0, math.pi / 2], [5.0, math.pi, 1.5 * math.pi], [1.0, 2 * math.pi, math.pi / 2]])
    assert np.allclose(degenerate_abc.eval(on_circles), 0.0, atol=1e-15)
    assert np.allclose(degenerate_abc.zero_circle_distance(on_circles), 0.0, atol=1e-15)
    assert degenerate_abc.zero_circle_distance([0.0, 0.3, 0.4 + math.pi / 2]) == pytest.approx(0.5)


def test_spherical_bessel_values():
    s = 0.5
    assert spherical_j1(s) == pytest.approx(math.sin(s) / s**2 - math.cos(s) / s, rel=1e-13)
    # series branch below the cutoff
    s = 0.0099
    assert spherical_j1(s) == pytest.approx(math.sin(s) / s**2 - math.cos(s) / s, rel=1e-7)
    assert spherical_j1(0.0) == 0.0
    assert spherical_j1_prime(0.0) == pytest.approx(1.0 / 3.0)
    assert first_j1_root() == pytest.approx(4.493409457909064, abs=1e-12)
    assert spherical_j1_prime(first_j1_root()) == pytest.approx(-0.21723, abs=1e-4)


def test_spheromak_is_tangent_curl_eigenfield(spheromak, ball_points):
    assert spheromak.lam == pytest.approx(first_j1_root())
    assert spheromak.tangent_to_boundary
    assert np.allclose(spheromak.curl(ball_points), spheromak.lam * spheromak.eval(ball_points), atol=1e-10)
    assert np.allclose(spheromak.divergence(ball_points), 0.0, atol=1e-10)

    rng = np.random.default_rng(5)
    normals = rng.standard_normal(size=(200, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    radial = np.sum(spheromak.eval(normals) * normals, axis=1)
    assert np.max(np.abs(radial)) < 1e-12


def test_spheromak_regular_at_origin(spheromak):
    assert np.allclose(spheromak.eval([0.0, 0.0, 0.0]), [0.0, 0.0, 2.0 / 3.0], atol=1e-14)
    near = spheromak.eval([1e-9, 0.0, 0.0])
    assert np.all(np.isfinite(near))


def test_spheromak_radius_scaling():
    field = catalog_lookup("spheromak:2,3")
    assert field.domain == BallDomain(radius=2.0)
    assert field.lam == pytest.approx(first_j1_root() / 2.0)
    assert field.scale == 3.0


def test_scale_field(abc_111, torus_points):
    doubled = scale_field(abc_111, -2.0)
    assert np.allclose(doubled.eval(torus_points), -2.0 * abc_111.eval(torus_points))
    assert np.allclose(doubled.curl(torus_points), doubled.eval(torus_points))
    assert doubled.lam == abc_111.lam
    assert scale_field(abc_111, 1.0) is abc_111
    with pytest.raises(ParameterError):
        scale_field(abc_111, 0.0)


def test_bernoulli_pressure(abc_111, torus_points):
    values = abc_111.eval(torus_points)
    expected = 1.0 - 0.5 * np.sum(values**2, axis=1)
    assert np.allclose(bernoulli_pressure(abc_111, torus_points, c=1.0), expected)


def test_catalog_lookup():
    field = catalog_lookup("abc:1,0,-1")
    assert field.name == "abc:1,0,-1"
    assert field.scale == 2.0


@pytest.mark.parametrize("name", ["abc:1,2", "abc:0,0,0", "abc:1,x,2", "torus:1", "", "spheromak:-1,1", "spheromak:1,0"])
def test_catalog_lookup_rejects_bad_names(name):
    with pytest.raises(CatalogError) as excinfo:
        catalog_lookup(name)
    assert "abc:A,B,C" in str(excinfo.value)
    assert excinfo.value.operation == "fields.catalog_lookup"


def test_abc_needs_standard_torus(ball):
    with pytest.raises(IncompatibleDomainError):
        abc_field(AbcParams(A=1, B=1, C=1), ball)
