"""
Tests for boundary restriction, potential recovery, zero census and boundary lines
"""
import math

import numpy as np
import pytest

from app.exceptions import IncompatibleDomainError, NotClosedError, NotTangentError
from app.models import BallDomain
from app.services.boundary import (
    boundary_analyzer,
    boundary_zero_census,
    closedness_residual,
    potential_gradient_defect,
    recover_potential,
    restrict_to_boundary,
    surface_field_from_components,
)
from app.services.exprfield import parse_field
from app.services.fields import first_j1_root, spherical_j1_prime

J1_PRIME_AT_ROOT = float(spherical_j1_prime(first_j1_root()))


@pytest.fixture
def surface(spheromak):
    return restrict_to_boundary(spheromak)


@pytest.fixture
def gradient_of_x():
    """Surface gradient of x on the unit sphere; zeros at (+-1, 0, 0)"""
    return surface_field_from_components(
        1.0,
        lambda theta, phi: np.cos(theta) * np.cos(phi),
        lambda theta, phi: -np.sin(phi),
        name="grad_x",
    )


def test_spheromak_restriction_components(surface):
    theta = np.array([0.3, 1.0, 2.5])
    phi = np.array([0.0, 2.0, 4.0])
    a_theta, a_phi = surface.components(theta, phi)
    assert np.allclose(a_theta, -J1_PRIME_AT_ROOT * np.sin(theta), atol=1e-12)
    assert np.allclose(a_phi, 0.0, atol=1e-12)
    assert surface.tangency_max < 1e-10


def test_restriction_errors(abc_111):
    with pytest.raises(IncompatibleDomainError):
        restrict_to_boundary(abc_111)
    radial = parse_field("x, y, z", BallDomain(radius=1.0))
    with pytest.raises(NotTangentError):
        restrict_to_boundary(radial)


def test_spheromak_potential_is_cosine(surface):
    assert closedness_residual(surface) < 1e-8
    potential = recover_potential(surface)
    tt, _ = np.meshgrid(potential.theta, potential.phi, indexing="ij")
    assert np.allclose(potential.values, J1_PRIME_AT_ROOT * np.cos(tt), atol=1e-10)
    assert potential.path_defect < 1e-8
    # f increases from the north pole to the south pole
    assert np.all(np.diff(potential.values[:, 0]) > 0)
    assert potential_gradient_defect(surface, potential) < 1e-5
    assert len(potential.frame()) == potential.values.size


def test_rotation_is_not_closed():
    swirl = surface_field_from_components(1.0, lambda theta, phi: 0.0 * theta, lambda theta, phi: np.sin(theta))
    assert closedness_residual(swirl) > 0.1
    with pytest.raises(NotClosedError):
        recover_potential(swirl)


def test_gradient_field_potential(gradient_of_x):
    assert closedness_residual(gradient_of_x) < 1e-8
    potential = recover_potential(gradient_of_x)
    tt, pp = np.meshgrid(potential.theta, potential.phi, indexing="ij")
    assert np.allclose(potential.values, np.sin(tt) * np.cos(pp) - 1.0, atol=1e-10)


def test_spheromak_census_finds_both_poles(surface):
    census = boundary_zero_census(surface)
    assert census.count == 2
    assert census.bound_satisfied
    assert census.zero_fraction == 0.0
    north, south = census.zeros
    assert north.theta == pytest.approx(0.0, abs=1e-6)
    assert south.theta == pytest.approx(math.pi, abs=1e-6)
    assert np.allclose(north.cartesian, [0.0, 0.0, 1.0], atol=1e-6)


def test_gradient_census(gradient_of_x):
    census = boundary_zero_census(gradient_of_x)
    assert census.count == 2
    locations = sorted(tuple(np.round(z.cartesian, 6)) for z in census.zeros)
    assert np.allclose(locations, [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], atol=1e-6)


def test_spheromak_lines_run_north_to_south(surface):
    census = boundary_zero_census(surface)
    trace = boundary_analyzer.trace_boundary_line(surface, (1.0, 0.5), zeros=census.zeros)
    summary = trace.summary
    assert summary.backward_limit == 0
    assert summary.forward_limit == 1
    assert summary.f_monotone
    assert np.allclose(np.linalg.norm(trace.forward.points, axis=1), 1.0, atol=1e-12)
    assert summary.min_return_distance > 0.1


def test_gradient_lines_climb_the_potential(gradient_of_x):
    census = boundary_zero_census(gradient_of_x)
    summary = boundary_analyzer.trace_boundary_line(gradient_of_x, (1.0, 2.0), zeros=census.zeros).summary
    assert summary.f_monotone
    assert np.allclose(census.zeros[summary.forward_limit].cartesian, [1.0, 0.0, 0.0], atol=1e-6)
    assert np.allclose(census.zeros[summary.backward_limit].cartesian, [-1.0, 0.0, 0.0], atol=1e-6)


def test_trace_from_a_zero_is_constant(surface):
    census = boundary_zero_census(surface)
    summary = boundary_analyzer.trace_boundary_line(surface, (0.0, 0.0), zeros=census.zeros).summary
    assert summary.classification.value == "constant"
    assert summary.forward_limit == summary.backward_limit == 0


def test_boundary_suite(spheromak):
    report, potential = boundary_analyzer.run_boundary_suite(spheromak, n_traces=4, seed=7, threads=2)
    assert report.count == 2 and report.bound_satisfied
    assert report.closedness_residual < 1e-8
    assert report.potential_fit_error < 1e-8
    assert len(report.traces) == 4
    for trace in report.traces:
        assert (trace.backward_limit, trace.forward_limit) == (0, 1)
        assert trace.f_monotone
    again, _ = boundary_analyzer.run_boundary_suite(spheromak, n_traces=4, seed=7, threads=1)
    assert again.model_dump() == report.model_dump()
