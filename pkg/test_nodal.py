"""
Tests for zero finding, rank identities, box counting and nodal domains
"""
import json
import logging
import math

import numpy as np
import pytest

from app.exceptions import EmptySetError, InsufficientDataError, InteriorOnlyError, ParameterError
from app.services.exprfield import parse_field
from app.services.nodal import (
    ZeroSet,
    box_counting_dimension,
    cluster_points,
    count_nodal_domains,
    newton_refine,
    rank_identities_at_zero,
    zero_finder,
    zero_order,
    zero_set_to_json,
)


@pytest.fixture(scope="module")
def degenerate_zeros():
    from app.models import AbcParams
    from app.services.fields import abc_field

    field = abc_field(AbcParams(A=1, B=0, C=-1))
    return field, zero_finder.find_zeros(field, threads=2)


def test_degenerate_abc_zero_set_is_two_circles(degenerate_zeros):
    field, zs = degenerate_zeros
    assert zs.cluster_count == 2
    assert sum(zs.cluster_sizes) == len(zs.records)
    points = zs.points
    assert np.max(np.linalg.norm(field.eval(points), axis=1)) < 1e-11
    on_first = np.isclose(points[:, 1], 0.0, atol=1e-9) & np.isclose(points[:, 2], math.pi / 2, atol=1e-9)
    on_second = np.isclose(points[:, 1], math.pi, atol=1e-9) & np.isclose(points[:, 2], 1.5 * math.pi, atol=1e-9)
    assert np.all(on_first | on_second)


def test_rank_identities_on_zero_circles(degenerate_zeros):
    _, zs = degenerate_zeros
    for record in zs.records:
        assert record.order == 1
        assert record.beta == (0, 0, 0)
        data = record.rank_data
        assert data.rank == 2
        assert data.symmetry_defect < 1e-12
        assert data.trace < 1e-12


def test_abc_111_has_eight_isolated_zeros(abc_111):
    zs = zero_finder.find_zeros(abc_111, threads=2)
    assert len(zs.records) == 8
    assert zs.cluster_count == 8
    for record in zs.records:
        assert record.order == 1
        assert record.rank_data.rank >= 2
        assert record.rank_data.symmetry_defect < 1e-10
        assert record.rank_data.trace < 1e-10
        assert zero_order(abc_111, record.location) == (1, (0, 0, 0))


def test_zero_order_and_rank_errors(abc_111, spheromak):
    with pytest.raises(ParameterError):
        zero_order(abc_111, [0.1, 0.2, 0.3])
    with pytest.raises(InteriorOnlyError):
        rank_identities_at_zero(spheromak, [0.0, 0.0, 1.0])


def test_spheromak_vanishes_at_poles(spheromak):
    poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    assert np.max(np.abs(spheromak.eval(poles))) < 1e-12


def test_newton_refine_converges_from_nearby_seed(degenerate_abc):
    seeds = np.array([[1.0, 0.05, math.pi / 2 - 0.04], [2.0, math.pi + 0.03, 1.5 * math.pi + 0.02]])
    points, residuals, converged = newton_refine(degenerate_abc, seeds, 1e-12)
    assert np.all(converged)
    assert np.all(residuals < 1e-12)


def test_cluster_points_wraps_the_torus(torus):
    points = np.array([[0.01, 1.0, 1.0], [2 * math.pi - 0.01, 1.0, 1.0], [3.0, 3.0, 3.0]])
    labels = cluster_points(points, torus, 0.1)
    assert labels[0] == labels[1] != labels[2]


def test_box_counting_on_densified_circles(degenerate_zeros):
    field, zs = degenerate_zeros
    zero_finder.densify_zero_curves(field, zs)
    assert len(zs.dense_points) > len(zs.points)
    fit = box_counting_dimension(zs)
    assert 0.85 <= fit.slope <= 1.15
    assert len(fit.box_counts) >= 3
    assert all(0.85 <= s <= 1.15 for s in fit.cluster_slopes)
    assert zs.fitted_dimension == fit.slope


def test_box_counting_on_synthetic_sets(torus):
    t = np.linspace(0.0, 2 * math.pi, 2000, endpoint=False)
    line = np.stack([t, np.ones_like(t), np.ones_like(t)], axis=1)
    assert 0.85 < box_counting_dimension(ZeroSet.from_points(line, torus)).slope < 1.05

    u = np.linspace(0.0, 2 * math.pi, 100, endpoint=False)
    xx, yy = np.meshgrid(u, u, indexing="ij")
    plane = np.stack([xx.ravel(), yy.ravel(), np.ones(xx.size)], axis=1)
    assert 1.7 < box_counting_dimension(ZeroSet.from_points(plane, torus)).slope < 2.05


def test_box_counting_errors(torus):
    empty = ZeroSet(domain=torus, points=np.zeros((0, 3)), labels=np.zeros(0, dtype=int), cell_size=0.1)
    with pytest.raises(EmptySetError):
        box_counting_dimension(empty)
    sparse = ZeroSet.from_points([[0.0, 0.0, 0.0], [math.pi, 0.0, 0.0]], torus)
    with pytest.raises(InsufficientDataError):
        box_counting_dimension(sparse)


def test_complement_of_zero_circles_is_connected(degenerate_zeros):
    field, zs = degenerate_zeros
    assert count_nodal_domains(field, zs=zs) == 1


def test_nodal_planes_split_the_torus():
    shear = parse_field("sin(z), 0, 0")
    assert count_nodal_domains(shear, grid_res=32) == 2
    with pytest.raises(ParameterError):
        count_nodal_domains(shear, grid_res=16)


def test_zero_set_json(degenerate_zeros):
    _, zs = degenerate_zeros
    data = json.loads(zero_set_to_json(zs))
    assert data["cluster_count"] == 2
    assert len(data["records"]) == len(zs.records)


def test_nodal_count_is_stable_under_refinement(degenerate_zeros):
    field, zs = degenerate_zeros
    assert count_nodal_domains(field, 64, zs=zs) == count_nodal_domains(field, 96, zs=zs) == 1


def test_spheromak_interior_is_one_nodal_domain(spheromak):
    assert count_nodal_domains(spheromak, grid_res=32) == 1


def test_isolated_zero_has_dimension_zero(torus):
    fit = box_counting_dimension(ZeroSet.from_points([[1.0, 2.0, 3.0]], torus))
    assert -0.1 <= fit.slope <= 0.1


def test_zero_orders_of_boundary_pole_and_double_zero(spheromak):
    assert zero_order(spheromak, [0.0, 0.0, 1.0])[0] == 1
    assert zero_order(parse_field("x^2, 0, 0"), [0.0, 0.0, 0.0]) == (2, (1, 0, 0))


def test_fallback_warning_only_beyond_degree_cap(caplog):
    field = parse_field("x^2, 0, 0")
    with caplog.at_level(logging.WARNING, logger="app.services.nodal"):
        assert zero_order(field, [0.0, 0.0, 0.0])[0] == 2
    assert not caplog.records

    field.degree_cap = 1
    with caplog.at_level(logging.WARNING, logger="app.services.nodal"):
        assert zero_order(field, [0.0, 0.0, 0.0])[0] == 2
    assert "degree cap" in caplog.text


def test_curve_clusters(degenerate_zeros, abc_111):
    field, zs = degenerate_zeros
    assert zero_finder.curve_clusters(field, zs) == 2
    assert zero_finder.curve_clusters(abc_111, zero_finder.find_zeros(abc_111, characterize=False)) == 0
