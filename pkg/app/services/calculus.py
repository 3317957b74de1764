"""
Finite-difference differential operators and pointwise Beltrami residuals
"""
import logging
import math
from itertools import product
from typing import Callable, Optional, Tuple

import numpy as np

from app.config import settings
from app.exceptions import ParameterError, StencilOutOfDomainError
from app.models import BallDomain, FdScheme, TorusDomain
from app.services import domains
from app.services.fields import BeltramiField, MultiIndex

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]

_EPS = np.finfo(float).eps


def default_scheme(domain) -> FdScheme:
    return FdScheme(
        base_step=settings.FD_STEP_FACTOR * domains.length_scale(domain),
        extrapolation_levels=settings.FD_LEVELS,
    )


def _order_step(scheme: FdScheme, order: int, domain) -> float:
    # higher orders divide by h^m, so the step widens with m to bound roundoff
    return max(scheme.base_step, domains.length_scale(domain) * _EPS ** (1.0 / (order + 4)))


def _stencil(alpha: MultiIndex) -> Tuple[np.ndarray, np.ndarray]:
    """Offsets (in units of h) and weights of the tensor-product central difference"""
    per_axis = []
    for k in alpha:
        nodes = [(k / 2.0 - j, (-1) ** j * math.comb(k, j)) for j in range(k + 1)]
        per_axis.append(nodes)
    offsets, weights = [], []
    for combo in product(*per_axis):
        offsets.append([node[0] for node in combo])
        weights.append(float(np.prod([node[1] for node in combo])))
    return np.asarray(offsets), np.asarray(weights)


def _steps(domain, p: np.ndarray, h: float, reach: float, shrink: bool, operation: str) -> np.ndarray:
    """Per-point step; on the ball the stencil must stay inside the closed ball"""
    steps = np.full(p.shape[:-1], h)
    if not isinstance(domain, BallDomain) or reach == 0:
        return steps
    radius = domain.radius
    room = radius * (1.0 + settings.BALL_MEMBERSHIP_TOL) - np.linalg.norm(p, axis=-1)
    if np.any(room < 0):
        raise StencilOutOfDomainError("evaluation point outside the ball", operation)
    allowed = room / reach
    if not shrink:
        if np.any(allowed < h):
            raise StencilOutOfDomainError(f"stencil of step {h:g} leaves the ball", operation)
        return steps
    steps = np.minimum(steps, allowed)
    if np.any(steps < settings.FD_MIN_STEP_FACTOR * radius):
        raise StencilOutOfDomainError(
            f"step below {settings.FD_MIN_STEP_FACTOR:g}*R needed near the boundary", operation
        )
    return steps


def _difference(func: PointFunction, alpha: MultiIndex, p: np.ndarray, steps: np.ndarray, levels: int):
    offsets, weights = _stencil(alpha)
    order = sum(alpha)
    table = []
    for level in range(levels):
        h = steps / 2.0**level
        total = 0.0
        for offset, weight in zip(offsets, weights):
            nodes = p + h[..., None] * offset
            values = np.asarray(func(nodes), dtype=float)
            scale = (weight / h**order).reshape(h.shape + (1,) * (values.ndim - h.ndim))
            total = total + scale * values
        row = [total]
        # Richardson: the symmetric stencil error expands in even powers of h
        for j, previous in enumerate(table[-1] if table else [], start=1):
            row.append(row[j - 1] + (row[j - 1] - previous) / (4.0**j - 1.0))
        table.append(row)
    return table[-1][-1]


def fd_partial(
    func: PointFunction,
    alpha: MultiIndex,
    p,
    scheme: Optional[FdScheme] = None,
    domain=None,
    shrink: bool = False,
):
    """
    Central-difference estimate of d^alpha func, Richardson-extrapolated

    Args:
        func: vectorised map from points (..., 3) to values (...) or (..., k)
        alpha: multi-index with |alpha| <= 6
        p: evaluation point(s), shape (..., 3)
        scheme: step and extrapolation levels (default from the domain)
        domain: torus (base point wrapped) or ball (stencil kept inside)
        shrink: on the ball, reduce the step per point instead of raising

    Returns:
        Derivative estimate with the shape of func(p)
    """
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != 3 or min(alpha) < 0:
        raise ParameterError("alpha must be a multi-index of three non-negative integers", "calculus.fd_partial")
    order = sum(alpha)
    if order > settings.MAX_DERIVATIVE_ORDER:
        raise ParameterError(f"|alpha| must be at most {settings.MAX_DERIVATIVE_ORDER}", "calculus.fd_partial")
    domain = domain if domain is not None else TorusDomain()
    scheme = scheme or default_scheme(domain)
    p = np.asarray(p, dtype=float)
    if domains.is_torus(domain):
        p = domains.wrap(domain, p)
    if order == 0:
        return np.asarray(func(p), dtype=float)

    reach = 0.5 * math.sqrt(sum(a * a for a in alpha))
    steps = _steps(domain, p, _order_step(scheme, order, domain), reach, shrink, "calculus.fd_partial")
    return _difference(func, alpha, p, steps, scheme.extrapolation_levels)


def fd_jacobian(field: BeltramiField, p, scheme: Optional[FdScheme] = None) -> np.ndarray:
    """Full 3x3 finite-difference Jacobian J[..., i, j] = d_j X^i, step shrinking near the ball boundary"""
    columns = [
        fd_partial(field.eval, tuple(int(i == axis) for i in range(3)), p, scheme, field.domain, shrink=True)
        for axis in range(3)
    ]
    return np.stack(columns, axis=-1)


def _curl_and_divergence(jac: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    rotation = np.stack(
        [
            jac[..., 2, 1] - jac[..., 1, 2],
            jac[..., 0, 2] - jac[..., 2, 0],
            jac[..., 1, 0] - jac[..., 0, 1],
        ],
        axis=-1,
    )
    return rotation, np.trace(jac, axis1=-2, axis2=-1)


def beltrami_residual(field: BeltramiField, p, scheme: Optional[FdScheme] = None) -> np.ndarray:
    """
    (|curl_FD X - lam X| + |div_FD X|) / (|X| + scale)

    Args:
        field: field with a constant or pointwise-estimated proportionality factor
        p: point(s), shape (..., 3)
        scheme: finite-difference scheme

    Returns:
        Non-negative residual per point
    """
    p = np.asarray(p, dtype=float)
    values = field.eval(p)
    rotation, divergence = _curl_and_divergence(fd_jacobian(field, p, scheme))
    lam = field.lambda_at(p)
    mismatch = np.linalg.norm(rotation - lam[..., None] * values, axis=-1) + np.abs(divergence)
    return mismatch / (np.linalg.norm(values, axis=-1) + field.scale)


def collinearity_residual(field: BeltramiField, p, scheme: Optional[FdScheme] = None) -> np.ndarray:
    """|X x curl_FD X| / (|X|^2 + scale^2); vanishes for every Beltrami field"""
    p = np.asarray(p, dtype=float)
    values = field.eval(p)
    rotation, _ = _curl_and_divergence(fd_jacobian(field, p, scheme))
    cross = np.cross(values, rotation)
    return np.linalg.norm(cross, axis=-1) / (np.sum(values * values, axis=-1) + field.scale**2)


def helmholtz_residual(field: BeltramiField, p, scheme: Optional[FdScheme] = None) -> np.ndarray:
    """|Laplacian X + lam^2 X| / (lam^2 |X| + scale); components of curl eigenfields are Helmholtz eigenfunctions"""
    p = np.asarray(p, dtype=float)
    values = field.eval(p)
    laplacian = sum(
        fd_partial(field.eval, tuple(2 * int(i == axis) for i in range(3)), p, scheme, field.domain, shrink=True)
        for axis in range(3)
    )
    lam2 = field.lambda_at(p) ** 2
    mismatch = np.linalg.norm(laplacian + lam2[..., None] * values, axis=-1)
    return mismatch / (lam2 * np.linalg.norm(values, axis=-1) + field.scale)
