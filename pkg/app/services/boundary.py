"""
Boundary dynamics of tangent fields on the solid ball: restriction to the
sphere, closedness of the dual 1-form, gradient potential, zero census and
heteroclinic boundary lines
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage

from app.config import settings
from app.exceptions import IncompatibleDomainError, NotClosedError, NotTangentError
from app.models import BallDomain, BoundaryReport, BoundaryZero, ClassKind, TraceSummary
from app.services import domains
from app.services.fields import BeltramiField
from app.services.flow import Trajectory, flow_integrator
from app.services.nodal import cluster_points

logger = logging.getLogger(__name__)

SurfaceFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

BOUNDARY_COMPONENTS = 1


def unit_normal(theta, phi) -> np.ndarray:
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)


def frame(theta, phi) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent frame (e_theta, e_phi)"""
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    e_theta = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)], axis=-1)
    e_phi = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=-1)
    return e_theta, e_phi


def spherical_angles(points) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    theta = np.arccos(np.clip(p[..., 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
    phi = np.mod(np.arctan2(p[..., 1], p[..., 0]), 2.0 * np.pi)
    return theta, phi


class SurfaceField:
    """
    Tangent vector field on the sphere of radius R in the frame (e_theta, e_phi)

    Built either from an ambient ball field or from explicit component
    functions of (theta, phi).
    """

    def __init__(
        self,
        radius: float,
        a_theta: SurfaceFunction,
        a_phi: SurfaceFunction,
        scale: float = 1.0,
        ambient: Optional[BeltramiField] = None,
        tangency_max: float = 0.0,
        name: str = "surface",
    ):
        self.radius = float(radius)
        self.a_theta = a_theta
        self.a_phi = a_phi
        self.scale = scale
        self.ambient = ambient
        self.tangency_max = tangency_max
        self.name = name

    def components(self, theta, phi) -> Tuple[np.ndarray, np.ndarray]:
        theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
        return np.asarray(self.a_theta(theta, phi), dtype=float), np.asarray(self.a_phi(theta, phi), dtype=float)

    def magnitude(self, theta, phi) -> np.ndarray:
        a_t, a_p = self.components(theta, phi)
        return np.hypot(a_t, a_p)

    def cartesian(self, theta, phi) -> np.ndarray:
        return self.radius * unit_normal(theta, phi)

    def flow_field(self) -> BeltramiField:
        """Ambient field whose lines through the sphere are the surface field lines"""
        if self.ambient is not None:
            return self.ambient
        return _ExtendedSurfaceField(self)


class _ExtendedSurfaceField(BeltramiField):
    """Radially constant extension of explicit surface components"""

    def __init__(self, surface: SurfaceField):
        super().__init__(
            name=surface.name,
            domain=BallDomain(radius=surface.radius),
            lam=None,
            scale=surface.scale,
            tangent_to_boundary=True,
        )
        self.surface = surface

    def eval(self, points) -> np.ndarray:
        theta, phi = spherical_angles(points)
        a_t, a_p = self.surface.components(theta, phi)
        e_theta, e_phi = frame(theta, phi)
        return a_t[..., None] * e_theta + a_p[..., None] * e_phi


def _surface_grid(n_theta: int, n_phi: int) -> Tuple[np.ndarray, np.ndarray]:
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = np.arange(n_phi) * 2.0 * np.pi / n_phi
    return np.meshgrid(theta, phi, indexing="ij")


def _analysis_grid(n_theta: int, n_phi: int) -> Tuple[np.ndarray, np.ndarray]:
    """Cap-free grid theta in [theta_min, pi - theta_min], periodic in phi"""
    theta = np.linspace(settings.THETA_MIN, np.pi - settings.THETA_MIN, n_theta)
    phi = np.arange(n_phi) * 2.0 * np.pi / n_phi
    return theta, phi


def restrict_to_boundary(field: BeltramiField) -> SurfaceField:
    """
    Boundary restriction of a tangent ball field

    Raises:
        NotTangentError: radial component above TANGENCY_TOL * scale on the surface grid
    """
    if not isinstance(field.domain, BallDomain):
        raise IncompatibleDomainError("boundary restriction needs a ball domain", "boundary.restrict_to_boundary")
    radius = field.domain.radius
    tt, pp = _surface_grid(settings.SURFACE_THETA, settings.SURFACE_PHI)
    normals = unit_normal(tt, pp)
    radial = np.abs(np.sum(field.eval(radius * normals) * normals, axis=-1))
    tangency_max = float(np.max(radial))
    if not np.isfinite(tangency_max) or tangency_max > settings.TANGENCY_TOL * field.scale:
        raise NotTangentError(
            f"{field.name} has radial component {tangency_max:.3e} on the boundary", "boundary.restrict_to_boundary"
        )

    def a_theta(theta, phi):
        e_theta, _ = frame(theta, phi)
        return np.sum(field.eval(radius * unit_normal(theta, phi)) * e_theta, axis=-1)

    def a_phi(theta, phi):
        _, e_phi = frame(theta, phi)
        return np.sum(field.eval(radius * unit_normal(theta, phi)) * e_phi, axis=-1)

    logger.info(f"Restricted {field.name} to the sphere of radius {radius:g} (tangency {tangency_max:.2e})")
    return SurfaceField(radius, a_theta, a_phi, field.scale, ambient=field, tangency_max=tangency_max, name=field.name)


def surface_field_from_components(
    radius: float,
    a_theta: SurfaceFunction,
    a_phi: SurfaceFunction,
    scale: float = 1.0,
    name: str = "surface",
) -> SurfaceField:
    return SurfaceField(radius, a_theta, a_phi, scale, name=name)


def _one_form(sf: SurfaceField, theta, phi) -> Tuple[np.ndarray, np.ndarray]:
    """Metric dual: omega_theta = R a_theta, omega_phi = R sin(theta) a_phi"""
    a_t, a_p = sf.components(theta, phi)
    return sf.radius * a_t, sf.radius * np.sin(theta) * a_p


def closedness_residual(sf: SurfaceField, grid: Optional[Tuple[int, int]] = None) -> float:
    """max |d_theta omega_phi - d_phi omega_theta| / (R^2 scale) on the cap-free grid"""
    n_theta, n_phi = grid or (settings.SURFACE_THETA, settings.SURFACE_PHI)
    theta, phi = _analysis_grid(n_theta, n_phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    omega_theta, omega_phi = _one_form(sf, tt, pp)
    d_theta = np.gradient(omega_phi, theta, axis=0, edge_order=2)
    step = phi[1] - phi[0]
    d_phi = (np.roll(omega_theta, -1, axis=1) - np.roll(omega_theta, 1, axis=1)) / (2.0 * step)
    return float(np.max(np.abs(d_theta - d_phi)) / (sf.radius**2 * sf.scale))


@dataclass
class PotentialGrid:
    """Samples of the recovered potential f on the cap-free (theta, phi) grid"""
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray  # (n_theta, n_phi)
    path_defect: float
    base: Tuple[float, float]

    def frame(self) -> pd.DataFrame:
        tt, pp = np.meshgrid(self.theta, self.phi, indexing="ij")
        return pd.DataFrame({"theta": tt.ravel(), "phi": pp.ravel(), "f": self.values.ravel()})


def _gauss_nodes() -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(settings.QUADRATURE_NODES)


def _meridian(sf: SurfaceField, theta_from, theta_to, phi) -> np.ndarray:
    """Integral of omega along phi = const from theta_from to theta_to"""
    nodes, weights = _gauss_nodes()
    theta_from, theta_to, phi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (theta_from, theta_to, phi)))
    half = 0.5 * (theta_to - theta_from)
    mid = 0.5 * (theta_to + theta_from)
    s = mid[..., None] + half[..., None] * nodes
    omega_theta, _ = _one_form(sf, s, np.broadcast_to(phi[..., None], s.shape))
    return half * np.sum(weights * omega_theta, axis=-1)


def _parallel(sf: SurfaceField, theta, phi_from, phi_to) -> np.ndarray:
    """Integral of omega along theta = const from phi_from to phi_to"""
    nodes, weights = _gauss_nodes()
    theta, phi_from, phi_to = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (theta, phi_from, phi_to)))
    half = 0.5 * (phi_to - phi_from)
    mid = 0.5 * (phi_to + phi_from)
    s = mid[..., None] + half[..., None] * nodes
    _, omega_phi = _one_form(sf, np.broadcast_to(theta[..., None], s.shape), s)
    return half * np.sum(weights * omega_phi, axis=-1)


def potential_at(sf: SurfaceField, base: Tuple[float, float], theta, phi) -> np.ndarray:
    """f(theta, phi) by the meridian-then-parallel path from base; f(base) = 0"""
    theta0, phi0 = base
    return _meridian(sf, theta0, theta, phi0) + _parallel(sf, theta, phi0, phi)


def recover_potential(
    sf: SurfaceField,
    base: Tuple[float, float] = (np.pi / 2.0, 0.0),
    grid: Optional[Tuple[int, int]] = None,
) -> PotentialGrid:
    """
    Potential of the boundary 1-form by explicit path integration

    Raises:
        NotClosedError: the two path orders disagree by more than 1e-5 * scale * R
    """
    n_theta, n_phi = grid or (settings.SURFACE_THETA, settings.SURFACE_PHI)
    theta, phi = _analysis_grid(n_theta, n_phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    theta0, phi0 = base
    meridian_first = _meridian(sf, theta0, tt, phi0) + _parallel(sf, tt, phi0, pp)
    parallel_first = _parallel(sf, theta0, phi0, pp) + _meridian(sf, theta0, tt, pp)
    defect = float(np.max(np.abs(meridian_first - parallel_first)))
    if defect > 1e-5 * sf.scale * sf.radius:
        raise NotClosedError(f"path defect {defect:.3e} exceeds 1e-5*scale*R", "boundary.recover_potential")
    logger.debug(f"Recovered potential on a {n_theta}x{n_phi} grid, path defect {defect:.3e}")
    return PotentialGrid(theta=theta, phi=phi, values=meridian_first, path_defect=defect, base=(theta0, phi0))


def _central4(values: np.ndarray, step: float, axis: int, periodic: bool) -> np.ndarray:
    """Fourth-order central difference; non-periodic edges (two rows each side) are NaN"""
    roll = lambda k: np.roll(values, -k, axis=axis)  # noqa: E731
    result = (-roll(2) + 8.0 * roll(1) - 8.0 * roll(-1) + roll(-2)) / (12.0 * step)
    if not periodic:
        index = [slice(None)] * values.ndim
        for edge in (0, 1, -2, -1):
            index[axis] = edge
            result[tuple(index)] = np.nan
    return result


def potential_gradient_defect(sf: SurfaceField, potential: PotentialGrid) -> float:
    """max |grad_FD f - (a_theta, a_phi)| over the interior of the potential grid"""
    theta, phi = potential.theta, potential.phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    a_t, a_p = sf.components(tt, pp)
    d_theta = _central4(potential.values, theta[1] - theta[0], axis=0, periodic=False) / sf.radius
    d_phi = _central4(potential.values, phi[1] - phi[0], axis=1, periodic=True) / (sf.radius * np.sin(tt))
    defect = np.hypot(d_theta - a_t, d_phi - a_p)
    return float(np.nanmax(defect))


def potential_fit_error(potential: PotentialGrid) -> float:
    """Max residual of the least-squares fit f ~ c0 + c1 cos(theta)"""
    tt, _ = np.meshgrid(potential.theta, potential.phi, indexing="ij")
    design = np.stack([np.ones(tt.size), np.cos(tt).ravel()], axis=1)
    coefficients, *_ = np.linalg.lstsq(design, potential.values.ravel(), rcond=None)
    return float(np.max(np.abs(design @ coefficients - potential.values.ravel())))


# Zero census

@dataclass
class Census:
    zeros: List[BoundaryZero]
    count: int
    boundary_components: int
    bound_satisfied: bool
    zero_fraction: float


def _surface_newton(sf: SurfaceField, theta, phi, tol: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Damped Gauss-Newton on (a_theta, a_phi) in the angles"""
    x = np.stack([theta, phi], axis=-1).astype(float)
    h = 1e-6

    def residual(v):
        a_t, a_p = sf.components(v[:, 0], v[:, 1])
        return np.stack([a_t, a_p], axis=-1)

    F = residual(x)
    r = np.linalg.norm(F, axis=1)
    for _ in range(settings.NEWTON_MAX_ITER):
        idx = np.flatnonzero(r >= tol)
        if len(idx) == 0:
            break
        columns = []
        for axis in range(2):
            shift = np.zeros(2)
            shift[axis] = h
            columns.append((residual(x[idx] + shift) - residual(x[idx] - shift)) / (2.0 * h))
        jac = np.stack(columns, axis=-1)
        step = -np.einsum("kij,kj->ki", np.linalg.pinv(jac, rcond=settings.PINV_RCOND), F[idx])
        alpha = np.ones(len(idx))
        improved = np.zeros(len(idx), dtype=bool)
        for _ in range(settings.NEWTON_BACKTRACK):
            trial = x[idx] + alpha[:, None] * step
            F_trial = residual(trial)
            r_trial = np.linalg.norm(F_trial, axis=1)
            better = ~improved & (r_trial < r[idx])
            x[idx[better]] = trial[better]
            F[idx[better]] = F_trial[better]
            r[idx[better]] = r_trial[better]
            improved |= better
            alpha[~improved] *= 0.5
        if not np.any(improved):
            break
    return x[:, 0], x[:, 1], r


def boundary_zero_census(
    sf: SurfaceField,
    grid: Optional[Tuple[int, int]] = None,
    refine_tol: Optional[float] = None,
) -> Census:
    """
    Zeros of the boundary field, their number and the nowhere-density proxy

    Seeds are local minima of |a| on the surface grid; the poles are checked
    directly in Cartesian coordinates.
    """
    n_theta, n_phi = grid or (settings.SURFACE_THETA, settings.SURFACE_PHI)
    zero_tol = settings.BOUNDARY_ZERO_TOL * sf.scale
    refine_tol = refine_tol or settings.NEWTON_TOL * sf.scale * 1e3
    tt, pp = _surface_grid(n_theta, n_phi)
    magnitude = sf.magnitude(tt, pp)
    zero_fraction = float(np.mean(magnitude < zero_tol))

    local_min = magnitude <= ndimage.minimum_filter(magnitude, size=3, mode=["nearest", "wrap"])
    cell = np.pi / n_theta
    slope = max(
        float(np.max(np.abs(np.diff(magnitude, axis=0)))),
        float(np.max(np.abs(np.diff(magnitude, axis=1)))),
    ) / cell
    seeds = local_min & (magnitude <= math.sqrt(2.0) * cell * slope)
    theta, phi, residual = _surface_newton(sf, tt[seeds], pp[seeds], refine_tol)
    converged = residual < max(refine_tol, zero_tol)

    candidates = [sf.cartesian(theta[converged], phi[converged])]
    poles = np.array([[0.0, 0.0, sf.radius], [0.0, 0.0, -sf.radius]])
    pole_theta = np.array([0.0, np.pi])
    pole_magnitude = sf.magnitude(pole_theta, np.zeros(2))
    candidates.append(poles[pole_magnitude < zero_tol])
    points = np.vstack(candidates)

    ball = BallDomain(radius=sf.radius)
    labels = cluster_points(points, ball, 2.0 * sf.radius * cell)
    zeros = []
    for label in range(int(labels.max()) + 1 if len(labels) else 0):
        members = points[labels == label]
        z_theta, z_phi = spherical_angles(members)
        magnitudes = sf.magnitude(z_theta, z_phi)
        best = int(np.argmin(magnitudes))
        zeros.append(
            BoundaryZero(
                theta=float(z_theta[best]),
                phi=float(z_phi[best]) if 1e-12 < z_theta[best] < np.pi - 1e-12 else 0.0,
                cartesian=tuple(float(c) for c in members[best]),
                residual=float(magnitudes[best]),
            )
        )
    zeros.sort(key=lambda z: (round(z.theta, 9), round(z.phi, 9)))
    count = len(zeros)
    bound_satisfied = count >= 2 * BOUNDARY_COMPONENTS
    logger.info(f"Boundary census of {sf.name}: #K = {count} (2N = {2 * BOUNDARY_COMPONENTS})")
    if not bound_satisfied:
        logger.warning(f"#K = {count} is below 2N = {2 * BOUNDARY_COMPONENTS}")
    return Census(
        zeros=zeros,
        count=count,
        boundary_components=BOUNDARY_COMPONENTS,
        bound_satisfied=bound_satisfied,
        zero_fraction=zero_fraction,
    )


# Boundary field lines

@dataclass
class BoundaryTrace:
    summary: TraceSummary
    forward: Optional[Trajectory]
    backward: Optional[Trajectory]


def _nearest_zero(zeros: Sequence[BoundaryZero], point: np.ndarray) -> Tuple[Optional[int], float]:
    if not zeros:
        return None, float("inf")
    targets = np.array([z.cartesian for z in zeros])
    distances = np.linalg.norm(targets - point, axis=1)
    best = int(np.argmin(distances))
    return best, float(distances[best])


class BoundaryAnalyzer:
    """Boundary line tracing and the full boundary suite"""

    def trace_boundary_line(
        self,
        sf: SurfaceField,
        start: Tuple[float, float],
        T: Optional[float] = None,
        zeros: Optional[Sequence[BoundaryZero]] = None,
        base: Tuple[float, float] = (np.pi / 2.0, 0.0),
    ) -> BoundaryTrace:
        """
        Follow the boundary line through start in both time directions

        Args:
            sf: boundary field
            start: (theta, phi) of the start point
            T: horizon (doubled once when a limit is not reached)
            zeros: census result used for limit assignment
            base: base point of the potential

        Returns:
            BoundaryTrace with limit assignments and the monotonicity check of f
        """
        T = T or settings.BOUNDARY_HORIZON
        zeros = list(zeros) if zeros is not None else boundary_zero_census(sf).zeros
        zero_tol = settings.BOUNDARY_ZERO_TOL * sf.scale
        theta0, phi0 = float(start[0]), float(start[1])
        p0 = sf.cartesian(theta0, phi0)

        if float(sf.magnitude(theta0, phi0)) <= zero_tol:
            index, distance = _nearest_zero(zeros, p0)
            summary = TraceSummary(
                start=(theta0, phi0),
                forward_limit=index,
                backward_limit=index,
                forward_distance=distance,
                backward_distance=distance,
                classification=ClassKind.CONSTANT,
                f_monotone=True,
            )
            return BoundaryTrace(summary=summary, forward=None, backward=None)

        field = sf.flow_field()
        tolerance = settings.LIMIT_ASSIGNMENT_TOL * sf.radius
        horizon = T
        for attempt in range(2):
            forward = flow_integrator.integrate(field, p0, horizon, on_sphere=True)
            backward = flow_integrator.integrate(field, p0, -horizon, on_sphere=True)
            forward_index, forward_distance = _nearest_zero(zeros, forward.points[-1])
            backward_index, backward_distance = _nearest_zero(zeros, backward.points[0])
            if forward_distance < tolerance and backward_distance < tolerance:
                break
            if attempt == 0:
                logger.debug(f"Extending boundary trace from {start} to horizon {2 * horizon:g}")
                horizon *= 2.0

        if forward_distance >= tolerance:
            logger.warning(f"Forward limit of the line through {start} unresolved ({forward_distance:.3e})")
            forward_index = None
        if backward_distance >= tolerance:
            logger.warning(f"Backward limit of the line through {start} unresolved ({backward_distance:.3e})")
            backward_index = None

        # backward samples are stored in increasing time, so they join the forward ones at t = 0
        points = np.vstack([backward.points, forward.points[1:]])
        s_theta, s_phi = spherical_angles(points)
        f_values = potential_at(sf, base, s_theta, s_phi)
        moving = sf.magnitude(s_theta, s_phi) > zero_tol
        both = moving[1:] & moving[:-1]
        increments = np.diff(f_values)[both]
        min_increment = float(np.min(increments)) if len(increments) else None

        late = forward.times >= 1.0
        min_return = (
            float(np.min(np.linalg.norm(forward.points[late] - p0, axis=1))) if np.any(late) else None
        )
        summary = TraceSummary(
            start=(theta0, phi0),
            forward_limit=forward_index,
            backward_limit=backward_index,
            forward_distance=forward_distance,
            backward_distance=backward_distance,
            classification=forward.classification.kind,
            f_monotone=min_increment is None or min_increment > 0,
            min_increment=min_increment,
            min_return_distance=min_return,
        )
        return BoundaryTrace(summary=summary, forward=forward, backward=backward)

    def run_boundary_suite(
        self,
        field: BeltramiField,
        n_traces: int = 20,
        seed: int = 7,
        threads: Optional[int] = None,
        horizon: Optional[float] = None,
    ) -> Tuple[BoundaryReport, PotentialGrid]:
        """
        Restriction, closedness, potential, census and random boundary traces

        Returns:
            (BoundaryReport, PotentialGrid) for JSON and CSV emission
        """
        sf = restrict_to_boundary(field)
        closedness = closedness_residual(sf)
        potential = recover_potential(sf)
        gradient_defect = potential_gradient_defect(sf, potential)
        fit_error = potential_fit_error(potential)
        census = boundary_zero_census(sf)

        starts = self._trace_starts(sf, n_traces, seed)
        with ThreadPoolExecutor(max_workers=threads or settings.THREADS) as executor:
            traces = list(
                executor.map(lambda s: self.trace_boundary_line(sf, s, horizon, census.zeros).summary, starts)
            )
        logger.info(
            f"Boundary suite on {field.name}: closedness {closedness:.2e}, path defect "
            f"{potential.path_defect:.2e}, #K {census.count}, {len(traces)} traces"
        )
        report = BoundaryReport(
            radius=sf.radius,
            zeros=census.zeros,
            count=census.count,
            boundary_components=census.boundary_components,
            bound_satisfied=census.bound_satisfied,
            zero_fraction=census.zero_fraction,
            tangency_max=sf.tangency_max,
            closedness_residual=closedness,
            path_defect=potential.path_defect,
            potential_fit_error=fit_error,
            gradient_defect=gradient_defect,
            traces=traces,
        )
        return report, potential

    @staticmethod
    def _trace_starts(sf: SurfaceField, n: int, seed: int) -> List[Tuple[float, float]]:
        """Uniform boundary points away from the zero set"""
        rng = domains.substream(seed, "boundary_traces")
        zero_tol = settings.BOUNDARY_ZERO_TOL * sf.scale
        starts = []
        while len(starts) < n:
            direction = rng.standard_normal(3)
            theta, phi = spherical_angles(direction)
            theta, phi = float(theta), float(phi)
            if settings.THETA_MIN <= theta <= np.pi - settings.THETA_MIN and sf.magnitude(theta, phi) > zero_tol:
                starts.append((theta, phi))
        return starts


def potential_to_csv(potential: PotentialGrid, path) -> Path:
    path = Path(path)
    potential.frame().to_csv(path, index=False, float_format="%.17g")
    return path


# Global boundary analyzer instance
boundary_analyzer = BoundaryAnalyzer()


def trace_boundary_line(sf: SurfaceField, start: Tuple[float, float], T: Optional[float] = None,
                        zeros: Optional[Sequence[BoundaryZero]] = None) -> BoundaryTrace:
    return boundary_analyzer.trace_boundary_line(sf, start, T, zeros)


def run_boundary_suite(field: BeltramiField, n_traces: int = 20, seed: int = 7,
                       threads: Optional[int] = None) -> Tuple[BoundaryReport, PotentialGrid]:
    return boundary_analyzer.run_boundary_suite(field, n_traces, seed, threads)
