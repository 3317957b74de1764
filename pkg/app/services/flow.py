"""
Field-line integration, trajectory classification, volume preservation and
the recurrence ensemble
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from app.config import settings
from app.exceptions import (
    DomainMembershipError,
    EscapeError,
    ParameterError,
    StiffnessError,
    UnsupportedOperationError,
)
from app.models import BallDomain, Classification, ClassKind, IntegratorStats, RecurrencePoint, RecurrenceReport
from app.services import domains
from app.services.fields import BeltramiField

logger = logging.getLogger(__name__)


@dataclass
class EnsembleResult:
    """Dense samples of many field lines advanced with a shared step sequence"""
    times: np.ndarray  # (m,) signed, in integration order, times[0] == 0
    points: np.ndarray  # (n, m, 3), wrapped on the torus
    velocities: np.ndarray  # (n, m, 3)
    final: np.ndarray  # (n, 3) end states, unwrapped
    stats: IntegratorStats
    failures: List[Optional[str]]


@dataclass
class Trajectory:
    """
    One field line gamma_p sampled every dense-output interval

    Samples are stored with strictly increasing times; a backward
    integration therefore ends at its start point.
    """
    field_name: str
    start: np.ndarray
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    final: np.ndarray
    stats: IntegratorStats
    direction: int = 1
    scale: float = 1.0
    classification: Optional[Classification] = None
    domain: object = dataclass_field(default=None, repr=False)

    def from_start(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Times, points and velocities in integration order"""
        if self.direction > 0:
            return self.times, self.points, self.velocities
        return self.times[::-1], self.points[::-1], self.velocities[::-1]

    @property
    def horizon(self) -> float:
        return float(np.max(np.abs(self.times))) if len(self.times) else 0.0


class FlowIntegrator:
    """
    Dormand-Prince 5(4) pair with FSAL, vectorised over ensembles of start points

    Steps are clipped to land on the dense-output grid, so every stored
    sample is an integrator state.
    """

    # Butcher table, row k holds the coefficients of stage k + 1
    BT = {
        0: [1 / 5],
        1: [3 / 40, 9 / 40],
        2: [44 / 45, -56 / 15, 32 / 9],
        3: [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        4: [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        5: [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    }

    # local truncation error coefficients (5th minus embedded 4th order)
    TR = [71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]

    def __init__(self, tol: Optional[float] = None, dense_dt: Optional[float] = None):
        self.tol = tol or settings.INTEGRATOR_TOL
        self.dense_dt = dense_dt or settings.DENSE_OUTPUT_DT

    def integrate_ensemble(
        self,
        field: BeltramiField,
        points,
        t_end: float,
        tol: Optional[float] = None,
        dense_dt: Optional[float] = None,
        on_sphere: bool = False,
    ) -> EnsembleResult:
        """
        Advance all start points together to t_end

        Args:
            field: field to follow
            points: start points, shape (n, 3)
            t_end: signed final time
            tol: error tolerance relative to the domain length scale; a step is
                accepted when its RMS error estimate is at most tol * length_scale
            dense_dt: output spacing
            on_sphere: project every state onto the boundary sphere (ball only)

        Returns:
            EnsembleResult; escaping or non-finite points are frozen and reported in failures
        """
        tol = tol or self.tol
        dense_dt = dense_dt or self.dense_dt
        domain = field.domain
        ball = isinstance(domain, BallDomain)
        y = np.array(points, dtype=float).reshape(-1, 3)
        n = len(y)
        if ball and not np.all(domains.contains(domain, y)):
            raise DomainMembershipError("start point outside the ball", "flow.integrate")
        if on_sphere:
            if not ball:
                raise UnsupportedOperationError("sphere projection needs a ball domain", "flow.integrate")
            y = self._to_sphere(y, domain.radius)

        direction = 1.0 if t_end >= 0 else -1.0
        total = abs(float(t_end))
        n_out = int(math.ceil(total / dense_dt - 1e-9)) if total > 0 else 0
        sample_times = np.minimum(np.arange(n_out + 1) * dense_dt, total)
        length = domains.length_scale(domain)
        scale_floor = tol * length

        stats = IntegratorStats()
        failures: List[Optional[str]] = [None] * n
        active = np.ones(n, dtype=bool)

        f = field.eval(y)
        stats.evaluations += n
        positions = [self._store(domain, y)]
        velocities = [f.copy()]

        speed = float(np.max(np.linalg.norm(f, axis=1))) if n else 0.0
        h = dense_dt if speed == 0 else min(dense_dt, 0.1 * length / speed)
        t = 0.0

        for k in range(1, n_out + 1):
            target = sample_times[k]
            while t < target:
                remaining = target - t
                clipped = h >= remaining * (1.0 - 1e-10)
                step = remaining if clipped else h
                if step < 1e-12 * max(1.0, t):
                    raise StiffnessError(f"step size underflow at t={direction * t:g}", "flow.integrate")
                if stats.steps + stats.rejected_steps > settings.MAX_STEPS:
                    raise StiffnessError(f"more than {settings.MAX_STEPS} steps", "flow.integrate")

                y_new, f_new, error = self._attempt(field, y, f, direction * step)
                stats.evaluations += 6 * n
                with np.errstate(invalid="ignore", divide="ignore"):
                    error_norm = np.sqrt(np.mean((error / scale_floor) ** 2, axis=1))

                bad = active & ~np.isfinite(error_norm)
                if np.any(bad):
                    for i in np.flatnonzero(bad):
                        failures[i] = f"non-finite field value near t={direction * t:g}"
                    active &= ~bad
                    logger.warning(f"{int(bad.sum())} trajectories hit non-finite field values")
                err = float(np.max(error_norm[active])) if np.any(active) else 0.0

                if err <= 1.0:
                    t = target if clipped else t + step
                    stats.steps += 1
                    if np.any(active):
                        stats.max_error_estimate = max(
                            stats.max_error_estimate, float(np.max(np.linalg.norm(error[active], axis=1)))
                        )
                    y_new, reproject = self._constrain(domain, y_new, active, failures, on_sphere, direction * t)
                    if reproject:
                        f_new = field.eval(y_new)
                        stats.evaluations += n
                    y = np.where(active[:, None], y_new, y)
                    f = np.where(active[:, None], f_new, 0.0)
                    factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                    h = max(h, step * factor) if clipped else step * factor
                else:
                    stats.rejected_steps += 1
                    h = step * max(0.2, 0.9 * err ** -0.2)
                    logger.debug(f"Rejected step {step:.3e} at t={direction * t:.6g} (err={err:.3g})")

            positions.append(self._store(domain, y))
            velocities.append(f.copy())

        return EnsembleResult(
            times=direction * sample_times,
            points=np.stack(positions, axis=1),
            velocities=np.stack(velocities, axis=1),
            final=y,
            stats=stats,
            failures=failures,
        )

    def _attempt(self, field: BeltramiField, y: np.ndarray, f: np.ndarray, h: float):
        stages = [f]
        for row in range(5):
            increment = sum(a * stage for a, stage in zip(self.BT[row], stages) if a != 0)
            stages.append(field.eval(y + h * increment))
        y_new = y + h * sum(b * stage for b, stage in zip(self.BT[5], stages) if b != 0)
        stages.append(field.eval(y_new))
        error = h * sum(e * stage for e, stage in zip(self.TR, stages) if e != 0)
        return y_new, stages[-1], error

    @staticmethod
    def _store(domain, y: np.ndarray) -> np.ndarray:
        return domains.wrap(domain, y) if domains.is_torus(domain) else y.copy()

    @staticmethod
    def _to_sphere(y: np.ndarray, radius: float) -> np.ndarray:
        norms = np.linalg.norm(y, axis=1, keepdims=True)
        return np.where(norms > 0, y * radius / np.where(norms > 0, norms, 1.0), y)

    def _constrain(self, domain, y: np.ndarray, active: np.ndarray, failures, on_sphere: bool, t: float):
        """Escape detection and renormalisation on the ball; returns (states, changed)"""
        if not isinstance(domain, BallDomain):
            return y, False
        radius = domain.radius
        if on_sphere:
            return self._to_sphere(y, radius), True
        r = np.linalg.norm(y, axis=1)
        escaped = active & (r > radius * (1.0 + settings.BALL_ESCAPE_TOL))
        for i in np.flatnonzero(escaped):
            failures[i] = f"left the ball at t={t:g} (|p|/R - 1 = {r[i] / radius - 1.0:.3e})"
        active &= ~escaped
        drift = r > radius * (1.0 + settings.BALL_RENORMALIZE_TOL)
        if not np.any(drift & active):
            return y, False
        y = np.where(drift[:, None], y * (radius / np.where(r > 0, r, 1.0))[:, None], y)
        return y, True

    def integrate(
        self,
        field: BeltramiField,
        p0,
        t_end: float,
        tol: Optional[float] = None,
        dense_dt: Optional[float] = None,
        on_sphere: bool = False,
    ) -> Trajectory:
        """
        Integrate one field line and classify it

        Args:
            field: field to follow
            p0: start point
            t_end: signed final time
            tol: error tolerance relative to the domain length scale; a step is
                accepted when its RMS error estimate is at most tol * length_scale

        Returns:
            Trajectory with samples every dense-output interval
        """
        result = self.integrate_ensemble(field, [p0], t_end, tol, dense_dt, on_sphere)
        if result.failures[0]:
            raise EscapeError(result.failures[0], "flow.integrate")
        trajectory = self._single(field, result, 0)
        trajectory.classification = classify(trajectory)
        logger.debug(
            f"Integrated {field.name} from {np.round(trajectory.start, 6).tolist()} to t={t_end:g}: "
            f"{result.stats.steps} steps, {result.stats.rejected_steps} rejected"
        )
        return trajectory

    @staticmethod
    def _single(field: BeltramiField, result: EnsembleResult, index: int) -> Trajectory:
        times, points, velocities = result.times, result.points[index], result.velocities[index]
        direction = 1 if len(times) < 2 or times[-1] >= 0 else -1
        if direction < 0:
            times, points, velocities = times[::-1], points[::-1], velocities[::-1]
        return Trajectory(
            field_name=field.name,
            start=result.points[index, 0].copy(),
            times=np.ascontiguousarray(times),
            points=np.ascontiguousarray(points),
            velocities=np.ascontiguousarray(velocities),
            final=result.final[index].copy(),
            stats=result.stats,
            direction=direction,
            scale=field.scale,
            domain=field.domain,
        )


# Return-distance search

def _hermite(a, va, b, vb, dt, sigma):
    s2, s3 = sigma * sigma, sigma ** 3
    return (
        (2 * s3 - 3 * s2 + 1) * a
        + (s3 - 2 * s2 + sigma) * dt * va
        + (-2 * s3 + 3 * s2) * b
        + (s3 - s2) * dt * vb
    )


def _refine_minimum(domain, times, points, velocities, p0, index, lo, hi) -> Tuple[float, float]:
    """Minimise the distance to p0 over the cubic interpolants adjacent to a sample"""
    best_d = float(domains.distance(domain, points[index], p0, check=False))
    best_t = float(abs(times[index]))
    for j in (index - 1, index):
        if j < 0 or j + 1 >= len(times):
            continue
        a = points[j]
        b = a + domains.displacement(domain, a, points[j + 1])
        dt = times[j + 1] - times[j]
        va, vb = velocities[j], velocities[j + 1]

        def objective(sigma, a=a, b=b, va=va, vb=vb, dt=dt):
            return float(domains.distance(domain, _hermite(a, va, b, vb, dt, sigma), p0, check=False))

        found = minimize_scalar(objective, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-6})
        t_found = abs(times[j] + found.x * dt)
        if found.fun < best_d and lo <= t_found <= hi:
            best_d, best_t = float(found.fun), float(t_found)
    return best_d, best_t


def closest_return(domain, times, points, velocities, p0, lo: float, hi: float) -> Tuple[Optional[float], Optional[float]]:
    """Minimum distance back to p0 over |t| in [lo, hi]; arrays in integration order"""
    abs_times = np.abs(times)
    window = np.flatnonzero((abs_times >= lo) & (abs_times <= hi))
    if len(window) == 0:
        return None, None
    distances = domains.distance(domain, points[window], p0, check=False)
    index = int(window[int(np.argmin(distances))])
    return _refine_minimum(domain, times, points, velocities, p0, index, lo, hi)


def classify(
    traj: Trajectory,
    return_eps: Optional[float] = None,
    min_period: Optional[float] = None,
) -> Classification:
    """
    Finite-precision trajectory type

    Constant when the start speed is below the zero-speed tolerance;
    Indeterminate when the horizon is shorter than two minimum periods or a
    single return cannot be confirmed; Periodic when two consecutive returns
    within return_eps have periods agreeing to PERIOD_AGREEMENT; otherwise
    NonPeriodic. The default min_period is MIN_RETURN_LENGTH / scale, so
    scaling the field by c and the horizon by 1/c leaves the verdict unchanged.
    """
    return_eps = return_eps or settings.RETURN_EPS
    min_period = min_period or settings.MIN_RETURN_LENGTH / traj.scale
    times, points, velocities = traj.from_start()
    domain = traj.domain
    p0 = points[0]

    speed = float(np.linalg.norm(velocities[0]))
    if speed < settings.ZERO_SPEED_TOL * traj.scale:
        return Classification(kind=ClassKind.CONSTANT)
    horizon = traj.horizon
    if horizon < 2.0 * min_period:
        return Classification(kind=ClassKind.INDETERMINATE)

    returns = _return_times(domain, times, points, velocities, p0, return_eps, min_period, horizon)
    if len(returns) >= 2:
        first, second = returns[0], returns[1] - returns[0]
        if abs(second - first) <= settings.PERIOD_AGREEMENT * first:
            return Classification(kind=ClassKind.PERIODIC, period=first)
        return Classification(kind=ClassKind.NON_PERIODIC)
    if len(returns) == 1 and horizon < 2.0 * returns[0] * (1.0 + settings.PERIOD_AGREEMENT):
        return Classification(kind=ClassKind.INDETERMINATE)
    return Classification(kind=ClassKind.NON_PERIODIC)


def _return_times(domain, times, points, velocities, p0, eps, min_period, horizon) -> List[float]:
    abs_times = np.abs(times)
    window = np.flatnonzero(abs_times >= min_period)
    if len(window) == 0:
        return []
    close = domains.distance(domain, points[window], p0, check=False) < eps
    returns = []
    run_start = None
    for position in range(len(window) + 1):
        inside = position < len(window) and close[position]
        if inside and run_start is None:
            run_start = position
        elif not inside and run_start is not None:
            # a run touching the window start has not left the start neighbourhood yet
            if run_start > 0:
                run = window[run_start:position]
                distances = domains.distance(domain, points[run], p0, check=False)
                index = int(run[int(np.argmin(distances))])
                _, t_return = _refine_minimum(domain, times, points, velocities, p0, index, min_period, horizon)
                returns.append(t_return)
            run_start = None
    return returns


# Ensemble experiments

def _chunks(n: int) -> List[Tuple[int, int]]:
    size = settings.ENSEMBLE_CHUNK_SIZE
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _recurrence_chunk(integrator, field, starts, offset, horizon, eps, tol) -> List[RecurrencePoint]:
    domain = field.domain
    lo, hi = horizon / 4.0, horizon
    speeds = np.linalg.norm(field.eval(starts), axis=1)
    runs = {}
    errors = {}
    for sign in (1, -1):
        try:
            runs[sign] = integrator.integrate_ensemble(field, starts, sign * horizon, tol=tol)
        except StiffnessError as exc:
            errors[sign] = str(exc)

    records = []
    for i, start in enumerate(starts):
        record = RecurrencePoint(index=offset + i, start=tuple(float(c) for c in start))
        failures = []
        for sign, label in ((1, "forward"), (-1, "backward")):
            if sign in errors:
                failures.append(errors[sign])
                continue
            run = runs[sign]
            if run.failures[i]:
                failures.append(run.failures[i])
                continue
            if speeds[i] < settings.ZERO_SPEED_TOL * field.scale:
                distance, t_return = 0.0, None
            else:
                distance, t_return = closest_return(
                    domain, run.times, run.points[i], run.velocities[i], start, lo, hi
                )
            setattr(record, f"{label}_distance", distance)
            setattr(record, f"{label}_time", t_return)
            setattr(record, f"recurrent_{label}", distance is not None and distance < eps)
        record.failure = "; ".join(failures) if failures else None
        records.append(record)
    return records


def recurrence_experiment(
    field: BeltramiField,
    n: int,
    T: float,
    eps: float,
    seed: int,
    threads: Optional[int] = None,
    tol: Optional[float] = None,
) -> RecurrenceReport:
    """
    Monte-Carlo recurrence proxy over uniformly sampled start points

    Args:
        field: field to follow
        n: number of sample points
        T: horizon; returns are searched over |t| in [T/4, T]
        eps: recurrence radius
        seed: seed of the sampling substream
        threads: worker threads (chunking is fixed, so results do not depend on it)

    Returns:
        RecurrenceReport with per-point records in sample order
    """
    if n < 1 or not T > 0 or not eps > 0:
        raise ParameterError("need n >= 1, T > 0 and eps > 0", "flow.recurrence_experiment")
    starts = domains.sample_uniform(field.domain, n, seed, label="recurrence")
    threads = threads or settings.THREADS
    logger.info(f"Recurrence experiment on {field.name}: n={n}, T={T:g}, eps={eps:g}, threads={threads}")

    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = [
            executor.submit(_recurrence_chunk, flow_integrator, field, starts[lo:hi], lo, T, eps, tol)
            for lo, hi in _chunks(n)
        ]
        points = [record for future in futures for record in future.result()]

    failed = sum(1 for record in points if record.failure)
    if failed:
        logger.warning(f"{failed} of {n} recurrence trajectories failed")
    forward = sum(record.recurrent_forward for record in points) / n
    backward = sum(record.recurrent_backward for record in points) / n
    logger.info(f"Recurrent fractions: forward={forward:.3f}, backward={backward:.3f}")
    return RecurrenceReport(
        n=n,
        horizon=T,
        eps=eps,
        seed=seed,
        points=points,
        recurrent_fraction_forward=forward,
        recurrent_fraction_backward=backward,
    )


def volume_preservation_check(
    field: BeltramiField,
    p,
    T: float,
    h: float = 1e-4,
    tol: Optional[float] = None,
) -> float:
    """|det D(phi_T)(p) - 1| from central differences of six neighbouring field lines"""
    if T == 0:
        return 0.0
    p = np.asarray(p, dtype=float)
    offsets = np.vstack([np.eye(3), -np.eye(3)]) * h
    result = flow_integrator.integrate_ensemble(field, p + offsets, T, tol=tol)
    failed = [message for message in result.failures if message]
    if failed:
        raise EscapeError(failed[0], "flow.volume_preservation_check")
    jac = (result.final[:3] - result.final[3:]).T / (2.0 * h)
    return float(abs(np.linalg.det(jac) - 1.0))


def _final_point(field: BeltramiField, p, t: float, tol: Optional[float]) -> np.ndarray:
    if t == 0:
        return np.asarray(p, dtype=float)
    result = flow_integrator.integrate_ensemble(field, [p], t, tol=tol)
    if result.failures[0]:
        raise EscapeError(result.failures[0], "flow.integrate")
    return result.final[0]


def time_reversal_defect(field: BeltramiField, p, T: float, tol: Optional[float] = None) -> float:
    """Distance between p and phi_{-T}(phi_T(p))"""
    back = _final_point(field, _final_point(field, p, T, tol), -T, tol)
    return float(domains.distance(field.domain, back, p, check=False))


def flow_composition_defect(field: BeltramiField, p, s: float, t: float, tol: Optional[float] = None) -> float:
    """Distance between phi_{s+t}(p) and phi_s(phi_t(p))"""
    direct = _final_point(field, p, s + t, tol)
    composed = _final_point(field, _final_point(field, p, t, tol), s, tol)
    return float(domains.distance(field.domain, direct, composed, check=False))


def first_integral_drift(field: BeltramiField, p, T: float, tol: Optional[float] = None) -> float:
    """max |H(gamma(t)) - H(p)| along the sampled field line"""
    if not hasattr(field, "first_integral") or not getattr(field, "is_degenerate", False):
        raise UnsupportedOperationError(
            f"{field.name} has no known first integral", "flow.first_integral_drift"
        )
    trajectory = flow_integrator.integrate(field, p, T, tol=tol)
    values = field.first_integral(trajectory.points)
    return float(np.max(np.abs(values - field.first_integral(np.asarray(p, dtype=float)))))


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": traj.times,
            "x": traj.points[:, 0],
            "y": traj.points[:, 1],
            "z": traj.points[:, 2],
        }
    )


def trajectory_to_csv(traj: Trajectory, path) -> Path:
    """Write one row per dense-output sample under the header t,x,y,z"""
    path = Path(path)
    trajectory_frame(traj).to_csv(path, index=False, float_format="%.17g")
    return path


# Global integrator instance
flow_integrator = FlowIntegrator()
