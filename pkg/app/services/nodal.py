"""
Zero set of a field: location, order, rank identities, box-counting
dimension and nodal domains of the complement
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from app.config import settings
from app.exceptions import (
    DegenerateFieldError,
    EmptySetError,
    InsufficientDataError,
    InteriorOnlyError,
    OrderUndeterminedError,
    ParameterError,
    StencilOutOfDomainError,
)
from app.models import BallDomain, BoxCount, DimensionFit, RankData, ZeroRecord, ZeroSetSummary
from app.services import domains
from app.services.calculus import fd_partial
from app.services.fields import BeltramiField, MultiIndex

logger = logging.getLogger(__name__)

# box grids are shifted off the coordinate planes where analytic zero sets tend to sit
_BOX_SHIFT = 0.01234
_DEDUP_FACTOR = 1e-9
_INTERIOR_MARGIN = 1e-6


@dataclass
class ZeroSet:
    """Refined zeros grouped into eps-graph clusters"""
    domain: object
    points: np.ndarray
    labels: np.ndarray
    cell_size: float
    records: List[ZeroRecord] = dataclass_field(default_factory=list)
    dense_points: Optional[np.ndarray] = None
    dense_labels: Optional[np.ndarray] = None
    box_counts: List[BoxCount] = dataclass_field(default_factory=list)
    fitted_dimension: Optional[float] = None

    @classmethod
    def from_points(cls, points, domain, cell_size: Optional[float] = None) -> "ZeroSet":
        """Cluster an explicit point cloud with eps = 2 * cell size"""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if domains.is_torus(domain):
            points = domains.wrap(domain, points)
        cell_size = cell_size or domains.extent(domain) / settings.ZERO_GRID
        labels = cluster_points(points, domain, 2.0 * cell_size)
        return cls(domain=domain, points=points, labels=labels, cell_size=cell_size)

    @property
    def cluster_count(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def cluster_sizes(self) -> List[int]:
        return np.bincount(self.labels, minlength=self.cluster_count).tolist() if len(self.labels) else []

    def cloud(self) -> Tuple[np.ndarray, np.ndarray]:
        """Densified points when available, else the refined zeros"""
        if self.dense_points is not None:
            return self.dense_points, self.dense_labels
        return self.points, self.labels

    def summary(self) -> ZeroSetSummary:
        return ZeroSetSummary(
            records=self.records,
            cluster_count=self.cluster_count,
            cluster_sizes=self.cluster_sizes,
            cell_size=self.cell_size,
        )


def cluster_points(points: np.ndarray, domain, radius: float) -> np.ndarray:
    """Connected components of the graph joining points closer than radius"""
    if len(points) == 0:
        return np.zeros(0, dtype=int)
    if domains.is_torus(domain):
        tree = cKDTree(points, boxsize=domains.periods_of(domain))
    else:
        tree = cKDTree(points)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    n = len(points)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # relabel in order of first appearance so labels are deterministic
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(np.argsort(first))
    return order[labels]


class ZeroFinder:
    """Grid seeding plus damped Gauss-Newton refinement of zeros"""

    def __init__(self, chunk_size: Optional[int] = None):
        self.chunk_size = chunk_size or settings.ENSEMBLE_CHUNK_SIZE

    def find_zeros(
        self,
        field: BeltramiField,
        grid_res: Optional[int] = None,
        refine_tol: Optional[float] = None,
        threads: Optional[int] = None,
        characterize: bool = True,
    ) -> ZeroSet:
        """
        Locate the zero set

        Args:
            field: field to analyse
            grid_res: seeding grid points per axis (>= 8)
            refine_tol: Newton residual target (default NEWTON_TOL * scale)
            threads: worker threads for the Newton refinement
            characterize: attach order and rank data to every record

        Returns:
            ZeroSet; empty when no seed converges
        """
        grid_res = grid_res or settings.ZERO_GRID
        if grid_res < 8:
            raise ParameterError("grid_res must be at least 8", "nodal.find_zeros")
        refine_tol = refine_tol or settings.NEWTON_TOL * field.scale
        domain = field.domain
        nodes, cell = _grid_nodes(domain, grid_res)
        inside = domains.contains(domain, nodes)
        values = np.full(nodes.shape[:-1], np.inf)
        values[inside] = np.linalg.norm(field.eval(nodes[inside]), axis=-1)

        finite = values[np.isfinite(values)]
        if finite.size == 0 or np.max(finite) <= settings.ZERO_SPEED_TOL * field.scale:
            raise DegenerateFieldError(f"{field.name} vanishes on the whole grid", "nodal.find_zeros")

        seeds = self._seeds(values, nodes, cell, domain)
        logger.info(f"Refining {len(seeds)} zero seeds of {field.name} (grid {grid_res})")
        points, residuals = self._refine(field, seeds, refine_tol, threads)
        points, residuals = self._keep_in_domain(domain, points, residuals)
        points, residuals = self._deduplicate(domain, points, residuals)

        labels = cluster_points(points, domain, 2.0 * cell)
        zs = ZeroSet(domain=domain, points=points, labels=labels, cell_size=cell)
        zs.records = self._records(field, points, residuals, labels, characterize)
        logger.info(f"Found {len(points)} zeros in {zs.cluster_count} clusters")
        return zs

    @staticmethod
    def _seeds(values: np.ndarray, nodes: np.ndarray, cell: float, domain) -> np.ndarray:
        mode = "wrap" if domains.is_torus(domain) else "constant"
        local_min = values <= ndimage.minimum_filter(values, size=3, mode=mode, cval=np.inf)
        # largest grid slope bounds |X| near a zero by sqrt(3) * cell * slope
        finite = np.where(np.isfinite(values), values, np.nan)
        slopes = [np.abs(np.diff(finite, axis=axis)) for axis in range(3)]
        slope = max(float(np.nanmax(s)) if np.any(np.isfinite(s)) else 0.0 for s in slopes) / cell
        threshold = math.sqrt(3.0) * cell * slope
        mask = local_min & np.isfinite(values) & (values <= threshold)
        return nodes[mask]

    def _refine(self, field, seeds, tol, threads) -> Tuple[np.ndarray, np.ndarray]:
        if len(seeds) == 0:
            return np.zeros((0, 3)), np.zeros(0)
        chunks = [seeds[lo:lo + self.chunk_size] for lo in range(0, len(seeds), self.chunk_size)]
        with ThreadPoolExecutor(max_workers=threads or settings.THREADS) as executor:
            results = list(executor.map(lambda chunk: newton_refine(field, chunk, tol), chunks))
        points = np.vstack([r[0][r[2]] for r in results]) if results else np.zeros((0, 3))
        residuals = np.concatenate([r[1][r[2]] for r in results]) if results else np.zeros(0)
        return points, residuals

    @staticmethod
    def _keep_in_domain(domain, points, residuals):
        if domains.is_torus(domain):
            return domains.wrap(domain, points), residuals
        radius = domain.radius
        r = np.linalg.norm(points, axis=1)
        keep = r <= radius * (1.0 + 1e-9)
        points, r = points[keep], r[keep]
        outside = r > radius
        points[outside] *= (radius / r[outside])[:, None]
        return points, residuals[keep]

    @staticmethod
    def _deduplicate(domain, points, residuals):
        if len(points) == 0:
            return points, residuals
        labels = cluster_points(points, domain, _DEDUP_FACTOR * domains.length_scale(domain))
        _, first = np.unique(labels, return_index=True)
        first = np.sort(first)
        return points[first], residuals[first]

    def _records(self, field, points, residuals, labels, characterize) -> List[ZeroRecord]:
        interior = _interior_mask(field.domain, points)
        orders: List[Optional[Tuple[int, MultiIndex]]] = [None] * len(points)
        rank_data: List[Optional[RankData]] = [None] * len(points)
        if characterize and len(points):
            orders = _orders(field, points, settings.MAX_DERIVATIVE_ORDER)
            by_beta: Dict[MultiIndex, List[int]] = {}
            for i, found in enumerate(orders):
                if found is not None and interior[i]:
                    by_beta.setdefault(found[1], []).append(i)
            for beta, indices in by_beta.items():
                for i, data in zip(indices, _rank_data(field, points[indices], beta)):
                    rank_data[i] = data
        return [
            ZeroRecord(
                location=tuple(float(c) for c in points[i]),
                residual=float(residuals[i]),
                order=orders[i][0] if orders[i] else None,
                beta=orders[i][1] if orders[i] else None,
                rank_data=rank_data[i],
                cluster=int(labels[i]),
                interior=bool(interior[i]),
            )
            for i in range(len(points))
        ]

    def curve_clusters(self, field: BeltramiField, zs: ZeroSet) -> int:
        """Number of clusters whose Jacobian has a one-dimensional kernel"""
        return sum(
            1 for label in range(zs.cluster_count) if _is_curve_point(field, zs.points[zs.labels == label][0])
        )

    def densify_zero_curves(
        self,
        field: BeltramiField,
        zs: ZeroSet,
        target_per_cluster: Optional[int] = None,
    ) -> ZeroSet:
        """
        Add points along one-dimensional clusters by continuation

        Steps follow the null direction of the Jacobian and are re-projected
        onto the zero set by Newton; clusters with a full-rank Jacobian are
        isolated points and are left as they are.
        """
        target = target_per_cluster or settings.CONTINUATION_TARGET
        domain = zs.domain
        ds = domains.extent(domain) / target
        tol = settings.NEWTON_TOL * field.scale
        clouds, cloud_labels = [], []
        for label in range(zs.cluster_count):
            members = zs.points[zs.labels == label]
            cloud = [members]
            if len(members) < target and _is_curve_point(field, members[0]):
                traced = _trace_curve(field, members[0], ds, 4 * target, tol)
                if len(traced):
                    cloud.append(traced)
            merged = np.vstack(cloud)
            clouds.append(merged)
            cloud_labels.append(np.full(len(merged), label))
            logger.debug(f"Cluster {label}: {len(members)} zeros densified to {len(merged)} points")
        if clouds:
            zs.dense_points = np.vstack(clouds)
            zs.dense_labels = np.concatenate(cloud_labels)
        else:
            zs.dense_points, zs.dense_labels = np.zeros((0, 3)), np.zeros(0, dtype=int)
        return zs


def newton_refine(field: BeltramiField, seeds, tol: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Damped Gauss-Newton with the pseudoinverse step, halving on failure to decrease

    Returns:
        (points, residuals, converged mask)
    """
    x = np.array(seeds, dtype=float).reshape(-1, 3)
    F = field.eval(x)
    r = np.linalg.norm(F, axis=1)
    converged = r < tol
    alive = np.isfinite(r)
    for iteration in range(settings.NEWTON_MAX_ITER):
        idx = np.flatnonzero(alive & ~converged)
        if len(idx) == 0:
            break
        jac = field.jacobian(x[idx])
        step = -np.einsum("kij,kj->ki", np.linalg.pinv(jac, rcond=settings.PINV_RCOND), F[idx])
        alpha = np.ones(len(idx))
        accepted = np.zeros(len(idx), dtype=bool)
        for _ in range(settings.NEWTON_BACKTRACK):
            pending = np.flatnonzero(~accepted)
            if len(pending) == 0:
                break
            trial = x[idx[pending]] + alpha[pending, None] * step[pending]
            F_trial = field.eval(trial)
            r_trial = np.linalg.norm(F_trial, axis=1)
            better = (r_trial < r[idx[pending]]) | (r_trial < tol)
            good = pending[better]
            x[idx[good]] = trial[better]
            F[idx[good]] = F_trial[better]
            r[idx[good]] = r_trial[better]
            accepted[good] = True
            alpha[pending[~better]] *= 0.5
        alive[idx[~accepted]] = False
        converged |= r < tol
        logger.debug(f"Newton iteration {iteration}: {int(converged.sum())}/{len(x)} converged")
    return x, r, converged


def _grid_nodes(domain, grid_res: int) -> Tuple[np.ndarray, float]:
    if domains.is_torus(domain):
        periods = domains.periods_of(domain)
        axes = [np.arange(grid_res) * p / grid_res for p in periods]
        cell = float(max(periods)) / grid_res
    else:
        cell = 2.0 * domain.radius / grid_res
        axis = -domain.radius + (np.arange(grid_res) + 0.5) * cell
        axes = [axis, axis, axis]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack(grids, axis=-1), cell


def _interior_mask(domain, points: np.ndarray) -> np.ndarray:
    if domains.is_torus(domain):
        return np.ones(len(points), dtype=bool)
    return np.linalg.norm(points, axis=1) < domain.radius * (1.0 - _INTERIOR_MARGIN)


def _multi_indices(order: int) -> List[MultiIndex]:
    return [alpha for alpha in product(range(order + 1), repeat=3) if sum(alpha) == order][::-1]


def _partial(field: BeltramiField, alpha: MultiIndex, points: np.ndarray) -> Tuple[Optional[np.ndarray], bool]:
    """Exact partial when the field provides one, else finite differences (flagged)"""
    exact = field.partial(alpha, points)
    if exact is not None:
        return exact, True
    try:
        return fd_partial(field.eval, alpha, points, domain=field.domain, shrink=True), False
    except StencilOutOfDomainError:
        return None, False


def _orders(field: BeltramiField, points: np.ndarray, max_order: int) -> List[Optional[Tuple[int, MultiIndex]]]:
    """Order and witness beta per point; None where undetermined up to max_order"""
    found: List[Optional[Tuple[int, MultiIndex]]] = [None] * len(points)
    pending = np.ones(len(points), dtype=bool)
    cap = getattr(field, "degree_cap", None)
    warned = False
    for m in range(1, max_order + 1):
        for alpha in _multi_indices(m):
            if not np.any(pending):
                return found
            values, exact = _partial(field, alpha, points)
            if values is None:
                continue
            if not exact and cap is not None and m > cap and not warned:
                logger.warning(f"{field.name}: order {m} exceeds the symbolic degree cap {cap}; using finite differences")
                warned = True
            tol = (settings.DERIVATIVE_TOL if exact else settings.FD_DERIVATIVE_TOL) * field.scale
            hit = pending & np.any(np.abs(values) > tol, axis=-1)
            axis = next(k for k in range(3) if alpha[k] > 0)
            beta = tuple(a - int(k == axis) for k, a in enumerate(alpha))
            for i in np.flatnonzero(hit):
                found[i] = (m, beta)
            pending &= ~hit
    return found


def zero_order(field: BeltramiField, p, max_order: Optional[int] = None) -> Tuple[int, MultiIndex]:
    """
    Smallest m such that some partial of order m of some component is non-zero

    Returns:
        (order, beta) with |beta| = order - 1 and d_k d^beta X(p) != 0 for some k
    """
    max_order = max_order or settings.MAX_DERIVATIVE_ORDER
    p = np.asarray(p, dtype=float).reshape(1, 3)
    residual = float(np.linalg.norm(field.eval(p)))
    if residual > settings.DERIVATIVE_TOL * field.scale:
        raise ParameterError(f"|X(p)| = {residual:.3e} is not a zero", "nodal.zero_order")
    found = _orders(field, p, max_order)[0]
    if found is None:
        raise OrderUndeterminedError(
            f"all derivatives up to order {max_order} vanish; finite order not confirmed", "nodal.zero_order"
        )
    return found


def _rank_data(field: BeltramiField, points: np.ndarray, beta: MultiIndex) -> List[RankData]:
    columns = []
    for axis in range(3):
        alpha = tuple(b + int(k == axis) for k, b in enumerate(beta))
        values, _ = _partial(field, alpha, points)
        if values is None:
            raise StencilOutOfDomainError("derivative stencil leaves the ball", "nodal.rank_identities_at_zero")
        columns.append(values)
    matrices = np.stack(columns, axis=-1)
    records = []
    for matrix in matrices:
        singular = np.linalg.svd(matrix, compute_uv=False)
        sigma_max = float(singular[0])
        rank = int(np.sum(singular > settings.RANK_THRESHOLD * sigma_max)) if sigma_max > 0 else 0
        records.append(
            RankData(
                matrix=matrix.tolist(),
                singular_values=singular.tolist(),
                rank=rank,
                symmetry_defect=float(np.max(np.abs(matrix - matrix.T))),
                trace=float(abs(np.trace(matrix))),
                norm=sigma_max,
            )
        )
    return records


def rank_identities_at_zero(field: BeltramiField, p, beta: Sequence[int] = (0, 0, 0)) -> RankData:
    """
    Jacobian of h = d^beta X at an interior zero

    Args:
        field: field to analyse
        p: interior zero of order |beta| + 1
        beta: witness multi-index from zero_order

    Returns:
        RankData with singular values, rank, symmetry defect and |trace|
    """
    p = np.asarray(p, dtype=float).reshape(1, 3)
    if not _interior_mask(field.domain, p)[0]:
        raise InteriorOnlyError("rank identities hold at interior zeros only", "nodal.rank_identities_at_zero")
    beta = tuple(int(b) for b in beta) if len(beta) else (0, 0, 0)
    return _rank_data(field, p, beta)[0]


def _is_curve_point(field: BeltramiField, p: np.ndarray) -> bool:
    singular = np.linalg.svd(field.jacobian(p.reshape(1, 3))[0], compute_uv=False)
    return singular[0] > 0 and singular[-1] < settings.RANK_THRESHOLD * singular[0] and singular[1] > 0


def _trace_curve(field: BeltramiField, start: np.ndarray, ds: float, max_points: int, tol: float) -> np.ndarray:
    domain = field.domain
    traced = []
    for sign in (1.0, -1.0):
        x = start.copy()
        previous = None
        closed = False
        for step in range(max_points):
            _, singular, vt = np.linalg.svd(field.jacobian(x.reshape(1, 3))[0])
            tangent = vt[-1]
            if previous is None:
                tangent = sign * tangent
            elif np.dot(tangent, previous) < 0:
                tangent = -tangent
            corrected, _, ok = newton_refine(field, x + ds * tangent, tol)
            if not ok[0]:
                break
            x = corrected[0]
            if not domains.is_torus(domain) and not domains.contains(domain, x):
                break
            if step > 3 and domains.distance(domain, x, start, check=False) < 0.75 * ds:
                closed = True
                break
            traced.append(domains.wrap(domain, x) if domains.is_torus(domain) else x.copy())
            previous = tangent
        if closed:
            break
    return np.asarray(traced).reshape(-1, 3)


# Box counting

def _box_counts(points: np.ndarray, domain, scales: Sequence[float]) -> List[int]:
    start = domains.origin(domain) - _BOX_SHIFT * domains.extent(domain)
    counts = []
    for eps in scales:
        boxes = np.floor((points - start) / eps).astype(np.int64)
        counts.append(len(np.unique(boxes, axis=0)))
    return counts


def _spacing(points: np.ndarray, domain) -> float:
    if len(points) < 2:
        return 0.0
    if domains.is_torus(domain):
        tree = cKDTree(points, boxsize=domains.periods_of(domain))
    else:
        tree = cKDTree(points)
    distances, _ = tree.query(points, k=2)
    return float(np.median(distances[:, 1]))


def _fit(points: np.ndarray, domain, scales: Sequence[float]) -> Tuple[Optional[float], List[BoxCount]]:
    spacing = _spacing(points, domain)
    usable = [eps for eps in scales if eps >= 2.0 * spacing]
    counts = _box_counts(points, domain, usable)
    table = [BoxCount(scale=float(eps), count=int(c)) for eps, c in zip(usable, counts)]
    if len(usable) < 3:
        return None, table
    slope, _ = np.polyfit(np.log(1.0 / np.asarray(usable)), np.log(np.asarray(counts, dtype=float)), 1)
    return float(slope), table


def box_counting_dimension(zs: ZeroSet, scales: Optional[Sequence[float]] = None) -> DimensionFit:
    """
    Least-squares slope of log N(eps) against log(1/eps)

    Scales default to extent / 2^k for k = 2..7; a scale is usable when it
    is at least twice the median nearest-neighbour spacing of the cloud.
    """
    points, labels = zs.cloud()
    if len(points) == 0:
        raise EmptySetError("zero set is empty", "nodal.box_counting_dimension")
    if scales is None:
        scales = [domains.extent(zs.domain) / 2.0**k for k in settings.BOX_LEVELS]
    scales = sorted((float(s) for s in scales), reverse=True)

    slope, table = _fit(points, zs.domain, scales)
    if slope is None:
        raise InsufficientDataError(
            f"only {len(table)} usable box scales (need 3)", "nodal.box_counting_dimension"
        )
    cluster_slopes = [
        _fit(points[labels == label], zs.domain, scales)[0] for label in range(int(labels.max()) + 1)
    ]
    zs.box_counts = table
    zs.fitted_dimension = slope
    logger.info(f"Box-counting slope {slope:.4f} over {len(table)} scales ({len(points)} points)")
    return DimensionFit(slope=slope, box_counts=table, cluster_slopes=cluster_slopes, points=len(points))


# Nodal domains

def _excluded_cells(domain, zeros: np.ndarray, grid_res: int, margin: float) -> np.ndarray:
    """Cells whose box lies within margin of some zero"""
    if domains.is_torus(domain):
        origin = np.zeros(3)
        cell = domains.periods_of(domain) / grid_res
    else:
        origin = np.full(3, -domain.radius)
        cell = np.full(3, 2.0 * domain.radius / grid_res)
    excluded = np.zeros((grid_res,) * 3, dtype=bool)
    if len(zeros) == 0:
        return excluded
    reach = int(np.ceil(margin / float(np.min(cell)))) + 1
    offsets = np.array(list(product(range(-reach, reach + 1), repeat=3)))
    for lo in range(0, len(zeros), 256):
        q = zeros[lo:lo + 256] - origin
        base = np.floor(q / cell).astype(np.int64)
        index = base[:, None, :] + offsets[None, :, :]
        low = index * cell
        gap = np.maximum(np.maximum(low - q[:, None, :], q[:, None, :] - (low + cell)), 0.0)
        near = np.sqrt(np.sum(gap * gap, axis=-1)) <= margin
        hits = index[near]
        if domains.is_torus(domain):
            hits = np.mod(hits, grid_res)
        else:
            hits = hits[np.all((hits >= 0) & (hits < grid_res), axis=1)]
        excluded[hits[:, 0], hits[:, 1], hits[:, 2]] = True
    return excluded


def _periodic_components(free: np.ndarray) -> int:
    labels, count = ndimage.label(free)
    if count == 0:
        return 0
    rows, cols = [], []
    for axis in range(3):
        first = np.take(labels, 0, axis=axis)
        last = np.take(labels, -1, axis=axis)
        both = (first > 0) & (last > 0)
        rows.append(first[both] - 1)
        cols.append(last[both] - 1)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(count, count))
    components, _ = connected_components(graph, directed=False)
    return int(components)


def count_nodal_domains(
    field: BeltramiField,
    grid_res: Optional[int] = None,
    zero_margin: Optional[float] = None,
    zs: Optional[ZeroSet] = None,
) -> int:
    """
    Number of connected components of the complement of the zero set

    Args:
        field: field to analyse
        grid_res: cells per axis (>= 32)
        zero_margin: exclusion distance (default NODAL_MARGIN_FACTOR * cell diagonal)
        zs: precomputed zero set (found with the default grid otherwise)

    Returns:
        Component count under 6-connectivity (periodic on the torus, interior cells on the ball)
    """
    grid_res = grid_res or settings.NODAL_GRID
    if grid_res < 32:
        raise ParameterError("grid_res must be at least 32", "nodal.count_nodal_domains")
    domain = field.domain
    cell = domains.extent(domain) / grid_res
    zero_margin = zero_margin if zero_margin is not None else settings.NODAL_MARGIN_FACTOR * math.sqrt(3.0) * cell
    if zs is None:
        zs = zero_finder.find_zeros(field, characterize=False)
    points, _ = zs.cloud()

    excluded = _excluded_cells(domain, points, grid_res, zero_margin)
    if domains.is_torus(domain):
        free = ~excluded
    else:
        centers, _ = _grid_nodes(domain, grid_res)
        free = ~excluded & (np.linalg.norm(centers, axis=-1) < domain.radius)
    if not np.any(free):
        raise DegenerateFieldError("every cell is excluded by the zero set", "nodal.count_nodal_domains")

    if domains.is_torus(domain):
        count = _periodic_components(free)
    else:
        _, count = ndimage.label(free)
    logger.info(
        f"{field.name}: {int(count)} nodal domain(s) on a {grid_res}^3 grid "
        f"({int(excluded.sum())} cells excluded)"
    )
    return int(count)


# Serialisation

def zero_set_to_json(zs: ZeroSet) -> str:
    return zs.summary().model_dump_json()


def box_counts_frame(counts: Sequence[BoxCount]) -> pd.DataFrame:
    return pd.DataFrame({"scale": [c.scale for c in counts], "count": [c.count for c in counts]})


def box_counts_to_csv(counts: Sequence[BoxCount], path) -> Path:
    path = Path(path)
    box_counts_frame(counts).to_csv(path, index=False, float_format="%.17g")
    return path


# Global zero finder instance
zero_finder = ZeroFinder()


def find_zeros(field: BeltramiField, grid_res: Optional[int] = None, refine_tol: Optional[float] = None) -> ZeroSet:
    return zero_finder.find_zeros(field, grid_res, refine_tol)


def densify_zero_curves(field: BeltramiField, zs: ZeroSet, target_per_cluster: Optional[int] = None) -> ZeroSet:
    return zero_finder.densify_zero_curves(field, zs, target_per_cluster)
