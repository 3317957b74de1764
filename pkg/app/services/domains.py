"""
Model geometries: flat 3-torus and Euclidean solid ball
"""
import hashlib
import json
import logging
from typing import Any, Dict, Union

import numpy as np
from pydantic import TypeAdapter

from app.config import settings
from app.exceptions import DomainMembershipError, UnsupportedOperationError
from app.models import BallDomain, Domain, TorusDomain

logger = logging.getLogger(__name__)

AnyDomain = Union[TorusDomain, BallDomain]

_domain_adapter = TypeAdapter(Domain)


def is_torus(domain: AnyDomain) -> bool:
    return isinstance(domain, TorusDomain)


def periods_of(domain: AnyDomain) -> np.ndarray:
    if not is_torus(domain):
        raise UnsupportedOperationError("ball domains have no periods", "domains.periods")
    return np.asarray(domain.periods, dtype=float)


def length_scale(domain: AnyDomain) -> float:
    """Characteristic length: unit for the standard 2*pi torus, the radius for the ball"""
    if is_torus(domain):
        return float(max(domain.periods)) / (2.0 * np.pi)
    return float(domain.radius)


def extent(domain: AnyDomain) -> float:
    """Edge length of the bounding box used by box counting"""
    if is_torus(domain):
        return float(max(domain.periods))
    return 2.0 * float(domain.radius)


def origin(domain: AnyDomain) -> np.ndarray:
    if is_torus(domain):
        return np.zeros(3)
    return np.full(3, -float(domain.radius))


def wrap(domain: AnyDomain, p) -> np.ndarray:
    """
    Reduce raw coordinates to the canonical torus cell [0, period)

    Args:
        domain: torus domain
        p: array of shape (..., 3)

    Returns:
        Wrapped coordinates of the same shape
    """
    if not is_torus(domain):
        raise UnsupportedOperationError("wrap is only defined on the torus", "domains.wrap")
    periods = periods_of(domain)
    wrapped = np.mod(np.asarray(p, dtype=float), periods)
    # np.mod can round tiny negatives up to the period itself
    return np.where(wrapped >= periods, 0.0, wrapped)


def contains(domain: AnyDomain, p) -> np.ndarray:
    """Membership test; always true on the torus"""
    p = np.asarray(p, dtype=float)
    if is_torus(domain):
        return np.ones(p.shape[:-1], dtype=bool)
    limit = domain.radius * (1.0 + settings.BALL_MEMBERSHIP_TOL)
    return np.linalg.norm(p, axis=-1) <= limit


def displacement(domain: AnyDomain, p, q) -> np.ndarray:
    """Shortest displacement vector from p to q (minimum image on the torus)"""
    delta = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    if is_torus(domain):
        periods = periods_of(domain)
        delta = delta - periods * np.round(delta / periods)
    return delta


def distance(domain: AnyDomain, p, q, check: bool = True) -> Union[float, np.ndarray]:
    """
    Geodesic distance on the model domain

    Torus: per-axis minimum of |d| and period - |d|, combined Euclidean-style.
    Ball: chord length (the ball is convex).
    """
    if check and not is_torus(domain):
        if not np.all(contains(domain, p)) or not np.all(contains(domain, q)):
            raise DomainMembershipError("point outside the ball", "domains.distance")
    if is_torus(domain):
        periods = periods_of(domain)
        delta = np.abs(np.mod(np.asarray(q, dtype=float) - np.asarray(p, dtype=float), periods))
        delta = np.minimum(delta, periods - delta)
    else:
        delta = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    result = np.sqrt(np.sum(delta * delta, axis=-1))
    return float(result) if np.ndim(result) == 0 else result


def substream(seed: int, label: str) -> np.random.Generator:
    """Independent random stream derived from (seed, purpose label)"""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "little")
    sequence = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(key,))
    return np.random.default_rng(sequence)


def sample_uniform(domain: AnyDomain, n: int, seed: int, label: str = "sample_uniform") -> np.ndarray:
    """
    Draw n points uniformly with respect to volume

    Args:
        domain: torus or ball
        n: number of points
        seed: 64-bit seed
        label: purpose label selecting the substream

    Returns:
        Array of shape (n, 3)
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = substream(seed, label)
    if n == 0:
        return np.zeros((0, 3))
    if is_torus(domain):
        return rng.uniform(0.0, 1.0, size=(n, 3)) * periods_of(domain)

    directions = rng.standard_normal(size=(n, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = domain.radius * np.cbrt(rng.uniform(0.0, 1.0, size=n))
    return directions * radii[:, None]


def domain_from_json(data: Union[str, Dict[str, Any]]) -> AnyDomain:
    """Parse {"kind":"torus3","periods":[...]} or {"kind":"ball3","radius":r}"""
    if isinstance(data, str):
        data = json.loads(data)
    return _domain_adapter.validate_python(data)


def domain_to_json(domain: AnyDomain) -> Dict[str, Any]:
    return domain.model_dump(mode="json")
