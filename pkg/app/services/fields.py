"""
Catalog of exact Beltrami fields: ABC flows on the 2*pi torus and the
spheromak on the solid ball
"""
import logging
import math
import re
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy.optimize import bisect

from app.exceptions import CatalogError, IncompatibleDomainError, ParameterError
from app.models import AbcParams, BallDomain, TorusDomain

logger = logging.getLogger(__name__)

AnyDomain = Union[TorusDomain, BallDomain]
MultiIndex = Tuple[int, int, int]

CATALOG_FORMATS = [
    "abc:A,B,C",
    "spheromak:R,B0",
    "expr:<file>",
]

_J1_SERIES_CUTOFF = 1e-2
_RADIAL_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 12


class BeltramiField:
    """
    Evaluable vector field with analytic Jacobian and curl

    Points are arrays of shape (..., 3); values have the same shape,
    Jacobians shape (..., 3, 3) with J[..., i, j] = d_j X^i.
    """

    def __init__(
        self,
        name: str,
        domain: AnyDomain,
        lam: Optional[float],
        scale: float = 1.0,
        tangent_to_boundary: bool = False,
    ):
        self.name = name
        self.domain = domain
        self.lam = lam
        self.scale = scale
        self.tangent_to_boundary = tangent_to_boundary

    def eval(self, points) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, points) -> np.ndarray:
        raise NotImplementedError

    def curl(self, points) -> np.ndarray:
        jac = self.jacobian(points)
        return np.stack(
            [
                jac[..., 2, 1] - jac[..., 1, 2],
                jac[..., 0, 2] - jac[..., 2, 0],
                jac[..., 1, 0] - jac[..., 0, 1],
            ],
            axis=-1,
        )

    def divergence(self, points) -> np.ndarray:
        return np.trace(self.jacobian(points), axis1=-2, axis2=-1)

    def partial(self, alpha: MultiIndex, points) -> Optional[np.ndarray]:
        """Exact d^alpha of all three components, or None when unavailable"""
        if sum(alpha) == 0:
            return self.eval(points)
        if sum(alpha) == 1:
            axis = alpha.index(1)
            return self.jacobian(points)[..., :, axis]
        return None

    def lambda_at(self, points) -> np.ndarray:
        """Proportionality function: the constant eigenvalue or <curl X, X>/<X, X>"""
        points = np.asarray(points, dtype=float)
        if self.lam is not None:
            return np.full(points.shape[:-1], float(self.lam))
        values = self.eval(points)
        rotation = self.curl(points)
        norm2 = np.sum(values * values, axis=-1)
        safe = np.where(norm2 > 0, norm2, 1.0)
        return np.where(norm2 > 0, np.sum(rotation * values, axis=-1) / safe, 0.0)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class AbcField(BeltramiField):
    """X = (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x), curl X = X"""

    def __init__(self, params: AbcParams, domain: AnyDomain):
        self.params = params
        super().__init__(
            name=f"abc:{_fmt(params.A)},{_fmt(params.B)},{_fmt(params.C)}",
            domain=domain,
            lam=1.0,
            scale=abs(params.A) + abs(params.B) + abs(params.C),
        )

    def eval(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        A, B, C = self.params.A, self.params.B, self.params.C
        return np.stack(
            [
                A * np.sin(z) + C * np.cos(y),
                B * np.sin(x) + A * np.cos(z),
                C * np.sin(y) + B * np.cos(x),
            ],
            axis=-1,
        )

    def jacobian(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        A, B, C = self.params.A, self.params.B, self.params.C
        zero = np.zeros_like(x)
        rows = [
            [zero, -C * np.sin(y), A * np.cos(z)],
            [B * np.cos(x), zero, -A * np.sin(z)],
            [-B * np.sin(x), C * np.cos(y), zero],
        ]
        return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)

    def partial(self, alpha: MultiIndex, points) -> Optional[np.ndarray]:
        # d^k sin(u) = sin(u + k pi/2), d^k cos(u) = cos(u + k pi/2)
        p = np.asarray(points, dtype=float)
        A, B, C = self.params.A, self.params.B, self.params.C
        terms = [
            [(A, np.sin, 2), (C, np.cos, 1)],
            [(B, np.sin, 0), (A, np.cos, 2)],
            [(C, np.sin, 1), (B, np.cos, 0)],
        ]
        order = sum(alpha)
        components = []
        for component_terms in terms:
            total = np.zeros(p.shape[:-1])
            for coeff, func, axis in component_terms:
                if coeff == 0:
                    continue
                if order and alpha[axis] != order:
                    continue
                total = total + coeff * func(p[..., axis] + order * math.pi / 2.0)
            components.append(total)
        return np.stack(components, axis=-1)

    def first_integral(self, points) -> np.ndarray:
        """H = sin z - cos y, conserved by the degenerate field A=1, B=0, C=-1"""
        p = np.asarray(points, dtype=float)
        return np.sin(p[..., 2]) - np.cos(p[..., 1])

    def first_integral_gradient(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.stack([np.zeros(p.shape[:-1]), np.sin(p[..., 1]), np.cos(p[..., 2])], axis=-1)

    @property
    def is_degenerate(self) -> bool:
        return self.params.A == 1 and self.params.B == 0 and self.params.C == -1

    def zero_circle_distance(self, points) -> np.ndarray:
        """Distance to the zero circles {(x, 0, pi/2)} and {(x, pi, 3pi/2)} of the degenerate field"""
        p = np.asarray(points, dtype=float)
        circles = np.array([[0.0, math.pi / 2.0], [math.pi, 1.5 * math.pi]])
        delta = np.abs(np.mod(p[..., None, 1:] - circles, 2.0 * math.pi))
        delta = np.minimum(delta, 2.0 * math.pi - delta)
        return np.min(np.sqrt(np.sum(delta * delta, axis=-1)), axis=-1)


class SpheromakField(BeltramiField):
    """
    Lowest tangent curl eigenfield of the ball of radius R

    In Cartesian form, with s = lam*r, f = j1(s)/s, g = (f - j1'(s))/s^2, h = f + j1'(s):
        B = B0 * (lam f (-y, x, 0) + lam^2 g z (x, y, z) + h e_z)
    """

    def __init__(self, radius: float, amplitude: float, domain: Optional[BallDomain] = None):
        if not radius > 0:
            raise ParameterError("radius must be positive", "fields.spheromak_field")
        if amplitude == 0:
            raise ParameterError("amplitude must be non-zero", "fields.spheromak_field")
        if domain is None:
            domain = BallDomain(radius=radius)
        elif not isinstance(domain, BallDomain) or not math.isclose(domain.radius, radius):
            raise IncompatibleDomainError(
                f"spheromak of radius {radius} needs a ball of the same radius", "fields.spheromak_field"
            )
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        super().__init__(
            name=f"spheromak:{_fmt(radius)},{_fmt(amplitude)}",
            domain=domain,
            lam=first_j1_root() / radius,
            scale=abs(amplitude),
            tangent_to_boundary=True,
        )

    def _radial(self, points):
        p = np.asarray(points, dtype=float)
        r = np.linalg.norm(p, axis=-1)
        s = self.lam * r
        return p, s

    def eval(self, points) -> np.ndarray:
        p, s = self._radial(points)
        lam = self.lam
        f, g, _, _, h, _ = radial_profiles(s)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        toroidal = lam * f[..., None] * np.stack([-y, x, np.zeros_like(x)], axis=-1)
        poloidal = (lam * lam * g * z)[..., None] * p
        axial = np.stack([np.zeros_like(h), np.zeros_like(h), h], axis=-1)
        return self.amplitude * (toroidal + poloidal + axial)

    def jacobian(self, points) -> np.ndarray:
        p, s = self._radial(points)
        lam = self.lam
        lam2 = lam * lam
        f, g, _, dg_over_s, _, dh_over_s = radial_profiles(s)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        zero = np.zeros_like(x)
        v = np.stack([-y, x, zero], axis=-1)

        # toroidal: d_j (lam f v_i) with d_j f = -lam^2 g x_j
        jac = -lam * lam2 * g[..., None, None] * v[..., :, None] * p[..., None, :]
        dv = np.zeros(p.shape[:-1] + (3, 3))
        dv[..., 0, 1] = -1.0
        dv[..., 1, 0] = 1.0
        jac = jac + lam * f[..., None, None] * dv

        # poloidal: d_j (lam^2 g z x_i)
        jac = jac + lam2 * (lam2 * dg_over_s * z)[..., None, None] * p[..., :, None] * p[..., None, :]
        jac[..., :, 2] += lam2 * g[..., None] * p
        eye = np.broadcast_to(np.eye(3), p.shape[:-1] + (3, 3))
        jac = jac + lam2 * (g * z)[..., None, None] * eye

        # axial: d_j h with h'(s)/s = g - f
        jac[..., 2, :] += lam2 * dh_over_s[..., None] * p
        return self.amplitude * jac


class ScaledField(BeltramiField):
    """c * X; eigenvalue unchanged"""

    def __init__(self, base: BeltramiField, factor: float):
        self.base = base
        self.factor = float(factor)
        super().__init__(
            name=f"{_fmt(factor)}*{base.name}",
            domain=base.domain,
            lam=base.lam,
            scale=abs(factor) * base.scale,
            tangent_to_boundary=base.tangent_to_boundary,
        )

    def eval(self, points) -> np.ndarray:
        return self.factor * self.base.eval(points)

    def jacobian(self, points) -> np.ndarray:
        return self.factor * self.base.jacobian(points)

    def curl(self, points) -> np.ndarray:
        return self.factor * self.base.curl(points)

    def partial(self, alpha: MultiIndex, points) -> Optional[np.ndarray]:
        value = self.base.partial(alpha, points)
        return None if value is None else self.factor * value


# Spherical Bessel helpers

def _series_coefficients(terms: int = _SERIES_TERMS) -> np.ndarray:
    # j1(s)/s = sum_k a_k s^(2k), a_k = (-1/2)^k / (k! (2k+3)!!)
    coefficients = []
    for k in range(terms):
        double_factorial = 1.0
        for odd in range(2 * k + 3, 0, -2):
            double_factorial *= odd
        coefficients.append((-0.5) ** k / (math.factorial(k) * double_factorial))
    return np.asarray(coefficients)


_A = _series_coefficients()


def _even_series(s2: np.ndarray, weights: np.ndarray, shift: int = 0) -> np.ndarray:
    """sum_k weights[k] * a_k * s^(2(k - shift)) for k >= shift"""
    total = np.zeros_like(s2)
    for k in range(len(_A) - 1, shift - 1, -1):
        total = total * s2 + weights[k] * _A[k]
    return total


def spherical_j1(s) -> np.ndarray:
    """j1(s) = sin s / s^2 - cos s / s"""
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < _J1_SERIES_CUTOFF
    safe = np.where(small, 1.0, s)
    closed = np.sin(safe) / safe**2 - np.cos(safe) / safe
    series = s * _even_series(s * s, np.ones(len(_A)))
    return np.where(small, series, closed)


def spherical_j1_prime(s) -> np.ndarray:
    """j1'(s) = sin s / s - 2 j1(s) / s"""
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < _J1_SERIES_CUTOFF
    safe = np.where(small, 1.0, s)
    closed = np.sin(safe) / safe - 2.0 * (np.sin(safe) / safe**2 - np.cos(safe) / safe) / safe
    k = np.arange(len(_A))
    series = _even_series(s * s, 2 * k + 1.0)
    return np.where(small, series, closed)


def radial_profiles(s):
    """
    Radial functions of the spheromak and their scaled derivatives

    Returns:
        (f, g, f'/s, g'/s, h, h'/s) with f = j1/s, g = (f - j1')/s^2, h = f + j1'
    """
    s = np.asarray(s, dtype=float)
    s2 = s * s
    small = s < _RADIAL_SERIES_CUTOFF
    k = np.arange(len(_A), dtype=float)

    f_series = _even_series(s2, np.ones(len(_A)))
    g_series = _even_series(s2, -2.0 * k, shift=1)
    dg_series = _even_series(s2, -2.0 * k * (2.0 * k - 2.0), shift=2)

    safe = np.where(small, 1.0, s)
    j1 = np.sin(safe) / safe**2 - np.cos(safe) / safe
    j1p = np.sin(safe) / safe - 2.0 * j1 / safe
    f_closed = j1 / safe
    g_closed = (f_closed - j1p) / safe**2
    dg_closed = (f_closed - 5.0 * g_closed) / safe**2

    f = np.where(small, f_series, f_closed)
    g = np.where(small, g_series, g_closed)
    dg_over_s = np.where(small, dg_series, dg_closed)
    j1p_all = np.where(small, f_series + s2 * (-g_series), j1p)
    h = f + j1p_all
    return f, g, -g, dg_over_s, h, g - f


@lru_cache(maxsize=1)
def first_j1_root() -> float:
    """First positive root of j1, bracketed on [4, 5]"""
    root = bisect(lambda s: float(spherical_j1(s)), 4.0, 5.0, xtol=1e-14, maxiter=200)
    logger.debug(f"First j1 root: {root!r}")
    return float(root)


# Constructors

def abc_field(params: AbcParams, domain: Optional[TorusDomain] = None) -> AbcField:
    """ABC field on the standard torus with periods 2*pi"""
    if domain is None:
        domain = TorusDomain()
    if not isinstance(domain, TorusDomain) or not all(
        math.isclose(p, 2.0 * math.pi, rel_tol=1e-12) for p in domain.periods
    ):
        raise IncompatibleDomainError("ABC fields need a torus with all periods 2*pi", "fields.abc_field")
    return AbcField(params, domain)


def spheromak_field(radius: float, amplitude: float, domain: Optional[BallDomain] = None) -> SpheromakField:
    return SpheromakField(radius, amplitude, domain)


def scale_field(field: BeltramiField, c: float) -> BeltramiField:
    """Multiply value, Jacobian and curl by c != 0"""
    if c == 0 or not math.isfinite(c):
        raise ParameterError("scale factor must be a non-zero finite number", "fields.scale_field")
    if c == 1:
        return field
    return ScaledField(field, c)


def bernoulli_pressure(field: BeltramiField, points, c: float = 0.0) -> np.ndarray:
    """Pressure p = c - |X|^2/2 turning X into a stationary Euler solution"""
    values = field.eval(points)
    return c - 0.5 * np.sum(values * values, axis=-1)


class FieldCatalog:
    """Resolve catalog names such as "abc:1,0,-1" into fields"""

    _pattern = re.compile(r"^\s*(?P<kind>[a-z]+)\s*:(?P<args>.*)$", re.IGNORECASE | re.DOTALL)

    def lookup(self, name: str, domain: Optional[AnyDomain] = None) -> BeltramiField:
        """
        Construct the field named by a catalog string

        Args:
            name: "abc:A,B,C", "spheromak:R,B0" or "expr:<file>"
            domain: optional domain override (expression fields only)

        Returns:
            Constructed field
        """
        match = self._pattern.match(name or "")
        if not match:
            raise self._error(f"unknown field {name!r}")
        kind = match.group("kind").lower()
        args = match.group("args").strip()

        if kind == "expr":
            from app.services.exprfield import load_field_file

            if not args:
                raise self._error("expr needs a file path")
            return load_field_file(args, domain or TorusDomain())

        values = self._numbers(args, name)
        if kind == "abc":
            if len(values) != 3:
                raise self._error(f"abc takes 3 parameters, got {len(values)}")
            try:
                params = AbcParams(A=values[0], B=values[1], C=values[2])
            except ValidationError as exc:
                raise self._error(f"invalid ABC parameters: {exc.errors()[0]['msg']}")
            return abc_field(params)
        if kind == "spheromak":
            if len(values) != 2:
                raise self._error(f"spheromak takes 2 parameters, got {len(values)}")
            try:
                field = spheromak_field(values[0], values[1])
            except ParameterError as exc:
                raise self._error(str(exc))
            logger.info(f"Built {field.name} with lambda={field.lam:.15g}")
            return field
        raise self._error(f"unknown field kind {kind!r}")

    def _numbers(self, args: str, name: str) -> List[float]:
        try:
            values = [float(part) for part in args.split(",")]
        except ValueError:
            raise self._error(f"malformed parameters in {name!r}")
        if not all(math.isfinite(v) for v in values):
            raise self._error(f"non-finite parameters in {name!r}")
        return values

    @staticmethod
    def _error(message: str) -> CatalogError:
        return CatalogError(f"{message}; valid formats: {', '.join(CATALOG_FORMATS)}", "fields.catalog_lookup")


def _fmt(value: float) -> str:
    return f"{value:g}"


# Global field catalog instance
field_catalog = FieldCatalog()


def catalog_lookup(name: str, domain: Optional[AnyDomain] = None) -> BeltramiField:
    return field_catalog.lookup(name, domain)
