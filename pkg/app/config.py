"""
Configuration settings for the Beltrami Field Laboratory
"""
import os
from typing import Tuple

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Application configuration settings

    Every attribute can be overridden by a BELTRAMI_<NAME> environment variable
    or by the same key in a .env file in the working directory (parsed with
    python-dotenv through pydantic-settings).
    """

    model_config = SettingsConfigDict(
        env_prefix="BELTRAMI_",
        env_file=".env",
        extra="ignore",
    )

    # Application
    APP_NAME: str = "Beltrami Field Laboratory"
    VERSION: str = "1.0.0"
    DESCRIPTION: str = "Numerical laboratory for field lines, zero sets and boundary dynamics of Beltrami fields"
    LOG_LEVEL: str = "INFO"

    # Parallelism
    THREADS: int = os.cpu_count() or 1
    ENSEMBLE_CHUNK_SIZE: int = 64

    # Random streams
    DEFAULT_SEED: int = 7

    # Finite differences
    FD_STEP_FACTOR: float = 1e-3  # times the domain length scale
    FD_LEVELS: int = 2
    FD_MIN_STEP_FACTOR: float = 1e-8  # ball only, times the radius
    MAX_DERIVATIVE_ORDER: int = 6

    # Membership
    BALL_MEMBERSHIP_TOL: float = 1e-12

    # Integrator
    INTEGRATOR_TOL: float = 1e-9
    DENSE_OUTPUT_DT: float = 0.05
    ZERO_SPEED_TOL: float = 1e-10  # times the field scale
    BALL_ESCAPE_TOL: float = 1e-6  # times the radius
    BALL_RENORMALIZE_TOL: float = 1e-12  # times the radius
    MAX_STEPS: int = 2_000_000

    # Classification
    RETURN_EPS: float = 0.1
    MIN_RETURN_LENGTH: float = 3.0  # minimum period times the field scale
    PERIOD_AGREEMENT: float = 0.01

    # Recurrence
    RECURRENCE_SAMPLES: int = 500
    RECURRENCE_HORIZON: float = 200.0
    RECURRENCE_EPS: float = 0.2
    RECURRENCE_MIN_FRACTION: float = 0.9

    # Zero finding
    ZERO_GRID: int = 48
    NEWTON_TOL: float = 1e-12  # times the field scale
    NEWTON_MAX_ITER: int = 60
    NEWTON_BACKTRACK: int = 12
    PINV_RCOND: float = 1e-9
    DERIVATIVE_TOL: float = 1e-8  # times the field scale
    FD_DERIVATIVE_TOL: float = 1e-5  # times the field scale
    RANK_THRESHOLD: float = 1e-6  # times sigma_max
    CONTINUATION_TARGET: int = 500
    BOX_LEVELS: Tuple[int, ...] = (2, 3, 4, 5, 6, 7)

    # Nodal domains
    NODAL_GRID: int = 64
    NODAL_MARGIN_FACTOR: float = 1.5  # times the cell diagonal

    # Boundary
    SURFACE_THETA: int = 64
    SURFACE_PHI: int = 128
    THETA_MIN: float = 0.05
    TANGENCY_TOL: float = 1e-8  # times the field scale
    QUADRATURE_NODES: int = 32
    LIMIT_ASSIGNMENT_TOL: float = 1e-3  # times the radius
    BOUNDARY_HORIZON: float = 80.0
    BOUNDARY_ZERO_TOL: float = 1e-6  # times the field scale

    # Acceptance thresholds
    RESIDUAL_THRESHOLD: float = 1e-6
    VOLUME_DEFECT_THRESHOLD: float = 1e-4
    DIMENSION_LOWER: float = 0.85  # zero sets made of curves
    DIMENSION_UPPER: float = 1.15


# Global settings instance
settings = Settings()
