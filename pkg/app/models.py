"""
Data models for the Beltrami Field Laboratory
"""
import math
from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TWO_PI = 2.0 * math.pi


class TorusDomain(BaseModel):
    """Flat 3-torus R^3 / (L1 Z x L2 Z x L3 Z)"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["torus3"] = "torus3"
    periods: Tuple[float, float, float] = (TWO_PI, TWO_PI, TWO_PI)

    @field_validator("periods")
    @classmethod
    def _positive_periods(cls, value):
        if any(not math.isfinite(p) or p <= 0 for p in value):
            raise ValueError("periods must be positive")
        return value

    @property
    def boundary_components(self) -> int:
        return 0


class BallDomain(BaseModel):
    """Euclidean solid ball centred at the origin"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["ball3"] = "ball3"
    radius: float = Field(1.0, gt=0)

    @property
    def boundary_components(self) -> int:
        return 1


Domain = Annotated[Union[TorusDomain, BallDomain], Field(discriminator="kind")]


class AbcParams(BaseModel):
    """Coefficients of an Arnold-Beltrami-Childress field"""
    model_config = ConfigDict(frozen=True)

    A: float
    B: float
    C: float

    @model_validator(mode="after")
    def _not_all_zero(self):
        if self.A == 0 and self.B == 0 and self.C == 0:
            raise ValueError("A, B and C must not all be zero")
        return self


class FdScheme(BaseModel):
    """Central differences with Richardson extrapolation"""
    model_config = ConfigDict(frozen=True)

    base_step: float = Field(..., gt=0)
    extrapolation_levels: int = Field(2, ge=1)


class ClassKind(str, Enum):
    """Finite-precision trajectory types"""
    CONSTANT = "constant"
    PERIODIC = "periodic"
    NON_PERIODIC = "non_periodic"
    INDETERMINATE = "indeterminate"


class Classification(BaseModel):
    kind: ClassKind
    period: Optional[float] = None


class IntegratorStats(BaseModel):
    steps: int = 0
    rejected_steps: int = 0
    max_error_estimate: float = 0.0
    evaluations: int = 0


class RankData(BaseModel):
    """Derived-field Jacobian Dh(p) at a zero, h = d^beta X"""
    matrix: List[List[float]]
    singular_values: List[float]
    rank: int
    symmetry_defect: float
    trace: float
    norm: float


class ZeroRecord(BaseModel):
    location: Tuple[float, float, float]
    residual: float
    order: Optional[int] = None
    beta: Optional[Tuple[int, int, int]] = None
    rank_data: Optional[RankData] = None
    cluster: int = -1
    interior: bool = True


class BoxCount(BaseModel):
    scale: float
    count: int


class DimensionFit(BaseModel):
    slope: float
    box_counts: List[BoxCount]
    cluster_slopes: List[Optional[float]] = []
    points: int


class ZeroSetSummary(BaseModel):
    records: List[ZeroRecord]
    cluster_count: int
    cluster_sizes: List[int]
    cell_size: float


class RecurrencePoint(BaseModel):
    index: int
    start: Tuple[float, float, float]
    forward_distance: Optional[float] = None
    forward_time: Optional[float] = None
    backward_distance: Optional[float] = None
    backward_time: Optional[float] = None
    recurrent_forward: bool = False
    recurrent_backward: bool = False
    failure: Optional[str] = None


class RecurrenceReport(BaseModel):
    n: int
    horizon: float
    eps: float
    seed: int
    points: List[RecurrencePoint]
    recurrent_fraction_forward: float = Field(..., ge=0, le=1)
    recurrent_fraction_backward: float = Field(..., ge=0, le=1)


class BoundaryZero(BaseModel):
    theta: float
    phi: float
    cartesian: Tuple[float, float, float]
    residual: float


class TraceSummary(BaseModel):
    start: Tuple[float, float]
    forward_limit: Optional[int] = None
    backward_limit: Optional[int] = None
    forward_distance: float
    backward_distance: float
    classification: ClassKind
    f_monotone: bool
    min_increment: Optional[float] = None
    min_return_distance: Optional[float] = None


class BoundaryReport(BaseModel):
    radius: float
    zeros: List[BoundaryZero]
    count: int
    boundary_components: int
    bound_satisfied: bool
    zero_fraction: float
    tangency_max: float
    closedness_residual: float
    path_defect: float
    potential_fit_error: float
    gradient_defect: float
    traces: List[TraceSummary] = []


class RunConfig(BaseModel):
    """Per-run knobs; unknown keys are rejected"""
    model_config = ConfigDict(extra="forbid")

    command: str
    field: Optional[str] = None
    domain: Optional[Dict[str, Any]] = None
    seed: int = 7
    output_dir: str = "reports"
    format: Literal["json", "csv"] = "json"
    threads: Optional[int] = Field(None, ge=1)
    timestamp: bool = True
    grid: Optional[int] = Field(None, ge=1)
    t_end: Optional[float] = None
    start: Optional[Tuple[float, float, float]] = None
    horizon: Optional[float] = Field(None, gt=0)
    eps: Optional[float] = Field(None, gt=0)
    samples: Optional[int] = Field(None, ge=1)
    tol: Optional[float] = Field(None, gt=0)
    traces: Optional[int] = Field(None, ge=0)


class Report(BaseModel):
    """JSON report envelope with fixed top-level keys"""
    field: Optional[str]
    domain: Optional[Dict[str, Any]]
    command: str
    params: Dict[str, Any]
    results: Dict[str, Any]
    violations: List[str] = []
