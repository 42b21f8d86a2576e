from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

from app.core.config import settings


class Verdict(str, Enum):
    REGULAR = "Regular"
    IRREGULAR = "Irregular"
    INCONCLUSIVE = "Inconclusive"


class RegularityConfig(BaseModel):
    """Thresholds used by the regularity classifier."""
    model_config = {"extra": "forbid"}

    n_max: int = Field(default=settings.CLASSIFY_N_MAX, ge=1)
    regular_threshold: float = Field(default=settings.REGULAR_THRESHOLD, lt=0)
    ratio_fractions: List[float] = Field(default_factory=lambda: list(settings.RATIO_FRACTIONS))
    window: int = Field(default=settings.RATIO_WINDOW, ge=2)
    slope_tol: float = Field(default=settings.RATIO_SLOPE_TOL, gt=0)
    level_floor: float = Field(default=settings.RATIO_LEVEL_FLOOR, gt=0)
    search_depth: int = Field(default=3, ge=0)
    sup_grid_size: int = Field(default=settings.SUP_Q_GRID_SIZE, ge=2)

    @field_validator("ratio_fractions")
    def check_fractions(cls, v):
        if not v or any(not (0.0 < f < 1.0) for f in v):
            raise ValueError("ratio_fractions must be a nonempty list of values in (0, 1)")
        return v


class QProductTrace(BaseModel):
    """Partial sums of log Q along f_{i+1}^{(-1)}(env, e^{-s}) with the inner-argument trace."""
    partial_sums: List[float]
    log_h_trace: List[float]


class RatioTrend(BaseModel):
    """log h_n(env, t) - log h_n(env, s) for n = 1..n_max and its trend classification."""
    fraction: float
    log_ratios: List[float]
    slope: Optional[float] = None
    trend: str


class PointEvidence(BaseModel):
    log_q_products: List[float]
    ratio_trends: List[RatioTrend]
    thresholds: Dict[str, float]
    underflow_index: Optional[int] = None


class PointVerdict(BaseModel):
    """Classification of one point s."""
    s: float
    log_s: float
    verdict: Verdict
    evidence: PointEvidence


class ProcessVerdict(BaseModel):
    """Classification of a whole process over an s grid."""
    verdict: Verdict
    points: List[PointVerdict]


class SufficientCriterionReport(BaseModel):
    """Empirical check of sup_{s<1} Q_{xi_0}(s) <= c < 1."""
    holds: bool
    c_estimate: Optional[float] = None
    frequency: float
    samples: int
    sup_values: List[float]


class RegularPointSearch(BaseModel):
    """Search for a regular point of the shifted environment inside [h_{xi_0}(s), s]."""
    found: bool
    s: float
    interval: List[float]
    point: Optional[float] = None
    probed: List[PointVerdict]
    reason: Optional[str] = None


class ShiftConsistencyReport(BaseModel):
    """Verdict of s on env against the verdict of h_k(env, s) on shift(env, k)."""
    s: float
    k: int
    shifted_log_s: float
    verdict: Verdict
    shifted_verdict: Verdict
    consistent: bool
