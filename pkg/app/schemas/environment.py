from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.config import settings


class OffspringLawSpec(BaseModel):
    """Description of a single offspring law."""
    model_config = {"extra": "forbid"}

    family: Literal["sibuya", "finite"]
    alpha: Optional[float] = None
    weights: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_family_fields(self):
        if self.family == "sibuya":
            if self.alpha is None:
                raise ValueError("sibuya law requires alpha")
            if not (0.0 < self.alpha < 1.0):
                raise ValueError("alpha must be > 0 and < 1")
        elif not self.weights:
            raise ValueError("finite law requires a nonempty weights list")
        return self


class EnvironmentModelSpec(BaseModel):
    """Description of the law of an i.i.d. environment."""
    model_config = {"extra": "forbid"}

    kind: Literal["sibuya", "finite_mixture"] = "sibuya"
    alpha_min: Optional[float] = None
    alpha_max: Optional[float] = None
    laws: Optional[List[OffspringLawSpec]] = None
    probs: Optional[List[float]] = None
    base_seed: int = Field(default=settings.DEFAULT_SEED)
    relax_assumptions: bool = False

    @field_validator("alpha_min", "alpha_max")
    def check_alpha(cls, v):
        if v is None:
            return v
        if v >= 1.0:
            raise ValueError("alpha must be < 1")
        if v <= 0.0:
            raise ValueError("alpha must be > 0")
        return v

    @field_validator("base_seed")
    def check_seed(cls, v):
        if not (0 <= v < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        return v

    @model_validator(mode="after")
    def check_kind_fields(self):
        if self.kind == "sibuya":
            if self.alpha_min is None or self.alpha_max is None:
                raise ValueError("sibuya model requires alpha_min and alpha_max")
            if self.alpha_min > self.alpha_max:
                raise ValueError("alpha_min must be <= alpha_max")
        else:
            if not self.laws:
                raise ValueError("finite_mixture model requires a nonempty laws list")
            probs = self.probs if self.probs is not None else [1.0 / len(self.laws)] * len(self.laws)
            if len(probs) != len(self.laws):
                raise ValueError("probs and laws must have the same length")
            if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > settings.PMF_SUM_TOL:
                raise ValueError("probs must be nonnegative and sum to 1")
            self.probs = probs
        return self


class ProbeSpec(BaseModel):
    """Sizes of the A2 probe."""
    model_config = {"extra": "forbid"}

    n_probe: int = Field(default=30, ge=1)
    s_grid: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    replicates: int = Field(default=10, ge=1)

    @field_validator("s_grid")
    def check_grid(cls, v):
        if any(s <= 0 for s in v):
            raise ValueError("s_grid values must be > 0")
        return v


class DefectRatioProbe(BaseModel):
    """Final defect-ratio estimates at one probed s."""
    s: float
    final_ratios: List[float]
    max_final_ratio: float
    median_final_ratio: float


class AssumptionReport(BaseModel):
    """Outcome of validate_assumptions."""
    a1_pass: bool
    a1_detail: str
    probes: List[DefectRatioProbe]
    verdict: Literal["consistent", "inconsistent", "inconclusive"]
    thresholds: Dict[str, float]


class AnnealedMeanReport(BaseModel):
    """Empirical E log m(xi_0); +inf when any sampled law has infinite mean."""
    samples: int
    mean_log_m: float
    infinite_mean_fraction: float


class EnvironmentRecord(BaseModel):
    """Persisted realization of one environment."""
    model: Dict[str, Any]
    base_seed: int
    replicate_index: int
    realized: List[Dict[str, Any]]
