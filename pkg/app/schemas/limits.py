from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from app.schemas.population import ModeSwitchSummary


class NormalizationScheme(BaseModel):
    """
    Slowly varying map U and normalizing sequence c_n.

    U: "log" is log(1 + x), "loglog" is log(1 + log(1 + x)); both have U(0) = 0.
    c_n: "product" = prod_{i<n} 1/alpha_i (Sibuya laws), "constant" = 1,
    "linear" = max(n, 1), "double_exponential" = exp(exp(n K)),
    "inverse_h" = 1 / h_n(env, s0).
    """
    model_config = {"extra": "forbid"}

    U: Literal["log", "loglog"] = "log"
    c_rule: Literal["product", "constant", "linear", "double_exponential", "inverse_h"] = "product"
    K: Optional[float] = None
    s0: Optional[float] = None

    @model_validator(mode="after")
    def check_parameters(self):
        if self.c_rule == "double_exponential" and (self.K is None or self.K <= 0):
            raise ValueError("double_exponential c_n rule requires K > 0")
        if self.c_rule == "inverse_h" and (self.s0 is None or self.s0 <= 0):
            raise ValueError("inverse_h c_n rule requires s0 > 0")
        return self

    @property
    def has_exponential_limit(self) -> bool:
        """U = log with the product normalizer, whose limit law is Exp(1)."""
        return self.U == "log" and self.c_rule == "product"


class KSResult(BaseModel):
    """One-sample Kolmogorov-Smirnov statistic."""
    D: float
    n: int
    critical_95: float
    p_value: float
    passed: bool


class TwoSampleKSResult(BaseModel):
    D: float
    n1: int
    n2: int
    p_value: float


class QuantileCoverage(BaseModel):
    """Empirical P(Y <= x) against x with its standard error."""
    x: float
    fraction: float
    se: float


class ReplicateOutcome(BaseModel):
    """One replicate of the limit pipeline, one CSV row."""
    replicate: int
    seed: int
    final_n: int
    mode: str
    Y: float
    T: float
    normalized: float
    exp_transform: float
    H_of_T: Optional[float] = None
    stabilized: bool
    truncated: bool
    mode_switch_index: Optional[int] = None


class YDistributionReport(BaseModel):
    y_samples: List[float]
    t_samples: List[float]
    ks_uniform: Optional[KSResult] = None
    coverage: List[QuantileCoverage]
    replicates: int
    used: int
    unstabilized: int
    truncated: int
    modes: ModeSwitchSummary


class NormalizedSampleReport(BaseModel):
    samples: List[float]
    exp_transform: List[float]
    H_of_T: List[float]
    ks_exponential: Optional[KSResult] = None
    ks_direct: Optional[KSResult] = None
    max_identity_residual: float
    max_H_residual: Optional[float] = None
    used: int


class AtomReport(BaseModel):
    """W-atom fractions on one environment, with the mean identity E X_n = e^{-s}."""
    s: float
    n: int
    replicates: int
    frac_zero: float
    frac_infinity: float
    frac_ambiguous: float
    se_zero: float
    se_infinity: float
    mean_X: float
    se_X: float
    expected_mean_X: float
    dead_band: float


class MartingaleMeanReport(BaseModel):
    """
    Mean of X_n on one environment from exact stepping only.

    A replicate whose population exceeds the exact budget at generation tau < n
    contributes X_tau, the conditional mean of X_n given Z_tau.
    """
    s: float
    n: int
    replicates: int
    exact_budget: int
    stopped: int
    mean_X: float
    se_X: float
    expected_mean_X: float


class FunctionalEquationReport(BaseModel):
    mode: Literal["analytic", "empirical"]
    max_residual: float
    u_grid: List[float]
    environments: int
    per_environment: List[float]
    replicates: Optional[int] = None


class GrowthEvidence(BaseModel):
    s: float
    log_products: List[float]
    trend: Literal["infinity", "zero", "one", "undetermined"]


class GrowthDiagnosis(BaseModel):
    """Four-case taxonomy of h_n(env, s) c_n(env) over an s grid."""
    case: Literal["a", "b", "c", "d", "inconclusive"]
    s_r: Optional[float] = None
    evidence: List[GrowthEvidence]
    thresholds: Dict[str, float]


class GIdentityReport(BaseModel):
    """H(env, s) against the quantile G(env, e^{-s}), and the shift ratio against alpha(env)."""
    s: float
    H_limit: float
    G_value: float
    H_residual: float
    shift_ratio: float
    alpha: float
    alpha_residual: float


class LimitReport(BaseModel):
    """Aggregated limit diagnostics of a run."""
    y_samples: List[float] = Field(default_factory=list)
    t_samples: List[float] = Field(default_factory=list)
    ks_uniform: Optional[KSResult] = None
    ks_exponential: Optional[KSResult] = None
    ks_direct: Optional[KSResult] = None
    h_profile: Dict[str, List[float]] = Field(default_factory=dict)
    alpha_ratio: List[float] = Field(default_factory=list)
    functional_eq_residual: Optional[float] = None
    taxonomy: List[GrowthDiagnosis] = Field(default_factory=list)
    coverage: List[QuantileCoverage] = Field(default_factory=list)
    modes: Optional[ModeSwitchSummary] = None
    complete: bool = True
