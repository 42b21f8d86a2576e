from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.config import settings
from app.schemas.environment import EnvironmentModelSpec, ProbeSpec
from app.schemas.limits import NormalizationScheme
from app.schemas.population import SimulationConfig
from app.schemas.regularity import RegularityConfig


class RunConfig(BaseModel):
    """
    Fully validated configuration of one CLI run.

    Dotted keys of the config file address nested fields (model.alpha_min,
    simulation.exact_budget, scheme.c_rule, ...). The top-level seed is also
    the model's base seed.
    """
    model_config = {"extra": "forbid"}

    command: Literal["simulate", "classify", "limits", "verify", "report"]
    seed: int = settings.DEFAULT_SEED
    replicates: int = Field(default=100, ge=1)
    generations: int = Field(default=settings.Y_N_MAX, ge=0)
    workers: int = Field(default=settings.DEFAULT_WORKERS, ge=1)
    out: str = "runs/latest"
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    s_grid: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    profile_n: int = Field(default=30, ge=1)
    source: Optional[str] = None
    criteria: List[str] = Field(default_factory=list)

    model: EnvironmentModelSpec = Field(
        default_factory=lambda: EnvironmentModelSpec(kind="sibuya", alpha_min=0.2, alpha_max=0.7)
    )
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    regularity: RegularityConfig = Field(default_factory=RegularityConfig)
    scheme: NormalizationScheme = Field(default_factory=NormalizationScheme)
    probe: ProbeSpec = Field(default_factory=ProbeSpec)
    acceptance: Dict[str, int] = Field(default_factory=dict)

    @field_validator("seed")
    def check_seed(cls, v):
        if not (0 <= v < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        return v

    @field_validator("s_grid")
    def check_grid(cls, v):
        if any(s <= 0 for s in v):
            raise ValueError("s_grid values must be > 0")
        return v

    @field_validator("acceptance")
    def check_acceptance(cls, v):
        unknown = set(v) - set(settings.ACCEPTANCE_SCALE)
        if unknown:
            raise ValueError(f"unknown acceptance scale keys: {sorted(unknown)}")
        return v

    @model_validator(mode="after")
    def sync_seed(self):
        if self.model.base_seed != self.seed:
            self.model = self.model.model_copy(update={"base_seed": self.seed})
        return self
