from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from app.core.config import settings
from app.models.trajectory import StepConfig


class SimulationConfig(BaseModel):
    """Population stepping and Y-stabilization policy of a run."""
    model_config = {"extra": "forbid"}

    exact_budget: int = Field(default=settings.EXACT_BUDGET, ge=1)
    asymptotic_enabled: bool = settings.ASYMPTOTIC_ENABLED
    sibuya_table_cap: int = Field(default=settings.SIBUYA_TABLE_CAP, ge=1)
    y_tolerance: float = Field(default=settings.Y_TOLERANCE, gt=0)
    n_max: int = Field(default=settings.Y_N_MAX, ge=0)
    n_min: int = Field(default=settings.Y_N_MIN, ge=1)

    @model_validator(mode="after")
    def check_bounds(self):
        if self.n_min > max(self.n_max, 1):
            raise ValueError("n_min must be <= n_max")
        return self

    def to_step_config(self) -> StepConfig:
        return StepConfig(
            exact_budget=self.exact_budget,
            asymptotic_enabled=self.asymptotic_enabled,
            sibuya_table_cap=self.sibuya_table_cap,
        )


class ModeSwitchSummary(BaseModel):
    """Aggregated mode accounting of a set of trajectories."""
    trajectories: int
    switched: int
    truncated: int
    unstabilized: int
    switch_generations: List[int]
    mean_switch_generation: Optional[float] = None
