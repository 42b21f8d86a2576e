import math
from dataclasses import dataclass, field
from typing import List, Optional, Union

from app.core.config import settings
from app.core.errors import ModelValidationError
from app.core.logspace import log_of_int
from app.models.environment import Environment


@dataclass(frozen=True)
class Exact:
    """Exact population count."""

    count: int
    mode = "exact"

    @property
    def log_count(self) -> float:
        return log_of_int(self.count)


@dataclass(frozen=True)
class LogApprox:
    """Population beyond the exact budget, carried as log Z_n."""

    log_count: float
    mode = "log_approx"


PopulationState = Union[Exact, LogApprox]


class _OverBudget:
    """Signal returned by step_exact when the count exceeds the budget."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OverBudget"

    def __reduce__(self):
        return (_OverBudget, ())


OVER_BUDGET = _OverBudget()


@dataclass(frozen=True)
class StepConfig:
    """Population stepping policy."""

    exact_budget: int = settings.EXACT_BUDGET
    asymptotic_enabled: bool = settings.ASYMPTOTIC_ENABLED
    sibuya_table_cap: int = settings.SIBUYA_TABLE_CAP
    raise_on_truncation: bool = False

    def __post_init__(self):
        if self.exact_budget < 1:
            raise ModelValidationError(f"exact_budget must be >= 1, got {self.exact_budget}")
        if self.sibuya_table_cap < 1:
            raise ModelValidationError(f"sibuya_table_cap must be >= 1, got {self.sibuya_table_cap}")


@dataclass
class Trajectory:
    """
    One quenched path Z_0, Z_1, ... of the population.

    states[0] is Exact(1). Once a state is LogApprox every later state is.
    truncated_at marks the generation whose step could not be taken.
    """

    env: Environment
    states: List[PopulationState] = field(default_factory=lambda: [Exact(1)])
    mode_switch_index: Optional[int] = None
    truncated_at: Optional[int] = None
    y_path: List[float] = field(default_factory=list)
    log_one_minus_y_path: List[float] = field(default_factory=list)
    stabilized_at: Optional[int] = None

    @property
    def n(self) -> int:
        """Last generation held."""
        return len(self.states) - 1

    @property
    def truncated(self) -> bool:
        return self.truncated_at is not None

    def log_count(self, n: int) -> float:
        return self.states[n].log_count

    def is_exact(self, n: int) -> bool:
        return isinstance(self.states[n], Exact)

    def append(self, state: PopulationState) -> None:
        if isinstance(state, Exact) and not self.is_exact(self.n):
            raise ValueError("a LogApprox trajectory cannot return to exact mode")
        if isinstance(state, LogApprox) and self.mode_switch_index is None:
            self.mode_switch_index = len(self.states)
        self.states.append(state)


@dataclass(frozen=True)
class MartingaleSample:
    """log X_n = -Z_n h_n(env, s) together with log W_n = log Z_n + log h_n."""

    n: int
    s: float
    log_X_n: float
    log_W_n: float

    def __post_init__(self):
        if self.log_X_n > 0.0:
            raise ValueError(f"log X_n must be <= 0, got {self.log_X_n}")

    @property
    def X_n(self) -> float:
        return math.exp(self.log_X_n) if self.log_X_n > -math.inf else 0.0
