from pydantic_settings import BaseSettings
from typing import Dict, Any, List
import os


class Settings(BaseSettings):
    """Toolkit settings that can be loaded from environment variables or a .env file."""

    PROJECT_NAME: str = "Heavy-tailed BPRE Lab"
    LOG_LEVEL: str = os.environ.get("LOG_LEVEL", "INFO")

    # Assumption enforcement. Turning this off admits p_0 > 0 and p_1 = 1 laws,
    # which the limit theorems do not cover.
    ENFORCE_ASSUMPTIONS: bool = True
    PMF_SUM_TOL: float = 1e-12

    # pgf inversion
    INVERSION_MAX_ITER: int = 200
    INVERSION_RTOL: float = 1e-12

    # Population stepping
    EXACT_BUDGET: int = 10**6
    ASYMPTOTIC_ENABLED: bool = True
    SIBUYA_TABLE_CAP: int = 10**6
    SIBUYA_TABLE_CACHE_SIZE: int = 8

    # Y stabilization rule
    Y_TOLERANCE: float = 1e-4
    Y_N_MAX: int = 40
    Y_N_MIN: int = 2

    # Regularity classification
    REGULAR_THRESHOLD: float = -40.0
    RATIO_WINDOW: int = 10
    RATIO_SLOPE_TOL: float = 1e-3
    RATIO_LEVEL_FLOOR: float = 40.0
    RATIO_FRACTIONS: List[float] = [0.25, 0.5, 0.9]
    CLASSIFY_N_MAX: int = 200
    SUP_Q_GRID_SIZE: int = 400

    # A2 probe
    A2_RATIO_THRESHOLD: float = 1e-6
    A2_POSITIVE_FLOOR: float = 1e-3

    # Limit diagnostics
    ATOM_DEAD_BAND: float = 5.0
    GROWTH_LOG_THRESHOLD: float = 20.0
    GROWTH_UNIT_TOL: float = 0.05
    KS_CRITICAL_COEFF: float = 1.358

    # Execution
    DEFAULT_WORKERS: int = 1
    DEFAULT_SEED: int = 42
    FLOAT_DIGITS: int = 17

    # Acceptance suite scale (desk scale by default, CI overrides through the environment)
    ACCEPTANCE_SCALE: Dict[str, Any] = {
        "y_replicates": 2000,
        "martingale_replicates": 100000,
        "atom_replicates": 10000,
        "stable_replicates": 2000,
        "stable_n": 10000,
        "environments": 100,
        "functional_replicates": 2000,
    }

    model_config = {
        "case_sensitive": True,
        "env_file": ".env",
        "extra": "ignore",
    }

    def get_step_defaults(self) -> Dict[str, Any]:
        """Get the default population stepping parameters."""
        return {
            "exact_budget": self.EXACT_BUDGET,
            "asymptotic_enabled": self.ASYMPTOTIC_ENABLED,
            "y_tolerance": self.Y_TOLERANCE,
            "n_max": self.Y_N_MAX,
        }

    def get_regularity_thresholds(self) -> Dict[str, Any]:
        """Get the thresholds used by the regularity classifier."""
        return {
            "n_max": self.CLASSIFY_N_MAX,
            "regular_threshold": self.REGULAR_THRESHOLD,
            "ratio_fractions": list(self.RATIO_FRACTIONS),
            "window": self.RATIO_WINDOW,
            "slope_tol": self.RATIO_SLOPE_TOL,
            "level_floor": self.RATIO_LEVEL_FLOOR,
        }

    def get_acceptance_scale(self) -> Dict[str, Any]:
        """Get the replicate counts used by the acceptance suite."""
        return dict(self.ACCEPTANCE_SCALE)


settings = Settings()
