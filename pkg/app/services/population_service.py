import logging
import math
from typing import List, Optional, Union

import numpy as np

from app.core.config import settings
from app.core.errors import TruncationError, UnsupportedLawError
from app.core.logspace import ComplementCoord, TailScalar, log_one_minus_exp_neg, safe_exp
from app.core.rng import StreamTag, derive_rng
from app.integrations.numpy_sampling import draw_offspring, sample_log_positive_stable, sum_offspring
from app.models.environment import Environment
from app.models.offspring import OffspringLaw
from app.models.trajectory import (
    OVER_BUDGET,
    Exact,
    LogApprox,
    MartingaleSample,
    StepConfig,
    Trajectory,
    _OverBudget,
)
from app.services.pgf_service import PgfService

logger = logging.getLogger(__name__)

_Y_CEILING = float(np.nextafter(1.0, 0.0))
_Y_FLOOR = float(np.nextafter(0.0, 1.0))


class PopulationService:
    """Service for quenched simulation of Z_n and the functionals built on it."""

    def __init__(self):
        """Initialize the population service."""
        self.pgf = PgfService()

    # --- streams ------------------------------------------------------------------

    @staticmethod
    def population_rng(env: Environment, replicate: int = 0) -> np.random.Generator:
        """
        Stream for population replicate `replicate` on `env`.

        Keyed by (base_seed, environment replicate index, shift offset, replicate).
        """
        return derive_rng(env.model.base_seed, StreamTag.POPULATION, env.replicate_index, env.shift_offset, replicate)

    # --- stepping -------------------------------------------------------------------

    def sample_offspring(self, law: OffspringLaw, rng: np.random.Generator) -> int:
        """Exact draw from the offspring law."""
        return draw_offspring(law, 1, rng)[0]

    def step_exact(
        self,
        count: int,
        law: OffspringLaw,
        rng: np.random.Generator,
        budget: int,
        table_cap: Optional[int] = None,
    ) -> Union[Exact, _OverBudget]:
        """
        Sum `count` independent offspring draws.

        Args:
            count: Current population, at least 1
            law: Offspring law of this generation
            rng: Population stream
            budget: Largest count simulated particle by particle

        Returns:
            Exact(count'), or OVER_BUDGET without consuming any draws
        """
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        if count > budget:
            return OVER_BUDGET
        return Exact(sum_offspring(law, count, rng, table_cap))

    def step_asymptotic(self, log_count: float, law: OffspringLaw, rng: np.random.Generator) -> LogApprox:
        """
        Stable-limit step: log Z' = (1/alpha) log Z + log S_alpha.

        Raises:
            UnsupportedLawError: if the law has no stable index
        """
        alpha = law.stable_index
        if alpha is None or not (0.0 < alpha < 1.0):
            raise UnsupportedLawError("asymptotic stepping requires a law with stable index alpha in (0, 1)")
        log_s = float(sample_log_positive_stable(alpha, 1, rng)[0])
        return LogApprox(log_count / alpha + log_s)

    def simulate_trajectory(
        self,
        env: Environment,
        n_generations: int,
        rng: Optional[np.random.Generator] = None,
        config: Optional[StepConfig] = None,
    ) -> Trajectory:
        """
        Simulate Z_0..Z_n on a fixed environment.

        Args:
            env: Environment
            n_generations: Number of generations to simulate
            rng: Population stream; the environment's replicate stream when omitted
            config: Stepping policy

        Returns:
            Trajectory, truncated if the budget is exceeded with no asymptotic step available

        Raises:
            TruncationError: only when config.raise_on_truncation is set
        """
        if n_generations < 0:
            raise ValueError(f"n_generations must be >= 0, got {n_generations}")
        config = config or StepConfig()
        rng = rng or self.population_rng(env)
        traj = Trajectory(env=env)
        for _ in range(n_generations):
            if not self._advance(traj, rng, config):
                break
        return traj

    def simulate_until_stable(
        self,
        env: Environment,
        rng: Optional[np.random.Generator] = None,
        config: Optional[StepConfig] = None,
        tolerance: Optional[float] = None,
        n_max: Optional[int] = None,
        n_min: Optional[int] = None,
    ) -> Trajectory:
        """
        Simulate until |Y_n - Y_{n-1}| < tolerance (with n >= n_min) or n = n_max.

        The trajectory carries the Y path; stabilized_at is None when n_max was reached first.
        """
        config = config or StepConfig()
        tolerance = settings.Y_TOLERANCE if tolerance is None else tolerance
        n_max = settings.Y_N_MAX if n_max is None else n_max
        n_min = settings.Y_N_MIN if n_min is None else n_min
        rng = rng or self.population_rng(env)

        traj = Trajectory(env=env)
        self._record_y(traj)
        while traj.n < n_max:
            if not self._advance(traj, rng, config):
                break
            self._record_y(traj)
            if traj.n >= n_min and abs(traj.y_path[-1] - traj.y_path[-2]) < tolerance:
                traj.stabilized_at = traj.n
                break
        if traj.stabilized_at is None:
            logger.debug(f"Y path of replicate {env.replicate_index} not stabilized by n={traj.n}")
        return traj

    # --- functionals ----------------------------------------------------------------

    def compute_log_one_minus_Y(self, env: Environment, traj: Trajectory, n: int) -> float:
        """
        log(1 - y_n(env, Z_n)), folded entirely in complement coordinate.

        Starts from u = 1 - e^{-1/Z_n} and applies 1 - f(1 - u) for xi_{n-1} down to xi_0.
        """
        if n > traj.n:
            raise ValueError(f"generation {n} beyond trajectory length {traj.n}")
        u0 = ComplementCoord(min(0.0, log_one_minus_exp_neg(-traj.log_count(n))))
        return self.pgf.compose_f_n(env, n, u0).log_u

    def compute_Y(self, env: Environment, traj: Trajectory, n: int) -> float:
        """Y_n = y_n(env, Z_n) as a plain real strictly inside (0, 1)."""
        y = -math.expm1(self.compute_log_one_minus_Y(env, traj, n))
        return min(max(y, _Y_FLOOR), _Y_CEILING)

    def compute_martingale_logX(self, env: Environment, traj: Trajectory, s: float, n: int) -> MartingaleSample:
        """
        log X_n = -exp(log Z_n + log h_n(env, s)).

        Args:
            env: Environment
            traj: Trajectory holding generation n
            s: Positive scale
            n: Generation

        Returns:
            MartingaleSample
        """
        if s <= 0:
            raise ValueError(f"s must be > 0, got {s}")
        if n > traj.n:
            raise ValueError(f"generation {n} beyond trajectory length {traj.n}")
        log_h = self.pgf.compose_h_n(env, n, TailScalar.from_float(s)).log_value
        return self.martingale_sample(traj, s, n, log_h)

    def compute_martingale_path(self, env: Environment, traj: Trajectory, s: float) -> List[MartingaleSample]:
        """Martingale samples for every generation of the trajectory."""
        path = self.pgf.h_path(env, traj.n, TailScalar.from_float(s))
        return [self.martingale_sample(traj, s, n, h.log_value) for n, h in enumerate(path)]

    @staticmethod
    def martingale_sample(traj: Trajectory, s: float, n: int, log_h: float) -> MartingaleSample:
        """Martingale sample from a precomputed log h_n, for many paths on one environment."""
        log_w = traj.log_count(n) + log_h
        return MartingaleSample(n=n, s=s, log_X_n=-safe_exp(log_w), log_W_n=log_w)

    # --- internals ----------------------------------------------------------------------

    def _record_y(self, traj: Trajectory) -> None:
        log_u = self.compute_log_one_minus_Y(traj.env, traj, traj.n)
        traj.log_one_minus_y_path.append(log_u)
        traj.y_path.append(min(max(-math.expm1(log_u), _Y_FLOOR), _Y_CEILING))

    def _advance(self, traj: Trajectory, rng: np.random.Generator, config: StepConfig) -> bool:
        """Take one generation step; False when the path had to be truncated."""
        n = traj.n
        law = traj.env.law_at(n)
        state = traj.states[-1]

        if isinstance(state, Exact):
            result = self.step_exact(state.count, law, rng, config.exact_budget, config.sibuya_table_cap)
            if result is not OVER_BUDGET:
                traj.append(result)
                return True
            if not config.asymptotic_enabled:
                return self._truncate(traj, config, f"budget {config.exact_budget} exceeded at generation {n}")

        try:
            traj.append(self.step_asymptotic(state.log_count, law, rng))
            return True
        except UnsupportedLawError as e:
            logger.warning(f"Truncating replicate {traj.env.replicate_index} at generation {n}: {str(e)}")
            return self._truncate(traj, config, str(e))

    @staticmethod
    def _truncate(traj: Trajectory, config: StepConfig, reason: str) -> bool:
        traj.truncated_at = traj.n
        if config.raise_on_truncation:
            raise TruncationError(reason)
        return False
