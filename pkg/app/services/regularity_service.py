import logging
import math
from typing import List, Optional, Sequence, Union

import numpy as np

from app.core.errors import ModelValidationError
from app.core.logspace import ComplementCoord, TailScalar
from app.models.environment import Environment, EnvironmentModel
from app.schemas.regularity import (
    PointEvidence,
    PointVerdict,
    ProcessVerdict,
    QProductTrace,
    RatioTrend,
    RegularityConfig,
    RegularPointSearch,
    ShiftConsistencyReport,
    SufficientCriterionReport,
    Verdict,
)
from app.services.pgf_service import PgfService

logger = logging.getLogger(__name__)

# Q at or above this counts as 1 when estimating sup Q
_SUP_ONE_TOL = 1e-9
_SUP_GRID_LOG_U_MIN = -60.0

TREND_TO_ZERO = "to_zero"
TREND_STABILIZED = "stabilized"
TREND_UNDETERMINED = "undetermined"
TREND_INSUFFICIENT = "insufficient"


def _as_tail(s: Union[float, TailScalar]) -> TailScalar:
    if isinstance(s, TailScalar):
        return s
    if s <= 0:
        raise ModelValidationError(f"s must be > 0, got {s}")
    return TailScalar.from_float(s)


class RegularityService:
    """Service classifying points and processes as regular or irregular."""

    def __init__(self):
        """Initialize the regularity service."""
        self.pgf = PgfService()

    def q_log_products(self, env: Environment, s: Union[float, TailScalar], n_max: int) -> QProductTrace:
        """
        Partial sums sum_{i<n} log Q_{xi_i}(f_{i+1}^{(-1)}(env, e^{-s})) for n = 1..n_max.

        Args:
            env: Environment
            s: Positive point
            n_max: Number of partial sums

        Returns:
            Nonincreasing partial sums and the log h_{i+1} trace they were evaluated at
        """
        if n_max <= 0:
            return QProductTrace(partial_sums=[], log_h_trace=[])
        path = self.pgf.h_path(env, n_max, _as_tail(s))
        return self._q_products_from_path(env, path)

    def classify_point(
        self,
        env: Environment,
        s: Union[float, TailScalar],
        config: Optional[RegularityConfig] = None,
    ) -> PointVerdict:
        """
        Classify s as Regular, Irregular or Inconclusive.

        Regular needs the Q-product below the threshold and every h-ratio trending to 0;
        Irregular needs some h-ratio stabilized at a positive level. The Q-product alone
        never yields Irregular.

        Args:
            env: Environment
            s: Positive point
            config: Classifier thresholds

        Returns:
            PointVerdict with its evidence
        """
        config = config or RegularityConfig()
        s_tail = _as_tail(s)
        s_path = self.pgf.h_path(env, config.n_max, s_tail, stop_on_underflow=True)
        q_trace = self._q_products_from_path(env, s_path)
        # depth reached before log h_n(env, s) left the double range
        depth = len(s_path) - 1

        trends = []
        for fraction in config.ratio_fractions:
            t_tail = TailScalar(s_tail.log_value + math.log(fraction))
            t_path = self.pgf.h_path(env, depth, t_tail, stop_on_underflow=True)
            log_ratios = [t_path[n].log_value - s_path[n].log_value for n in range(1, len(t_path))]
            if len(t_path) < len(s_path):
                # h_n(env, t) reached 0 while h_n(env, s) is still positive
                trends.append(RatioTrend(fraction=fraction, log_ratios=log_ratios, trend=TREND_TO_ZERO))
            else:
                trends.append(self._ratio_trend(fraction, log_ratios, config))

        thresholds = {
            "n_max": float(config.n_max),
            "regular_threshold": config.regular_threshold,
            "window": float(config.window),
            "slope_tol": config.slope_tol,
            "level_floor": config.level_floor,
        }
        evidence = PointEvidence(
            log_q_products=q_trace.partial_sums,
            ratio_trends=trends,
            thresholds=thresholds,
            underflow_index=depth if depth < config.n_max else None,
        )

        products_diverge = bool(q_trace.partial_sums) and q_trace.partial_sums[-1] <= config.regular_threshold
        if config.n_max < config.window:
            verdict = Verdict.INCONCLUSIVE
        elif products_diverge and all(t.trend == TREND_TO_ZERO for t in trends):
            verdict = Verdict.REGULAR
        elif any(t.trend == TREND_STABILIZED for t in trends):
            verdict = Verdict.IRREGULAR
        else:
            verdict = Verdict.INCONCLUSIVE
        if verdict == Verdict.INCONCLUSIVE:
            logger.debug(f"Point with log s={s_tail.log_value:.6g} inconclusive at n_max={config.n_max}")
        return PointVerdict(s=s_tail.to_float(), log_s=s_tail.log_value, verdict=verdict, evidence=evidence)

    def classify_process(
        self,
        env: Environment,
        s_grid: Sequence[float],
        config: Optional[RegularityConfig] = None,
    ) -> ProcessVerdict:
        """
        Classify the process over a grid: Regular iff every point is, Irregular iff any point is.
        """
        if not s_grid:
            raise ModelValidationError("s_grid must be nonempty")
        points = [self.classify_point(env, s, config) for s in s_grid]
        verdicts = {p.verdict for p in points}
        if verdicts == {Verdict.REGULAR}:
            verdict = Verdict.REGULAR
        elif Verdict.IRREGULAR in verdicts:
            verdict = Verdict.IRREGULAR
        else:
            verdict = Verdict.INCONCLUSIVE
        return ProcessVerdict(verdict=verdict, points=points)

    def check_sufficient_criterion(
        self,
        model: EnvironmentModel,
        samples: int,
        config: Optional[RegularityConfig] = None,
    ) -> SufficientCriterionReport:
        """
        Estimate sup_{s<1} Q_{xi_0}(s) for sampled laws.

        Args:
            model: Environment model
            samples: Number of sampled xi_0
            config: Supplies the grid size

        Returns:
            holds when some sampled law has sup Q < 1; c is the largest such sup
        """
        if samples < 1:
            raise ModelValidationError(f"samples must be >= 1, got {samples}")
        config = config or RegularityConfig()
        grid = np.linspace(0.0, _SUP_GRID_LOG_U_MIN, config.sup_grid_size)

        sups = []
        for r in range(samples):
            law = Environment.create(model, r).law_at(0)
            sups.append(max(self.pgf.eval_Q_complement(law, ComplementCoord(float(lu))) for lu in grid))

        below_one = [v for v in sups if v < 1.0 - _SUP_ONE_TOL]
        holds = bool(below_one)
        return SufficientCriterionReport(
            holds=holds,
            c_estimate=max(below_one) if holds else None,
            frequency=len(below_one) / samples,
            samples=samples,
            sup_values=sups,
        )

    def find_regular_point(
        self,
        env: Environment,
        s: float,
        config: Optional[RegularityConfig] = None,
    ) -> RegularPointSearch:
        """
        Search [h_{xi_0}(s), s] for a point that is regular for shift(env, 1).

        Probes both endpoints, then dyadic refinements up to config.search_depth.
        """
        config = config or RegularityConfig()
        s_tail = _as_tail(s)
        lo = self.pgf.eval_h(env.law_at(0), s_tail).to_float()
        hi = s_tail.to_float()
        shifted = env.shift(1)

        probed: List[PointVerdict] = []
        for point in self._refinement(lo, hi, config.search_depth):
            verdict = self.classify_point(shifted, point, config)
            probed.append(verdict)
            if verdict.verdict == Verdict.REGULAR:
                return RegularPointSearch(found=True, s=hi, interval=[lo, hi], point=point, probed=probed)

        logger.warning(f"No regular point found in [{lo:.6g}, {hi:.6g}] after {len(probed)} probes")
        return RegularPointSearch(
            found=False,
            s=hi,
            interval=[lo, hi],
            probed=probed,
            reason="no probed point classified Regular (A2 may fail or n_max is too small)",
        )

    def check_shift_consistency(
        self,
        env: Environment,
        s: float,
        k: int,
        config: Optional[RegularityConfig] = None,
    ) -> ShiftConsistencyReport:
        """Compare the verdict of s on env with that of h_k(env, s) on shift(env, k)."""
        if k < 0:
            raise ModelValidationError(f"k must be >= 0, got {k}")
        s_tail = _as_tail(s)
        original = self.classify_point(env, s_tail, config).verdict
        s_k = self.pgf.compose_h_n(env, k, s_tail)
        shifted = self.classify_point(env.shift(k), s_k, config).verdict
        decided = {Verdict.REGULAR, Verdict.IRREGULAR}
        consistent = not (original in decided and shifted in decided and original != shifted)
        return ShiftConsistencyReport(
            s=s_tail.to_float(),
            k=k,
            shifted_log_s=s_k.log_value,
            verdict=original,
            shifted_verdict=shifted,
            consistent=consistent,
        )

    # --- internals ----------------------------------------------------------------

    def _q_products_from_path(self, env: Environment, path: List[TailScalar]) -> QProductTrace:
        sums, trace = [], []
        total = 0.0
        for i in range(len(path) - 1):
            # f_{i+1}^{(-1)}(env, e^{-s}) = e^{-h_{i+1}}
            u = ComplementCoord.from_exp_neg(path[i + 1])
            q = self.pgf.eval_Q_complement(env.law_at(i), u)
            total += math.log(q) if q > 0.0 else -math.inf
            sums.append(min(total, 0.0))
            trace.append(path[i + 1].log_value)
        return QProductTrace(partial_sums=sums, log_h_trace=trace)

    @staticmethod
    def _ratio_trend(fraction: float, log_ratios: List[float], config: RegularityConfig) -> RatioTrend:
        if not log_ratios:
            return RatioTrend(fraction=fraction, log_ratios=[], trend=TREND_INSUFFICIENT)
        last = log_ratios[-1]
        if last <= -config.level_floor:
            return RatioTrend(fraction=fraction, log_ratios=log_ratios, trend=TREND_TO_ZERO)
        if len(log_ratios) < config.window:
            return RatioTrend(fraction=fraction, log_ratios=log_ratios, trend=TREND_INSUFFICIENT)
        tail = np.asarray(log_ratios[-config.window:])
        slope = float(np.polyfit(np.arange(config.window, dtype=float), tail, 1)[0])
        if abs(slope) < config.slope_tol and last <= 1e-9:
            trend = TREND_STABILIZED
        else:
            trend = TREND_UNDETERMINED
        return RatioTrend(fraction=fraction, log_ratios=log_ratios, slope=slope, trend=trend)

    @staticmethod
    def _refinement(lo: float, hi: float, depth: int) -> List[float]:
        points = [lo, hi] if hi > lo else [hi]
        for level in range(1, depth + 1):
            count = 2 ** level
            points.extend(lo + (hi - lo) * j / count for j in range(1, count, 2))
        return [p for p in points if p > 0.0]
