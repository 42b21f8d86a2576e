import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.errors import ModelValidationError, UnsupportedLawError
from app.core.logspace import TailScalar, log_one_minus_exp_neg, safe_exp
from app.integrations import scipy_stats
from app.integrations.worker_pool import map_replicates
from app.models.environment import Environment, EnvironmentModel, ModelKind
from app.models.trajectory import StepConfig, Trajectory
from app.schemas.limits import (
    AtomReport,
    FunctionalEquationReport,
    GIdentityReport,
    GrowthDiagnosis,
    GrowthEvidence,
    KSResult,
    LimitReport,
    MartingaleMeanReport,
    NormalizationScheme,
    NormalizedSampleReport,
    QuantileCoverage,
    ReplicateOutcome,
    YDistributionReport,
)
from app.schemas.population import ModeSwitchSummary, SimulationConfig
from app.services.pgf_service import PgfService
from app.services.population_service import PopulationService

logger = logging.getLogger(__name__)

MIN_REPLICATES = 100
COVERAGE_POINTS = (0.25, 0.5, 0.75)
# log(1 + x) = x to double precision below this log x
_SOFTPLUS_LINEAR_LOG = -37.0


# --- normalization scheme arithmetic ---------------------------------------------


def log_U(scheme: NormalizationScheme, log_x: float) -> float:
    """log U(x) given log x."""
    if log_x == -math.inf:
        return -math.inf
    if log_x < _SOFTPLUS_LINEAR_LOG:
        log_u1 = log_x
    else:
        log_u1 = math.log(float(np.logaddexp(0.0, log_x)))
    if scheme.U == "log":
        return log_u1
    if log_u1 < _SOFTPLUS_LINEAR_LOG:
        return log_u1
    return math.log(math.log1p(math.exp(log_u1)))


def log_c_sequence(pgf: PgfService, env: Environment, scheme: NormalizationScheme, n_max: int) -> List[float]:
    """log c_0(env), ..., log c_{n_max}(env)."""
    if scheme.c_rule == "constant":
        return [0.0] * (n_max + 1)
    if scheme.c_rule == "linear":
        return [math.log(max(n, 1)) for n in range(n_max + 1)]
    if scheme.c_rule == "double_exponential":
        return [safe_exp(n * scheme.K) for n in range(n_max + 1)]
    if scheme.c_rule == "inverse_h":
        return [-h.log_value for h in pgf.h_path(env, n_max, TailScalar.from_float(scheme.s0))]

    logs = [0.0]
    for i in range(n_max):
        alpha = env.law_at(i).stable_index
        if alpha is None:
            raise UnsupportedLawError(f"product normalizer needs a stable index at environment index {i}")
        logs.append(logs[-1] - math.log(alpha))
    return logs


# --- replicate workers (module level so they can be shipped to a process pool) -----


@dataclass(frozen=True)
class _LimitTask:
    model: EnvironmentModel
    replicate: int
    sim: SimulationConfig
    scheme: NormalizationScheme


@dataclass(frozen=True)
class _AtomTask:
    env: Environment
    replicate: int
    n: int
    s: float
    log_h: float
    sim: SimulationConfig


@dataclass(frozen=True)
class _MartingaleTask:
    env: Environment
    replicate: int
    log_h_path: Tuple[float, ...]
    s: float
    exact_budget: int
    sibuya_table_cap: int


@dataclass(frozen=True)
class _TransformTask:
    env: Environment
    stream_env: Environment
    replicate: int
    sim: SimulationConfig
    scheme: NormalizationScheme
    sample_kind: str


def _mode_of(traj: Trajectory) -> str:
    if traj.truncated:
        return "truncated"
    return "log_approx" if traj.mode_switch_index is not None else "exact"


def _normalized_value(pgf: PgfService, env: Environment, scheme: NormalizationScheme, traj: Trajectory) -> float:
    log_c = log_c_sequence(pgf, env, scheme, traj.n)[-1]
    return safe_exp(log_U(scheme, traj.log_count(traj.n)) - log_c)


def run_limit_replicate(task: _LimitTask) -> ReplicateOutcome:
    """Simulate one environment to Y-stabilization and collect every limit functional."""
    population = PopulationService()
    pgf = population.pgf
    env = Environment.create(task.model, task.replicate)
    rng = population.population_rng(env, 0)
    traj = population.simulate_until_stable(
        env,
        rng,
        task.sim.to_step_config(),
        tolerance=task.sim.y_tolerance,
        n_max=task.sim.n_max,
        n_min=task.sim.n_min,
    )
    n = traj.n
    y = traj.y_path[-1]
    t = -math.log(y)
    log_c = log_c_sequence(pgf, env, task.scheme, n)
    h_of_t = None
    if n >= 1:
        log_h = pgf.compose_h_n(env, n, TailScalar.from_float(t)).log_value
        h_of_t = safe_exp(log_U(task.scheme, -log_h) - log_c[-1])
    return ReplicateOutcome(
        replicate=task.replicate,
        seed=task.model.base_seed,
        final_n=n,
        mode=_mode_of(traj),
        Y=y,
        T=t,
        normalized=safe_exp(log_U(task.scheme, traj.log_count(n)) - log_c[-1]),
        exp_transform=-traj.log_one_minus_y_path[-1],
        H_of_T=h_of_t,
        stabilized=traj.stabilized_at is not None,
        truncated=traj.truncated,
        mode_switch_index=traj.mode_switch_index,
    )


def run_atom_replicate(task: _AtomTask):
    """(log W_n, X_n) of one population replicate on a fixed environment."""
    population = PopulationService()
    rng = population.population_rng(task.env, task.replicate)
    traj = population.simulate_trajectory(task.env, task.n, rng, task.sim.to_step_config())
    if traj.n < task.n:
        return None
    sample = population.martingale_sample(traj, task.s, task.n, task.log_h)
    return sample.log_W_n, sample.X_n


def run_martingale_replicate(task: _MartingaleTask) -> Tuple[float, bool]:
    """(X, stopped) of one exact-only replicate; X is X_tau when the budget stopped the path at tau."""
    population = PopulationService()
    rng = population.population_rng(task.env, task.replicate)
    config = StepConfig(
        exact_budget=task.exact_budget,
        asymptotic_enabled=False,
        sibuya_table_cap=task.sibuya_table_cap,
    )
    n = len(task.log_h_path) - 1
    traj = population.simulate_trajectory(task.env, n, rng, config)
    sample = population.martingale_sample(traj, task.s, traj.n, task.log_h_path[traj.n])
    return sample.X_n, traj.n < n


def run_transform_replicate(task: _TransformTask) -> Optional[float]:
    """
    Limit-variable sample on task.env driven by the stream of task.stream_env.

    Both sides of the functional equation pass the same stream_env so they share random numbers.
    """
    population = PopulationService()
    rng = population.population_rng(task.stream_env, task.replicate)
    traj = population.simulate_until_stable(
        task.env,
        rng,
        task.sim.to_step_config(),
        tolerance=task.sim.y_tolerance,
        n_max=task.sim.n_max,
        n_min=task.sim.n_min,
    )
    if traj.stabilized_at is None:
        return None
    if task.sample_kind == "exp_transform":
        return -traj.log_one_minus_y_path[-1]
    return _normalized_value(population.pgf, task.env, task.scheme, traj)


class LimitService:
    """Service running Monte Carlo checks of the limit theorems."""

    def __init__(self):
        """Initialize the limit service."""
        self.pgf = PgfService()
        self.population = PopulationService()

    # --- goodness of fit --------------------------------------------------------------

    def ks_statistic(self, sample: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> KSResult:
        """One-sample KS statistic with the 95% critical value 1.358 / sqrt(n)."""
        return scipy_stats.ks_statistic(sample, cdf)

    # --- replicate pipeline -----------------------------------------------------------

    def simulate_replicates(
        self,
        model: EnvironmentModel,
        replicates: int,
        sim: Optional[SimulationConfig] = None,
        scheme: Optional[NormalizationScheme] = None,
        workers: int = 1,
    ) -> List[ReplicateOutcome]:
        """
        Run the limit pipeline on replicates 0..replicates-1.

        Raises:
            ModelValidationError: if replicates < 100
        """
        if replicates < MIN_REPLICATES:
            raise ModelValidationError(f"replicates must be >= {MIN_REPLICATES}, got {replicates}")
        sim = sim or SimulationConfig()
        scheme = scheme or NormalizationScheme()
        tasks = [_LimitTask(model, r, sim, scheme) for r in range(replicates)]
        logger.info(f"Running {replicates} limit replicates")
        outcomes = map_replicates(run_limit_replicate, tasks, workers)
        unstable = sum(1 for o in outcomes if not o.stabilized)
        if unstable:
            logger.warning(f"{unstable} of {replicates} replicates did not stabilize and are excluded from KS")
        return outcomes

    def estimate_Y_distribution(
        self,
        model: EnvironmentModel,
        replicates: int,
        sim: Optional[SimulationConfig] = None,
        workers: int = 1,
        outcomes: Optional[List[ReplicateOutcome]] = None,
    ) -> YDistributionReport:
        """
        Sample the Y-limit and test it against Uniform(0, 1).

        Args:
            model: Environment model
            replicates: Number of environments, at least 100
            sim: Stepping and stabilization policy
            workers: Process pool size
            outcomes: Reuse outcomes of simulate_replicates instead of simulating

        Returns:
            Y and T samples, KS fields and quantile coverage
        """
        if outcomes is None:
            outcomes = self.simulate_replicates(model, replicates, sim, workers=workers)
        used = [o for o in outcomes if o.stabilized]
        ys = [o.Y for o in used]
        coverage = []
        for x in COVERAGE_POINTS:
            fraction = sum(1 for y in ys if y <= x) / len(ys) if ys else math.nan
            se = math.sqrt(x * (1.0 - x) / len(ys)) if ys else math.nan
            coverage.append(QuantileCoverage(x=x, fraction=fraction, se=se))
        return YDistributionReport(
            y_samples=ys,
            t_samples=[o.T for o in used],
            ks_uniform=scipy_stats.ks_statistic(ys, scipy_stats.uniform_cdf) if ys else None,
            coverage=coverage,
            replicates=len(outcomes),
            used=len(used),
            unstabilized=len(outcomes) - len(used),
            truncated=sum(1 for o in outcomes if o.truncated),
            modes=self.summarize_modes(outcomes),
        )

    def normalized_limit_sample(
        self,
        model: EnvironmentModel,
        scheme: NormalizationScheme,
        replicates: int,
        sim: Optional[SimulationConfig] = None,
        workers: int = 1,
        outcomes: Optional[List[ReplicateOutcome]] = None,
    ) -> NormalizedSampleReport:
        """
        Samples of U(Z_n)/c_n at the final generation, with the -log(1 - Y_n) transform beside them.

        For the Sibuya model under U = log and the product normalizer both are tested against Exp(1).
        """
        if outcomes is None:
            outcomes = self.simulate_replicates(model, replicates, sim, scheme, workers)
        used = [o for o in outcomes if o.stabilized]
        samples = [o.normalized for o in used]
        transforms = [o.exp_transform for o in used]
        h_of_t = [o.H_of_T for o in used if o.H_of_T is not None]
        exponential_limit = scheme.has_exponential_limit and model.kind == ModelKind.SIBUYA_UNIFORM and bool(used)
        identity = max((abs(a - b) for a, b in zip(samples, transforms)), default=0.0)
        h_residual = max((abs(o.normalized - o.H_of_T) for o in used if o.H_of_T is not None), default=None)
        return NormalizedSampleReport(
            samples=samples,
            exp_transform=transforms,
            H_of_T=h_of_t,
            ks_exponential=scipy_stats.ks_statistic(transforms, scipy_stats.exponential_cdf) if exponential_limit else None,
            ks_direct=scipy_stats.ks_statistic(samples, scipy_stats.exponential_cdf) if exponential_limit else None,
            max_identity_residual=identity,
            max_H_residual=h_residual,
            used=len(used),
        )

    @staticmethod
    def summarize_modes(outcomes: Sequence[ReplicateOutcome]) -> ModeSwitchSummary:
        switches = [o.mode_switch_index for o in outcomes if o.mode_switch_index is not None]
        return ModeSwitchSummary(
            trajectories=len(outcomes),
            switched=len(switches),
            truncated=sum(1 for o in outcomes if o.truncated),
            unstabilized=sum(1 for o in outcomes if not o.stabilized),
            switch_generations=switches,
            mean_switch_generation=(sum(switches) / len(switches)) if switches else None,
        )

    # --- W atoms ----------------------------------------------------------------------

    def estimate_W_atoms(
        self,
        env: Environment,
        s: float,
        replicates: int,
        n: int,
        sim: Optional[SimulationConfig] = None,
        workers: int = 1,
    ) -> AtomReport:
        """
        Classify population replicates on one environment by the sign of log Z_n + log h_n.

        Args:
            env: Fixed environment
            s: Positive point
            replicates: Number of population replicates
            n: Generation inspected
            sim: Stepping policy
            workers: Process pool size

        Returns:
            Atom fractions (zero + infinity + ambiguous = 1) and the mean of X_n against e^{-s}
        """
        if s <= 0:
            raise ModelValidationError(f"s must be > 0, got {s}")
        if replicates < 1:
            raise ModelValidationError(f"replicates must be >= 1, got {replicates}")
        sim = sim or SimulationConfig()
        band = settings.ATOM_DEAD_BAND
        log_h = self.pgf.compose_h_n(env, n, TailScalar.from_float(s)).log_value
        env.materialize(n)
        tasks = [_AtomTask(env, j, n, s, log_h, sim) for j in range(replicates)]
        results = [r for r in map_replicates(run_atom_replicate, tasks, workers) if r is not None]
        if not results:
            raise ModelValidationError(f"no replicate reached generation {n}")
        if len(results) < replicates:
            logger.warning(f"{replicates - len(results)} atom replicates truncated before generation {n}")

        total = len(results)
        zero = sum(1 for log_w, _ in results if log_w < -band)
        infinity = sum(1 for log_w, _ in results if log_w > band)
        xs = np.array([x for _, x in results])
        p_zero, p_inf = zero / total, infinity / total
        return AtomReport(
            s=s,
            n=n,
            replicates=total,
            frac_zero=p_zero,
            frac_infinity=p_inf,
            frac_ambiguous=(total - zero - infinity) / total,
            se_zero=math.sqrt(p_zero * (1.0 - p_zero) / total),
            se_infinity=math.sqrt(p_inf * (1.0 - p_inf) / total),
            mean_X=float(xs.mean()),
            se_X=float(xs.std(ddof=1) / math.sqrt(total)) if total > 1 else math.nan,
            expected_mean_X=math.exp(-s),
            dead_band=band,
        )

    # --- martingale mean --------------------------------------------------------------

    def estimate_martingale_mean(
        self,
        env: Environment,
        s: float,
        replicates: int,
        n: int,
        exact_budget: Optional[int] = None,
        workers: int = 1,
    ) -> MartingaleMeanReport:
        """
        Estimate E(X_n(env, s) | env) with exact stepping only.

        Args:
            env: Fixed environment
            s: Positive point
            replicates: Number of population replicates
            n: Generation inspected
            exact_budget: Largest population stepped exactly; defaults to settings.EXACT_BUDGET
            workers: Process pool size

        Returns:
            Mean and standard error of X against e^{-s}, with the number of budget-stopped paths
        """
        if s <= 0:
            raise ModelValidationError(f"s must be > 0, got {s}")
        if replicates < 2:
            raise ModelValidationError(f"replicates must be >= 2, got {replicates}")
        budget = exact_budget or settings.EXACT_BUDGET
        log_h_path = tuple(h.log_value for h in self.pgf.h_path(env, n, TailScalar.from_float(s)))
        env.materialize(n)
        tasks = [
            _MartingaleTask(env, j, log_h_path, s, budget, settings.SIBUYA_TABLE_CAP)
            for j in range(replicates)
        ]
        results = map_replicates(run_martingale_replicate, tasks, workers)
        xs = np.array([x for x, _ in results])
        stopped = sum(1 for _, was_stopped in results if was_stopped)
        if stopped:
            logger.info(f"{stopped} of {replicates} martingale replicates stopped at the exact budget {budget}")
        return MartingaleMeanReport(
            s=s,
            n=n,
            replicates=replicates,
            exact_budget=budget,
            stopped=stopped,
            mean_X=float(xs.mean()),
            se_X=float(xs.std(ddof=1) / math.sqrt(replicates)),
            expected_mean_X=math.exp(-s),
        )

    # --- normalization sequences ------------------------------------------------------

    def compute_H(self, env: Environment, scheme: NormalizationScheme, s: float, n_max: int) -> List[float]:
        """U(1/h_n(env, s)) / c_n(env) for n = 1..n_max, computed in log coordinate."""
        if s <= 0:
            raise ModelValidationError(f"s must be > 0, got {s}")
        path = self.pgf.h_path(env, n_max, TailScalar.from_float(s))
        log_c = log_c_sequence(self.pgf, env, scheme, n_max)
        return [safe_exp(log_U(scheme, -path[n].log_value) - log_c[n]) for n in range(1, n_max + 1)]

    def compute_alpha_ratio(self, env: Environment, scheme: NormalizationScheme, n_max: int) -> List[float]:
        """c_{n-1}(shift(env, 1)) / c_n(env) for n = 1..n_max."""
        if n_max < 1:
            raise ModelValidationError(f"n_max must be >= 1, got {n_max}")
        log_c = log_c_sequence(self.pgf, env, scheme, n_max)
        log_c_shift = log_c_sequence(self.pgf, env.shift(1), scheme, n_max - 1)
        return [safe_exp(log_c_shift[n - 1] - log_c[n]) for n in range(1, n_max + 1)]

    def quantile_G(self, F: Union[str, Sequence[float]], x: float) -> float:
        """
        G(x) = inf{y >= 0 : F(y) >= x} for the builtin "exponential" F or an empirical sample.
        """
        if not (0.0 <= x <= 1.0):
            raise ModelValidationError(f"x must lie in [0, 1], got {x}")
        if isinstance(F, str):
            if F != "exponential":
                raise ModelValidationError(f"unknown builtin distribution {F!r}")
            return -math.log1p(-x) if x < 1.0 else math.inf
        sample = np.sort(np.asarray(F, dtype=float))
        if sample.size == 0:
            raise ModelValidationError("empirical quantile requires a nonempty sample")
        if x == 0.0:
            return 0.0
        k = max(1, math.ceil(x * sample.size))
        return float(sample[k - 1])

    def check_G_identity(self, env: Environment, scheme: NormalizationScheme, s: float, n_max: int) -> GIdentityReport:
        """
        Compare H(env, s) with G(env, e^{-s}) and G(env, e^{-s}) / G(shift(env, 1), e^{-h_{xi_0}(s)}) with alpha(env).

        G is the quantile of the builtin exponential limit law.
        """
        s_tail = TailScalar.from_float(s)
        h_limit = self.compute_H(env, scheme, s, n_max)[-1]
        # G(e^{-s}) = -log(1 - e^{-s}) for the exponential law
        g_value = -log_one_minus_exp_neg(s_tail.log_value)
        h0 = self.pgf.eval_h(env.law_at(0), s_tail)
        g_shift = -log_one_minus_exp_neg(h0.log_value)
        ratio = g_value / g_shift
        alpha = self.compute_alpha_ratio(env, scheme, n_max)[-1]
        return GIdentityReport(
            s=s,
            H_limit=h_limit,
            G_value=g_value,
            H_residual=abs(h_limit - g_value),
            shift_ratio=ratio,
            alpha=alpha,
            alpha_residual=abs(ratio - alpha),
        )

    # --- functional equation ------------------------------------------------------------

    def verify_functional_equation(
        self,
        model: EnvironmentModel,
        F_spec: Literal["exponential", "empirical"] = "exponential",
        alpha_rule: Literal["stable_index", "scheme"] = "stable_index",
        u_grid: Optional[Sequence[float]] = None,
        environments: int = 100,
        replicates: int = 2000,
        sim: Optional[SimulationConfig] = None,
        scheme: Optional[NormalizationScheme] = None,
        sample_kind: Literal["exp_transform", "direct"] = "exp_transform",
        workers: int = 1,
    ) -> FunctionalEquationReport:
        """
        Max over u_grid and sampled environments of |F_env(alpha(env) u) - f_{xi_0}(F_{shift(env)}(u))|.

        Args:
            model: Environment model
            F_spec: "exponential" for the analytic 1 - e^{-x}; "empirical" for ECDFs of simulated limits
            alpha_rule: alpha(env) from the stable index of xi_0 or from the scheme's c_n ratio
            u_grid: Evaluation points, default 0.1 k for k = 1..50
            environments: Number of sampled environments
            replicates: Samples per side in empirical mode
            sim: Stepping policy for empirical mode
            scheme: Normalization scheme (alpha_rule "scheme" and direct samples)
            sample_kind: Limit variable sampled in empirical mode
            workers: Process pool size

        Returns:
            FunctionalEquationReport
        """
        u = np.asarray(u_grid if u_grid is not None else [0.1 * k for k in range(1, 51)], dtype=float)
        scheme = scheme or NormalizationScheme()
        sim = sim or SimulationConfig()
        if environments < 1:
            raise ModelValidationError(f"environments must be >= 1, got {environments}")

        residuals = []
        for r in range(environments):
            env = Environment.create(model, r)
            law0 = env.law_at(0)
            alpha = self._alpha_for(env, alpha_rule, scheme, sim.n_max)
            if F_spec == "exponential":
                left = -np.expm1(-alpha * u)
                right = np.array([self.pgf.eval_f(law0, float(-math.expm1(-x))) for x in u])
            else:
                F_env, F_shift = self._empirical_pair(env, replicates, sim, scheme, sample_kind, workers)
                left = F_env(alpha * u)
                right = np.array([self.pgf.eval_f(law0, float(v)) for v in F_shift(u)])
            residuals.append(float(np.max(np.abs(left - right))) if u.size else 0.0)

        logger.info(f"Functional equation ({F_spec}) max residual {max(residuals):.3e} over {environments} environments")
        return FunctionalEquationReport(
            mode="analytic" if F_spec == "exponential" else "empirical",
            max_residual=max(residuals),
            u_grid=[float(x) for x in u],
            environments=environments,
            per_environment=residuals,
            replicates=replicates if F_spec == "empirical" else None,
        )

    # --- growth taxonomy ------------------------------------------------------------------

    def diagnose_growth_case(
        self,
        env: Environment,
        scheme: NormalizationScheme,
        s_grid: Sequence[float],
        n_max: int,
    ) -> GrowthDiagnosis:
        """
        Four-case taxonomy from the trends of h_n(env, s) c_n(env) over s_grid.

        (a) every product -> inf, (b) every product -> 0, (c) a split between 0 and inf,
        (d) some product -> 1 without a split; inconclusive otherwise.
        """
        if not s_grid or n_max < 1:
            raise ModelValidationError("diagnose_growth_case needs a nonempty s_grid and n_max >= 1")
        threshold = settings.GROWTH_LOG_THRESHOLD
        unit_tol = settings.GROWTH_UNIT_TOL
        log_c = log_c_sequence(self.pgf, env, scheme, n_max)

        evidence = []
        for s in sorted(s_grid):
            path = self.pgf.h_path(env, n_max, TailScalar.from_float(s))
            log_products = [path[n].log_value + log_c[n] for n in range(1, n_max + 1)]
            last = log_products[-1]
            if last >= threshold:
                trend = "infinity"
            elif last <= -threshold:
                trend = "zero"
            elif abs(math.expm1(last)) <= unit_tol:
                trend = "one"
            else:
                trend = "undetermined"
            evidence.append(GrowthEvidence(s=s, log_products=log_products, trend=trend))

        trends = [e.trend for e in evidence]
        s_r = None
        if all(t == "infinity" for t in trends):
            case = "a"
        elif all(t == "zero" for t in trends):
            case = "b"
        elif "zero" in trends and "infinity" in trends:
            last_zero = max(e.s for e in evidence if e.trend == "zero")
            first_inf = min(e.s for e in evidence if e.trend == "infinity")
            ones = [e.s for e in evidence if e.trend == "one"]
            if last_zero < first_inf and "undetermined" not in trends:
                case = "c"
                s_r = ones[0] if ones else 0.5 * (last_zero + first_inf)
            else:
                case = "inconclusive"
        elif "one" in trends:
            case = "d"
            s_r = next(e.s for e in evidence if e.trend == "one")
        else:
            case = "inconclusive"
        return GrowthDiagnosis(
            case=case,
            s_r=s_r,
            evidence=evidence,
            thresholds={"log_threshold": threshold, "unit_tol": unit_tol, "n_max": float(n_max)},
        )

    # --- full pipeline ---------------------------------------------------------------------

    def run_limit_pipeline(
        self,
        model: EnvironmentModel,
        scheme: NormalizationScheme,
        replicates: int,
        sim: SimulationConfig,
        s_grid: Sequence[float],
        profile_n: int,
        workers: int = 1,
        functional_environments: int = 100,
    ):
        """
        Everything the `limits` command reports.

        Returns:
            (LimitReport, replicate outcomes)
        """
        outcomes = self.simulate_replicates(model, replicates, sim, scheme, workers)
        report = self.assemble_limit_report(model, scheme, outcomes, s_grid, profile_n, functional_environments)
        return report, outcomes

    def assemble_limit_report(
        self,
        model: EnvironmentModel,
        scheme: NormalizationScheme,
        outcomes: List[ReplicateOutcome],
        s_grid: Sequence[float],
        profile_n: int,
        functional_environments: int = 100,
    ) -> LimitReport:
        """LimitReport from replicate outcomes plus the deterministic normalization diagnostics."""
        y_report = self.estimate_Y_distribution(model, len(outcomes), outcomes=outcomes)
        normalized = self.normalized_limit_sample(model, scheme, len(outcomes), outcomes=outcomes)

        env0 = Environment.create(model, 0)
        h_profile: Dict[str, List[float]] = {}
        alpha_ratio: List[float] = []
        taxonomy: List[GrowthDiagnosis] = []
        functional = None
        complete = True
        try:
            for s in s_grid:
                h_profile[repr(float(s))] = self.compute_H(env0, scheme, s, profile_n)
            alpha_ratio = self.compute_alpha_ratio(env0, scheme, profile_n)
            if s_grid:
                taxonomy.append(self.diagnose_growth_case(env0, scheme, s_grid, profile_n))
            if model.kind == ModelKind.SIBUYA_UNIFORM:
                functional = self.verify_functional_equation(
                    model, environments=min(functional_environments, len(outcomes))
                ).max_residual
        except UnsupportedLawError as e:
            logger.warning(f"Normalization diagnostics skipped: {str(e)}")
            complete = False

        return LimitReport(
            y_samples=y_report.y_samples,
            t_samples=y_report.t_samples,
            ks_uniform=y_report.ks_uniform,
            ks_exponential=normalized.ks_exponential,
            ks_direct=normalized.ks_direct,
            h_profile=h_profile,
            alpha_ratio=alpha_ratio,
            functional_eq_residual=functional,
            taxonomy=taxonomy,
            coverage=y_report.coverage,
            modes=y_report.modes,
            complete=complete,
        )

    # --- internals ----------------------------------------------------------------------

    def _alpha_for(self, env: Environment, rule: str, scheme: NormalizationScheme, n_max: int) -> float:
        if rule == "stable_index":
            alpha = env.law_at(0).stable_index
            if alpha is None:
                raise UnsupportedLawError("alpha rule 'stable_index' needs a Sibuya law at index 0")
            return alpha
        return self.compute_alpha_ratio(env, scheme, max(n_max, 1))[-1]

    def _empirical_pair(
        self,
        env: Environment,
        replicates: int,
        sim: SimulationConfig,
        scheme: NormalizationScheme,
        sample_kind: str,
        workers: int,
    ):
        shifted = env.shift(1)
        env.materialize(sim.n_max + 1)
        tasks = [_TransformTask(env, env, j, sim, scheme, sample_kind) for j in range(replicates)]
        tasks += [_TransformTask(shifted, env, j, sim, scheme, sample_kind) for j in range(replicates)]
        values = map_replicates(run_transform_replicate, tasks, workers)
        own = [v for v in values[:replicates] if v is not None]
        other = [v for v in values[replicates:] if v is not None]
        if not own or not other:
            raise ModelValidationError("no stabilized samples for the empirical functional equation")
        return scipy_stats.empirical_cdf(own), scipy_stats.empirical_cdf(other)
