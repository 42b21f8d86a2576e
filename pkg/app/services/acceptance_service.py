import logging
import math
import tempfile
from typing import Callable, Dict, List, Optional, Sequence

from app.core.config import settings
from app.core.logspace import TailScalar, log_one_minus_exp_neg, neg_log_one_minus
from app.core.rng import StreamTag, derive_rng
from app.core.storage import RunStore
from app.integrations import scipy_stats
from app.models.environment import Environment, EnvironmentModel
from app.models.offspring import OffspringLaw
from app.schemas.acceptance import AcceptanceReport, CriterionResult
from app.schemas.environment import EnvironmentModelSpec
from app.schemas.limits import NormalizationScheme
from app.schemas.population import SimulationConfig
from app.repositories.report_repository import ReportRepository
from app.repositories.trajectory_repository import TrajectoryRepository
from app.schemas.regularity import RegularityConfig, Verdict
from app.services.environment_service import EnvironmentService
from app.services.limit_service import LimitService
from app.services.population_service import PopulationService
from app.services.regularity_service import RegularityService

logger = logging.getLogger(__name__)

EXAMPLE_ALPHA_MIN = 0.2
EXAMPLE_ALPHA_MAX = 0.7
EXAMPLE_SEED = 42

MARTINGALE_N = 6
ATOM_N = 20
CLOSED_FORM_N = 30
CLOSED_FORM_TOL = 1e-12
IDENTITY_TOL = 1e-9
REGULARITY_S_GRID = [0.25, 0.5, 1.0, 2.0, 4.0]
SUFFICIENT_C_MAX = 0.7
ANALYTIC_FE_TOL = 1e-12
EMPIRICAL_FE_TOL = 0.06
UNIFORM_KS_TOL = 0.0304
DIRECT_KS_TOL = 0.05
STABLE_KS_TOL = 0.05
STABLE_ALPHAS = [0.3, 0.5, 0.7]
DEFECT_N = 30
DEFECT_S_GRID = [0.5, 1.0, 2.0]
DEFECT_TOL = 1e-6
SQUARE_RATIO_TOL = 1e-9
ATOM_AMBIGUOUS_MAX = 0.02
SE_BAND = 3.0
DETERMINISM_REPLICATES = 100
DETERMINISM_WORKERS = 8


class AcceptanceService:
    """Service running the acceptance suite behind `verify`."""

    def __init__(self):
        """Initialize the acceptance service."""
        self.environment = EnvironmentService()
        self.population = PopulationService()
        self.regularity = RegularityService()
        self.limits = LimitService()
        self.pgf = self.population.pgf
        self._limit_cache = None

    def example_model(self, base_seed: int = EXAMPLE_SEED) -> EnvironmentModel:
        """Sibuya laws with alpha uniform on [0.2, 0.7]."""
        spec = EnvironmentModelSpec(
            kind="sibuya",
            alpha_min=EXAMPLE_ALPHA_MIN,
            alpha_max=EXAMPLE_ALPHA_MAX,
            base_seed=base_seed,
        )
        return self.environment.build_model(spec)

    def run(
        self,
        scale: Optional[Dict[str, int]] = None,
        workers: int = 1,
        only: Optional[Sequence[str]] = None,
        sim: Optional[SimulationConfig] = None,
    ) -> AcceptanceReport:
        """
        Run every criterion (or the named subset).

        Args:
            scale: Replicate counts; defaults to settings.get_acceptance_scale()
            workers: Process pool size
            only: Criterion names such as ["AC1", "AC4"]
            sim: Stepping policy of the simulated criteria

        Returns:
            AcceptanceReport; passed is False if any criterion failed or errored
        """
        scale = {**settings.get_acceptance_scale(), **(scale or {})}
        sim = sim or SimulationConfig()
        model = self.example_model()
        self._limit_cache = None

        criteria: List[Callable[[], CriterionResult]] = [
            lambda: self.check_y_uniform(model, scale, sim, workers),
            lambda: self.check_exponential_limit(model, scale, sim, workers),
            lambda: self.check_martingale_mean(model, scale, sim, workers),
            lambda: self.check_closed_form_h(model, scale),
            lambda: self.check_regularity(model, scale),
            lambda: self.check_functional_equation(model, scale, sim, workers),
            lambda: self.check_asymptotic_step(scale),
            lambda: self.check_defect_ratio(model, scale),
            lambda: self.check_w_atoms(model, scale, sim, workers),
            lambda: self.check_determinism(model, sim, workers),
        ]
        names = [f"AC{i}" for i in range(1, len(criteria) + 1)]

        results = []
        for name, criterion in zip(names, criteria):
            if only and name not in only:
                continue
            logger.info(f"Running acceptance criterion {name}")
            try:
                result = criterion()
            except Exception as e:
                logger.error(f"Error in acceptance criterion {name}: {str(e)}")
                result = CriterionResult(name=name, description="errored", passed=False, detail=str(e))
            if not result.passed:
                logger.warning(f"Acceptance criterion {name} failed: {result.measured}")
            results.append(result)

        return AcceptanceReport(
            passed=all(r.passed for r in results),
            criteria=results,
            scale={k: int(v) for k, v in scale.items()},
            workers=workers,
        )

    # --- criteria ------------------------------------------------------------------

    def check_y_uniform(self, model, scale, sim, workers) -> CriterionResult:
        y_report, _ = self._limit_run(model, scale, sim, workers)
        ks = y_report.ks_uniform
        return CriterionResult(
            name="AC1",
            description="Y-limit is Uniform(0, 1)",
            passed=ks is not None and ks.D <= UNIFORM_KS_TOL,
            measured={"D": ks.D if ks else math.nan, "used": float(y_report.used)},
            thresholds={"D": UNIFORM_KS_TOL, "critical_95": ks.critical_95 if ks else math.nan},
        )

    def check_exponential_limit(self, model, scale, sim, workers) -> CriterionResult:
        _, normalized = self._limit_run(model, scale, sim, workers)
        ks_exp, ks_direct = normalized.ks_exponential, normalized.ks_direct
        passed = (
            ks_exp is not None
            and ks_direct is not None
            and ks_exp.D <= UNIFORM_KS_TOL
            and ks_direct.D <= DIRECT_KS_TOL
        )
        return CriterionResult(
            name="AC2",
            description="-log(1 - Y) and U(Z_n)/c_n follow Exp(1)",
            passed=passed,
            measured={
                "D_transform": ks_exp.D if ks_exp else math.nan,
                "D_direct": ks_direct.D if ks_direct else math.nan,
            },
            thresholds={
                "transform": UNIFORM_KS_TOL,
                "direct": DIRECT_KS_TOL,
            },
        )

    def check_martingale_mean(self, model, scale, sim, workers) -> CriterionResult:
        env = Environment.create(model, 0)
        report = self.limits.estimate_martingale_mean(
            env, math.log(2.0), scale["martingale_replicates"], MARTINGALE_N, sim.exact_budget, workers
        )
        gap = abs(report.mean_X - report.expected_mean_X)
        return CriterionResult(
            name="AC3",
            description="E X_n = e^{-s} on a fixed environment, exact stepping only",
            passed=gap <= SE_BAND * report.se_X,
            measured={
                "mean_X": report.mean_X,
                "se_X": report.se_X,
                "gap": gap,
                "stopped_fraction": report.stopped / report.replicates,
            },
            thresholds={
                "se_band": SE_BAND,
                "expected": report.expected_mean_X,
                "exact_budget": float(report.exact_budget),
            },
        )

    def check_closed_form_h(self, model, scale) -> CriterionResult:
        half = OffspringLaw.sibuya(0.5)
        value = self.pgf.compose_h_n(Environment.from_laws([half, half]), 2, TailScalar.from_float(math.log(2.0)))
        expected = -math.log(0.9375)
        closed_err = abs(value.to_float() / expected - 1.0)

        worst = 0.0
        s = TailScalar.from_float(math.log(2.0))
        base = log_one_minus_exp_neg(s.log_value)
        for r in range(scale["environments"]):
            env = Environment.create(model, r)
            path = self.pgf.h_path(env, CLOSED_FORM_N, s)
            log_alpha_product = 0.0
            for n in range(1, CLOSED_FORM_N + 1):
                log_alpha_product += math.log(env.law_at(n - 1).alpha)
                # h_n = -log(1 - (1 - e^{-s})^{1 / prod alpha_i})
                closed = neg_log_one_minus(base / math.exp(log_alpha_product))
                worst = max(worst, abs(path[n].log_value - closed) / abs(closed))
        return CriterionResult(
            name="AC4",
            description="Composed h_n matches its closed form",
            passed=closed_err <= CLOSED_FORM_TOL and worst <= IDENTITY_TOL,
            measured={"two_step_rel_err": closed_err, "max_log_identity_rel_err": worst},
            thresholds={"two_step": CLOSED_FORM_TOL, "identity": IDENTITY_TOL},
        )

    def check_regularity(self, model, scale) -> CriterionResult:
        config = RegularityConfig()
        total, regular = 0, 0
        worst_product = -math.inf
        for r in range(scale["environments"]):
            env = Environment.create(model, r)
            for s in REGULARITY_S_GRID:
                verdict = self.regularity.classify_point(env, s, config)
                total += 1
                regular += verdict.verdict == Verdict.REGULAR
                worst_product = max(worst_product, verdict.evidence.log_q_products[-1])
        criterion = self.regularity.check_sufficient_criterion(model, scale["environments"], config)
        c = criterion.c_estimate if criterion.c_estimate is not None else math.inf
        return CriterionResult(
            name="AC5",
            description="Every sampled point is Regular and sup Q <= c < 1",
            passed=regular == total and worst_product <= config.regular_threshold and criterion.holds and c <= SUFFICIENT_C_MAX,
            measured={"regular": float(regular), "points": float(total), "max_log_q_product": worst_product, "c": c},
            thresholds={"regular_threshold": config.regular_threshold, "c_max": SUFFICIENT_C_MAX},
        )

    def check_functional_equation(self, model, scale, sim, workers) -> CriterionResult:
        analytic = self.limits.verify_functional_equation(model, "exponential", environments=scale["environments"])
        empirical = self.limits.verify_functional_equation(
            model,
            "empirical",
            environments=1,
            replicates=scale["functional_replicates"],
            sim=sim,
            workers=workers,
        )
        return CriterionResult(
            name="AC6",
            description="F(alpha u) = f_{xi_0}(F_shift(u))",
            passed=analytic.max_residual <= ANALYTIC_FE_TOL and empirical.max_residual <= EMPIRICAL_FE_TOL,
            measured={"analytic": analytic.max_residual, "empirical": empirical.max_residual},
            thresholds={"analytic": ANALYTIC_FE_TOL, "empirical": EMPIRICAL_FE_TOL},
        )

    def check_asymptotic_step(self, scale) -> CriterionResult:
        count = scale["stable_n"]
        replicates = scale["stable_replicates"]
        measured = {}
        passed = True
        for i, alpha in enumerate(STABLE_ALPHAS):
            law = OffspringLaw.sibuya(alpha)
            exact_rng = derive_rng(EXAMPLE_SEED, StreamTag.AUXILIARY, i, 0)
            stable_rng = derive_rng(EXAMPLE_SEED, StreamTag.AUXILIARY, i, 1)
            exact = [
                self.population.step_exact(count, law, exact_rng, budget=count).log_count
                for _ in range(replicates)
            ]
            log_count = math.log(count)
            approx = [self.population.step_asymptotic(log_count, law, stable_rng).log_count for _ in range(replicates)]
            # KS is invariant under the common map x -> log x - log(N) / alpha
            result = scipy_stats.ks_two_sample(exact, approx)
            measured[f"D_alpha_{alpha}"] = result.D
            passed = passed and result.D <= STABLE_KS_TOL
        return CriterionResult(
            name="AC7",
            description="Stable-limit step matches exact sums",
            passed=passed,
            measured=measured,
            thresholds={"D": STABLE_KS_TOL, "N": float(count)},
        )

    def check_defect_ratio(self, model, scale) -> CriterionResult:
        worst = 0.0
        for r in range(scale["environments"]):
            env = Environment.create(model, r)
            for s in DEFECT_S_GRID:
                worst = max(worst, self.pgf.estimate_d(env, TailScalar.from_float(s), DEFECT_N)[-1])

        square = Environment.constant(OffspringLaw.finite([0.0, 0.0, 1.0]))
        square_err = 0.0
        for s in DEFECT_S_GRID:
            ratios = self.pgf.estimate_d(square, TailScalar.from_float(s), DEFECT_N)
            square_err = max(square_err, max(abs(v - 0.5) for v in ratios))
        return CriterionResult(
            name="AC8",
            description="Defect ratio vanishes for Sibuya environments and is 1/2 for f(s) = s^2",
            passed=worst <= DEFECT_TOL and square_err <= SQUARE_RATIO_TOL,
            measured={"max_final_ratio": worst, "square_ratio_err": square_err},
            thresholds={"ratio": DEFECT_TOL, "square": SQUARE_RATIO_TOL},
        )

    def check_w_atoms(self, model, scale, sim, workers) -> CriterionResult:
        env = Environment.create(model, 0)
        report = self.limits.estimate_W_atoms(env, math.log(2.0), scale["atom_replicates"], ATOM_N, sim, workers)
        se = math.sqrt(0.25 / report.replicates)
        passed = (
            abs(report.frac_zero - 0.5) <= SE_BAND * se
            and abs(report.frac_infinity - 0.5) <= SE_BAND * se
            and report.frac_ambiguous <= ATOM_AMBIGUOUS_MAX
        )
        return CriterionResult(
            name="AC9",
            description="W has atoms at 0 and infinity with mass e^{-s} and 1 - e^{-s}",
            passed=passed,
            measured={
                "frac_zero": report.frac_zero,
                "frac_infinity": report.frac_infinity,
                "frac_ambiguous": report.frac_ambiguous,
            },
            thresholds={"se": se, "se_band": SE_BAND, "ambiguous": ATOM_AMBIGUOUS_MAX},
        )

    def check_determinism(self, model, sim, workers) -> CriterionResult:
        many = max(workers, DETERMINISM_WORKERS)
        artifacts = []
        with tempfile.TemporaryDirectory(prefix="bpre-determinism-") as root:
            for pool in (1, many):
                store = RunStore().configure(f"{root}/workers-{pool}")
                outcomes = self.limits.simulate_replicates(model, DETERMINISM_REPLICATES, sim, workers=pool)
                report = self.limits.estimate_Y_distribution(model, DETERMINISM_REPLICATES, sim, outcomes=outcomes)
                ReportRepository.save_report({"command": "verify", "result": report}, store)
                TrajectoryRepository.save_outcomes(outcomes, store)
                artifacts.append(
                    [
                        store.path_for(name).read_bytes()
                        for name in (ReportRepository.table_name, TrajectoryRepository.table_name)
                    ]
                )
        return CriterionResult(
            name="AC10",
            description="Report files are byte-identical across worker counts",
            passed=artifacts[0] == artifacts[1],
            measured={"bytes": float(sum(len(b) for b in artifacts[0]))},
            thresholds={"workers": float(many)},
        )

    # --- internals -------------------------------------------------------------------

    def _limit_run(self, model, scale, sim, workers):
        if self._limit_cache is None:
            replicates = scale["y_replicates"]
            outcomes = self.limits.simulate_replicates(model, replicates, sim, NormalizationScheme(), workers)
            y_report = self.limits.estimate_Y_distribution(model, replicates, sim, outcomes=outcomes)
            normalized = self.limits.normalized_limit_sample(
                model, NormalizationScheme(), replicates, sim, outcomes=outcomes
            )
            self._limit_cache = (y_report, normalized)
        return self._limit_cache
