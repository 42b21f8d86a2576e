import logging
import math
import statistics
from typing import Any, Dict, List, Optional

from app.core.config import settings
from app.core.errors import AssumptionViolation, ModelValidationError
from app.core.logspace import TailScalar
from app.models.environment import Environment, EnvironmentModel, ModelKind
from app.models.offspring import OffspringLaw
from app.schemas.environment import (
    AnnealedMeanReport,
    AssumptionReport,
    DefectRatioProbe,
    EnvironmentModelSpec,
    EnvironmentRecord,
    ProbeSpec,
)
from app.services.pgf_service import PgfService

logger = logging.getLogger(__name__)


class EnvironmentService:
    """Service for building, sampling, probing and persisting i.i.d. environments."""

    def __init__(self):
        """Initialize the environment service."""
        self.pgf = PgfService()

    def build_model(self, spec: EnvironmentModelSpec) -> EnvironmentModel:
        """
        Build a validated environment model.

        Args:
            spec: Model description

        Returns:
            Immutable environment model

        Raises:
            ModelValidationError: naming the violated constraint ("A1 violated", "p_1=1", ...)
        """
        if spec.kind == "sibuya":
            return EnvironmentModel(
                ModelKind.SIBUYA_UNIFORM,
                spec.base_seed,
                alpha_min=spec.alpha_min,
                alpha_max=spec.alpha_max,
            )

        strict = settings.ENFORCE_ASSUMPTIONS and not spec.relax_assumptions
        laws = []
        for i, law_spec in enumerate(spec.laws):
            try:
                laws.append(OffspringLaw.from_params(law_spec.model_dump(exclude_none=True), strict=strict))
            except AssumptionViolation as e:
                logger.error(f"Error building model law {i}: {str(e)}")
                raise ModelValidationError(f"model.laws[{i}]: {e}") from e
        if not strict:
            logger.warning("Environment model built with assumption enforcement relaxed")
        return EnvironmentModel(
            ModelKind.FINITE_MIXTURE,
            spec.base_seed,
            laws=tuple(laws),
            probs=tuple(spec.probs),
        )

    def spec_from_params(self, params: Dict[str, Any], base_seed: int) -> EnvironmentModelSpec:
        """Inverse of EnvironmentModel.to_params."""
        kind = params.get("kind")
        if kind == ModelKind.SIBUYA_UNIFORM.value:
            return EnvironmentModelSpec(
                kind="sibuya",
                alpha_min=params["alpha_min"],
                alpha_max=params["alpha_max"],
                base_seed=base_seed,
            )
        if kind == ModelKind.FINITE_MIXTURE.value:
            relaxed = bool(params.get("relax_assumptions", False))
            return EnvironmentModelSpec(
                kind="finite_mixture",
                laws=params["laws"],
                probs=params["probs"],
                base_seed=base_seed,
                relax_assumptions=relaxed,
            )
        raise ModelValidationError(f"unknown model kind: {kind!r}")

    def sample_environment(self, model: EnvironmentModel, replicate_index: int) -> Environment:
        """
        Environment of one replicate.

        The law sequence depends only on (model.base_seed, replicate_index).
        """
        if replicate_index < 0:
            raise ModelValidationError(f"replicate_index must be >= 0, got {replicate_index}")
        return Environment.create(model, replicate_index)

    def shift(self, env: Environment, k: int) -> Environment:
        """Shift operator applied k times."""
        if k < 0:
            raise ModelValidationError(f"shift requires k >= 0, got {k}")
        return env.shift(k)

    def validate_assumptions(self, model: EnvironmentModel, probe: ProbeSpec) -> AssumptionReport:
        """
        Check A1 exactly and probe A2 through defect-ratio trends.

        Args:
            model: Environment model
            probe: Probe depth, s grid and number of sampled environments

        Returns:
            Report with per-s final ratios and a consistent / inconsistent / inconclusive verdict
        """
        a1_pass, a1_detail = self._check_a1(model)
        thresholds = {
            "ratio_threshold": settings.A2_RATIO_THRESHOLD,
            "positive_floor": settings.A2_POSITIVE_FLOOR,
            "n_probe": float(probe.n_probe),
        }
        if not probe.s_grid:
            logger.warning("A2 probe called with an empty s grid")
            return AssumptionReport(a1_pass=a1_pass, a1_detail=a1_detail, probes=[], verdict="inconclusive", thresholds=thresholds)

        probes: List[DefectRatioProbe] = []
        for s in probe.s_grid:
            finals = []
            for r in range(probe.replicates):
                env = self.sample_environment(model, r)
                ratios = self.pgf.estimate_d(env, TailScalar.from_float(s), probe.n_probe)
                finals.append(ratios[-1])
            probes.append(
                DefectRatioProbe(
                    s=s,
                    final_ratios=finals,
                    max_final_ratio=max(finals),
                    median_final_ratio=statistics.median(finals),
                )
            )

        if all(p.max_final_ratio <= settings.A2_RATIO_THRESHOLD for p in probes):
            verdict = "consistent"
        elif any(p.median_final_ratio >= settings.A2_POSITIVE_FLOOR for p in probes):
            verdict = "inconsistent"
        else:
            verdict = "inconclusive"
        logger.info(f"A2 probe over {len(probes)} grid points: {verdict}")
        return AssumptionReport(a1_pass=a1_pass, a1_detail=a1_detail, probes=probes, verdict=verdict, thresholds=thresholds)

    def annealed_log_mean_probe(self, model: EnvironmentModel, samples: int) -> AnnealedMeanReport:
        """Empirical E log m(xi_0) over `samples` independent draws of xi_0."""
        if samples < 1:
            raise ModelValidationError(f"samples must be >= 1, got {samples}")
        logs = [math.log(self.sample_environment(model, r).law_at(0).mean()) for r in range(samples)]
        infinite = sum(1 for v in logs if math.isinf(v))
        mean_log_m = math.inf if infinite else math.fsum(logs) / samples
        return AnnealedMeanReport(samples=samples, mean_log_m=mean_log_m, infinite_mean_fraction=infinite / samples)

    def to_record(self, env: Environment, n: Optional[int] = None) -> EnvironmentRecord:
        """Record of the realized prefix (or the first n laws, realizing them if needed)."""
        if n is not None:
            env.materialize(n)
        return EnvironmentRecord(
            model=env.model.to_params(),
            base_seed=env.model.base_seed,
            replicate_index=env.replicate_index,
            realized=[law.to_params() for law in env.realized_prefix()],
        )

    def replay_record(self, record: EnvironmentRecord) -> Environment:
        """
        Re-derive an environment from its record and check the realized laws match.

        Raises:
            ModelValidationError: if a re-derived law differs from the recorded one
        """
        model = self.build_model(self.spec_from_params(record.model, record.base_seed))
        env = self.sample_environment(model, record.replicate_index)
        for i, params in enumerate(record.realized):
            derived = env.law_at(i).to_params()
            if derived != params:
                raise ModelValidationError(f"realized[{i}] does not replay: recorded {params}, derived {derived}")
        return env

    @staticmethod
    def _check_a1(model: EnvironmentModel):
        if model.kind == ModelKind.SIBUYA_UNIFORM:
            return True, "Sibuya laws have p_0 = 0"
        bad = [i for i, law in enumerate(model.laws) if not law.satisfies_a1()]
        if bad:
            return False, f"A1 violated by laws {bad}"
        return True, "every law has p_0 = 0"
