import logging

from app.repositories.environment_repository import EnvironmentRepository
from app.repositories.trajectory_repository import TrajectoryRepository
from app.schemas.run_config import RunConfig
from app.services.environment_service import EnvironmentService
from app.services.limit_service import LimitService

logger = logging.getLogger(__name__)
environment_service = EnvironmentService()
limit_service = LimitService()


def run(config: RunConfig):
    """
    Run the limit pipeline and dump one samples.csv row per replicate.

    The report is incomplete when the normalization diagnostics do not apply to the model.
    """
    model = environment_service.build_model(config.model)
    report, outcomes = limit_service.run_limit_pipeline(
        model,
        config.scheme,
        config.replicates,
        config.simulation,
        config.s_grid,
        config.profile_n,
        workers=config.workers,
    )
    TrajectoryRepository.save_outcomes(outcomes)
    EnvironmentRepository.save(
        [
            environment_service.to_record(environment_service.sample_environment(model, o.replicate), o.final_n)
            for o in outcomes
        ]
    )
    if report.ks_uniform is not None:
        logger.info(f"Y-limit KS D={report.ks_uniform.D:.4f} (critical {report.ks_uniform.critical_95:.4f})")
    return report, report.complete, True
