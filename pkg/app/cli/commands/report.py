import logging
from pathlib import Path

from pydantic import ValidationError

from app.core.errors import ConfigError
from app.core.storage import RunStore, run_store
from app.repositories.report_repository import ReportRepository
from app.repositories.trajectory_repository import TrajectoryRepository
from app.schemas.run_config import RunConfig
from app.services.environment_service import EnvironmentService
from app.services.limit_service import LimitService

logger = logging.getLogger(__name__)
environment_service = EnvironmentService()
limit_service = LimitService()


def run(config: RunConfig):
    """
    Re-derive the limit report of a previous limits run from its samples.csv.

    Model, scheme, s grid and profile depth come from the source run's echoed config;
    nothing is simulated, so the result equals the source report's.
    """
    source_dir = config.source or config.out
    source = run_store if Path(source_dir) == run_store.root else RunStore(source_dir)
    record = ReportRepository.load_run_record(source)
    if record.get("command") != "limits":
        raise ConfigError(f"source run {source_dir} is not a limits run", ["source"])
    try:
        source_config = RunConfig.model_validate(record["config"])
    except ValidationError as e:
        logger.error(f"Error reading config of {source_dir}: {str(e)}")
        raise ConfigError(f"source run {source_dir} has an invalid config echo", ["source"]) from e

    model = environment_service.build_model(source_config.model)
    outcomes = TrajectoryRepository.load_outcomes(source)
    logger.info(f"Re-deriving report from {len(outcomes)} samples in {source_dir}")
    report = limit_service.assemble_limit_report(
        model,
        source_config.scheme,
        outcomes,
        source_config.s_grid,
        source_config.profile_n,
    )
    return report, report.complete, True
