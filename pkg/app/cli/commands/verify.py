import logging

from app.schemas.run_config import RunConfig
from app.services.acceptance_service import AcceptanceService

logger = logging.getLogger(__name__)
acceptance_service = AcceptanceService()


def run(config: RunConfig):
    """Run the acceptance suite; the run fails with the acceptance exit code if any criterion fails."""
    report = acceptance_service.run(
        scale=config.acceptance,
        workers=config.workers,
        only=config.criteria or None,
        sim=config.simulation,
    )
    if report.passed:
        logger.info(f"All {len(report.criteria)} acceptance criteria passed")
    else:
        logger.warning(f"Acceptance criteria failed: {', '.join(report.failures)}")
    return report, True, report.passed
