import logging
from dataclasses import dataclass
from typing import Tuple

from app.integrations.worker_pool import map_replicates
from app.models.environment import EnvironmentModel
from app.repositories.environment_repository import EnvironmentRepository
from app.schemas.regularity import ProcessVerdict, RegularityConfig, Verdict
from app.schemas.run_config import RunConfig
from app.services.environment_service import EnvironmentService
from app.services.regularity_service import RegularityService

logger = logging.getLogger(__name__)
environment_service = EnvironmentService()
regularity_service = RegularityService()


@dataclass(frozen=True)
class _ClassifyTask:
    model: EnvironmentModel
    replicate: int
    s_grid: Tuple[float, ...]
    config: RegularityConfig


def classify_replicate(task: _ClassifyTask) -> ProcessVerdict:
    env = environment_service.sample_environment(task.model, task.replicate)
    return regularity_service.classify_process(env, list(task.s_grid), task.config)


def run(config: RunConfig):
    """
    Classify every sampled environment over the s grid.

    The report carries verdict counts, per-environment verdicts, full evidence for
    replicate 0, the sup Q criterion, a regular-point search and a shift-consistency probe.
    """
    model = environment_service.build_model(config.model)
    tasks = [_ClassifyTask(model, r, tuple(config.s_grid), config.regularity) for r in range(config.replicates)]
    verdicts = map_replicates(classify_replicate, tasks, config.workers)

    counts = {v.value: 0 for v in Verdict}
    for process in verdicts:
        for point in process.points:
            counts[point.verdict.value] += 1
    if counts[Verdict.INCONCLUSIVE.value]:
        logger.warning(f"{counts[Verdict.INCONCLUSIVE.value]} points inconclusive at n_max={config.regularity.n_max}")

    env0 = environment_service.sample_environment(model, 0)
    s0 = config.s_grid[0]
    result = {
        "counts": counts,
        "environments": [
            {
                "replicate": r,
                "verdict": process.verdict,
                "points": [{"s": p.s, "verdict": p.verdict} for p in process.points],
            }
            for r, process in enumerate(verdicts)
        ],
        "evidence": verdicts[0],
        "sufficient_criterion": regularity_service.check_sufficient_criterion(model, config.replicates, config.regularity),
        "regular_point_search": regularity_service.find_regular_point(env0, s0, config.regularity),
        "shift_consistency": regularity_service.check_shift_consistency(env0, s0, 1, config.regularity),
    }
    n_laws = config.regularity.n_max
    EnvironmentRepository.save(
        [environment_service.to_record(environment_service.sample_environment(model, r), n_laws) for r in range(config.replicates)]
    )
    return result, True, True
