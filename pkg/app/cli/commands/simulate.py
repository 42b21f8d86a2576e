import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from app.integrations.worker_pool import map_replicates
from app.models.environment import EnvironmentModel
from app.models.trajectory import MartingaleSample, Trajectory
from app.repositories.environment_repository import EnvironmentRepository
from app.repositories.trajectory_repository import TrajectoryRepository
from app.schemas.population import ModeSwitchSummary, SimulationConfig
from app.schemas.run_config import RunConfig
from app.services.environment_service import EnvironmentService
from app.services.population_service import PopulationService

logger = logging.getLogger(__name__)
environment_service = EnvironmentService()


@dataclass(frozen=True)
class _SimulateTask:
    model: EnvironmentModel
    replicate: int
    generations: int
    sim: SimulationConfig
    s_grid: Tuple[float, ...]


def simulate_replicate(task: _SimulateTask) -> Tuple[Trajectory, Dict[float, List[MartingaleSample]]]:
    """One trajectory with its Y path and the martingale path at every s."""
    population = PopulationService()
    env = environment_service.sample_environment(task.model, task.replicate)
    # tolerance 0 never stabilizes, so the Y path covers every generation
    traj = population.simulate_until_stable(
        env,
        population.population_rng(env, 0),
        task.sim.to_step_config(),
        tolerance=0.0,
        n_max=task.generations,
        n_min=1,
    )
    paths = {s: population.compute_martingale_path(env, traj, s) for s in task.s_grid}
    return traj, paths


def summarize(trajectories: Sequence[Trajectory]) -> ModeSwitchSummary:
    switches = [t.mode_switch_index for t in trajectories if t.mode_switch_index is not None]
    return ModeSwitchSummary(
        trajectories=len(trajectories),
        switched=len(switches),
        truncated=sum(1 for t in trajectories if t.truncated),
        unstabilized=0,
        switch_generations=switches,
        mean_switch_generation=(sum(switches) / len(switches)) if switches else None,
    )


def run(config: RunConfig):
    """
    Simulate `replicates` environments for `generations` steps.

    Writes samples.csv (one row per replicate and generation) and environments.json.
    """
    model = environment_service.build_model(config.model)
    assumptions = environment_service.validate_assumptions(model, config.probe)
    annealed = environment_service.annealed_log_mean_probe(model, config.replicates)

    tasks = [
        _SimulateTask(model, r, config.generations, config.simulation, tuple(config.s_grid))
        for r in range(config.replicates)
    ]
    results = map_replicates(simulate_replicate, tasks, config.workers)
    trajectories = [traj for traj, _ in results]
    modes = summarize(trajectories)
    if modes.truncated:
        logger.warning(f"{modes.truncated} of {modes.trajectories} trajectories truncated")

    TrajectoryRepository.save_trajectories(trajectories, [paths for _, paths in results], config.s_grid)
    EnvironmentRepository.save([environment_service.to_record(t.env, t.n) for t in trajectories])

    finals = [
        {
            "replicate": r,
            "n": t.n,
            "mode": t.states[-1].mode,
            "log_count": t.log_count(t.n),
            "Y": t.y_path[-1],
            "truncated_at": t.truncated_at,
        }
        for r, t in enumerate(trajectories)
    ]
    result = {"assumptions": assumptions, "annealed_log_mean": annealed, "modes": modes, "final": finals}
    return result, True, True
