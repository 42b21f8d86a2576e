import logging
from typing import Any, Dict, List, Optional, Sequence

from app.core.errors import StorageError
from app.core.storage import RunStore, run_store
from app.models.trajectory import MartingaleSample, Trajectory
from app.schemas.limits import ReplicateOutcome

logger = logging.getLogger(__name__)

# Column order of samples.csv for simulate runs; one log_X_n column per s follows
TRAJECTORY_COLUMNS = ["replicate", "n", "mode", "count_or_log_count", "Y_n"]

# Column order of samples.csv for limits runs
OUTCOME_COLUMNS = [
    "replicate",
    "seed",
    "final_n",
    "mode",
    "Y",
    "T",
    "normalized",
    "exp_transform",
    "H_of_T",
    "stabilized",
    "truncated",
    "mode_switch_index",
]

_BOOL_COLUMNS = {"stabilized", "truncated"}
_INT_COLUMNS = {"replicate", "seed", "final_n", "mode_switch_index"}


def _log_x_column(s: float) -> str:
    return f"log_X_n[s={s!r}]"


class TrajectoryRepository:
    """Repository for per-replicate sample dumps."""

    table_name = "samples.csv"

    @classmethod
    def save_trajectories(
        cls,
        trajectories: Sequence[Trajectory],
        martingales: Sequence[Dict[float, List[MartingaleSample]]],
        s_grid: Sequence[float],
    ) -> None:
        """
        One row per (replicate, generation).

        Args:
            trajectories: Trajectories in replicate order
            martingales: Per trajectory, the martingale path at every s of s_grid
            s_grid: Points of the log_X_n columns
        """
        header = TRAJECTORY_COLUMNS + [_log_x_column(s) for s in s_grid]
        rows = []
        for replicate, (traj, paths) in enumerate(zip(trajectories, martingales)):
            for n, state in enumerate(traj.states):
                value = state.count if traj.is_exact(n) else state.log_count
                y = traj.y_path[n] if n < len(traj.y_path) else None
                rows.append(
                    [replicate, n, state.mode, value, y] + [paths[s][n].log_X_n for s in s_grid]
                )
        run_store.write_csv(cls.table_name, header, rows)
        logger.info(f"Saved {len(rows)} trajectory rows")

    @classmethod
    def save_outcomes(cls, outcomes: Sequence[ReplicateOutcome], store: Optional[RunStore] = None) -> None:
        """One row per limit replicate, in replicate order."""
        ordered = sorted(outcomes, key=lambda o: o.replicate)
        rows = [[getattr(o, column) for column in OUTCOME_COLUMNS] for o in ordered]
        (store or run_store).write_csv(cls.table_name, OUTCOME_COLUMNS, rows)
        logger.info(f"Saved {len(rows)} limit samples")

    @classmethod
    def load_outcomes(cls, store: Optional[RunStore] = None) -> List[ReplicateOutcome]:
        """
        Read back the samples of a limits run.

        Raises:
            StorageError: if samples.csv is not a limits dump
        """
        store = store or run_store
        rows = store.read_csv(cls.table_name)
        if rows and set(OUTCOME_COLUMNS) - set(rows[0]):
            raise StorageError("samples.csv does not hold limit samples", str(store.path_for(cls.table_name)))
        return [ReplicateOutcome(**cls._parse_row(row)) for row in rows]

    @staticmethod
    def _parse_row(row: Dict[str, str]) -> Dict[str, Any]:
        parsed: Dict[str, Any] = {}
        for column in OUTCOME_COLUMNS:
            raw = row[column]
            if raw == "":
                parsed[column] = None
            elif column in _BOOL_COLUMNS:
                parsed[column] = raw == "true"
            elif column in _INT_COLUMNS:
                parsed[column] = int(raw)
            elif column == "mode":
                parsed[column] = raw
            else:
                parsed[column] = float(raw)
        return parsed
