import logging
from typing import List, Optional

from app.core.storage import RunStore, run_store
from app.schemas.environment import EnvironmentRecord

logger = logging.getLogger(__name__)


class EnvironmentRepository:
    """Repository for realized environment records."""

    table_name = "environments.json"

    @classmethod
    def save(cls, records: List[EnvironmentRecord]) -> None:
        """
        Persist environment records in replicate order.

        Args:
            records: Records of the run
        """
        ordered = sorted(records, key=lambda r: r.replicate_index)
        run_store.write_json(cls.table_name, {"environments": ordered})
        logger.info(f"Saved {len(ordered)} environment records")

    @classmethod
    def load(cls, store: Optional[RunStore] = None) -> List[EnvironmentRecord]:
        """
        Load environment records of the configured run, or of `store`.

        Returns:
            Records; replay them with EnvironmentService.replay_record
        """
        data = (store or run_store).read_json(cls.table_name)
        return [EnvironmentRecord(**item) for item in data.get("environments", [])]
