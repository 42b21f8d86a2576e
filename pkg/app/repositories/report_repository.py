import logging
from typing import Any, Dict, Optional

from app.core.storage import RunStore, run_store

logger = logging.getLogger(__name__)


class ReportRepository:
    """Repository for the JSON report and run record of a run."""

    table_name = "report.json"
    record_name = "run_record.json"
    derived_record_name = "report_record.json"

    @classmethod
    def record_file(cls, command: str) -> str:
        """A `report` run may write into its source directory, so it keeps its own record file."""
        return cls.derived_record_name if command == "report" else cls.record_name

    @classmethod
    def save_report(cls, report: Any, store: Optional[RunStore] = None) -> None:
        """Write report.json; its bytes depend only on the config and seeds."""
        path = (store or run_store).write_json(cls.table_name, report)
        logger.info(f"Report written to {path}")

    @classmethod
    def load_report(cls, store: Optional[RunStore] = None) -> Dict[str, Any]:
        return (store or run_store).read_json(cls.table_name)

    @classmethod
    def save_run_record(cls, record: Dict[str, Any]) -> None:
        """Write the run record (config echo, wall-clock, stream accounting)."""
        run_store.write_json(cls.record_file(record.get("command", "")), record)

    @classmethod
    def load_run_record(cls, store: Optional[RunStore] = None) -> Dict[str, Any]:
        return (store or run_store).read_json(cls.record_name)
