import csv
import io
import json
import logging
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from app.core.config import settings
from app.core.errors import StorageError

logger = logging.getLogger(__name__)

_TRANSIENT = (BlockingIOError, InterruptedError, TimeoutError)


def to_plain(value: Any) -> Any:
    """Convert a report value into JSON-safe plain data; non-finite floats become strings."""
    if hasattr(value, "model_dump"):
        value = value.model_dump()
    if isinstance(value, Enum):
        return to_plain(value.value)
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if hasattr(value, "item"):
        return to_plain(value.item())
    raise TypeError(f"Cannot serialize value of type {type(value).__name__}")


def _format_float(value: float) -> str:
    text = f"{value:.{settings.FLOAT_DIGITS}g}"
    return text if "." in text or "e" in text else text + ".0"


def _emit(value: Any, depth: int) -> str:
    pad, inner = "  " * depth, "  " * (depth + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_emit(value[k], depth + 1)}" for k in sorted(value)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        items = [inner + _emit(v, depth + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(value, float):
        return _format_float(value)
    return json.dumps(value)


def canonical_json(data: Any) -> str:
    """Byte-stable JSON: sorted keys, two-space indentation, floats at FLOAT_DIGITS significant digits."""
    return _emit(to_plain(data), 0) + "\n"


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{settings.FLOAT_DIGITS}g}"
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


class RunStore:
    """File-backed store for the artifacts of one run directory."""

    def __init__(self, root: Optional[str] = None):
        self.root = Path(root) if root else None

    def configure(self, root: str) -> "RunStore":
        """Point the store at a run directory, creating it if needed."""
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"Error creating run directory {self.root}: {str(e)}")
            raise StorageError(f"cannot create run directory: {e}", str(self.root)) from e
        return self

    def path_for(self, name: str) -> Path:
        """Path of an artifact inside the run directory."""
        if self.root is None:
            raise StorageError("run store is not configured", name)
        return self.root / name

    def write_json(self, name: str, data: Any) -> Path:
        """
        Write canonical JSON.

        Args:
            name: File name inside the run directory
            data: Pydantic model or plain data

        Returns:
            Path written
        """
        return self.write_text(name, canonical_json(data))

    def read_json(self, name: str) -> Dict[str, Any]:
        return json.loads(self.read_text(name))

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """Write a CSV with a header row; floats use FLOAT_DIGITS significant digits."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
        return self.write_text(name, buffer.getvalue())

    def read_csv(self, name: str) -> List[Dict[str, str]]:
        return list(csv.DictReader(io.StringIO(self.read_text(name))))

    def write_text(self, name: str, text: str) -> Path:
        path = self.path_for(name)
        try:
            self._write_atomic(path, text)
        except OSError as e:
            logger.error(f"Error writing {path}: {str(e)}")
            raise StorageError(f"cannot write artifact: {e}", str(path)) from e
        logger.debug(f"Wrote {path}")
        return path

    def read_text(self, name: str) -> str:
        path = self.path_for(name)
        try:
            return self._read(path)
        except OSError as e:
            logger.error(f"Error reading {path}: {str(e)}")
            raise StorageError(f"cannot read artifact: {e}", str(path)) from e

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.1, min=0.1, max=2),
        retry=retry_if_exception_type(_TRANSIENT),
        reraise=True,
    )
    def _write_atomic(self, path: Path, text: str) -> None:
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.1, min=0.1, max=2),
        retry=retry_if_exception_type(_TRANSIENT),
        reraise=True,
    )
    def _read(self, path: Path) -> str:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return fh.read()


# Global run store, pointed at the run directory by the CLI
run_store = RunStore()
