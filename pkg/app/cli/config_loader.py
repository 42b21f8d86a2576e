import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

from pydantic import ValidationError

from app.core.errors import ConfigError
from app.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_MIN = 0.2
DEFAULT_ALPHA_MAX = 0.7

# CLI flag dest -> dotted config key
FLAG_KEYS = {
    "seed": "seed",
    "replicates": "replicates",
    "generations": "generations",
    "workers": "workers",
    "out": "out",
    "log_level": "log_level",
    "s_grid": "s_grid",
    "source": "source",
    "criteria": "criteria",
    "model": "model.kind",
    "alpha_min": "model.alpha_min",
    "alpha_max": "model.alpha_max",
    "relax_assumptions": "model.relax_assumptions",
    "exact_budget": "simulation.exact_budget",
    "asymptotic": "simulation.asymptotic_enabled",
    "n_max": "regularity.n_max",
    "profile_n": "profile_n",
}


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def read_config_file(path: str) -> List[Tuple[str, Any]]:
    """
    Read a flat `key = value` file; `#` starts a comment, values are JSON or bare strings.

    Raises:
        ConfigError: on a missing file or a malformed line
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"config file not found: {path}")
    pairs = []
    for lineno, line in enumerate(file_path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'", [f"line {lineno}"])
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key", [f"line {lineno}"])
        pairs.append((key, _parse_value(raw)))
    return pairs


def nest(pairs: Iterable[Tuple[str, Any]]) -> Dict[str, Any]:
    """Turn dotted keys into nested dicts; later pairs win."""
    nested: Dict[str, Any] = {}
    for key, value in pairs:
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"key {key!r} nests under a scalar", [key])
            node = child
        node[parts[-1]] = value
    return nested


def flatten(data: Dict[str, Any], prefix: str = "") -> List[Tuple[str, Any]]:
    pairs = []
    for key in sorted(data):
        value = data[key]
        dotted = f"{prefix}{key}"
        if isinstance(value, dict) and value and key != "acceptance":
            pairs.extend(flatten(value, dotted + "."))
        else:
            pairs.append((dotted, value))
    return pairs


def parse_config(
    command: str,
    config_path: Optional[str] = None,
    flags: Optional[Dict[str, Any]] = None,
    overrides: Optional[Iterable[str]] = None,
) -> RunConfig:
    """
    Build the RunConfig of a run: file values, then `--set key=value` overrides, then flags.

    Args:
        command: Subcommand name
        config_path: Optional config file
        flags: Parsed CLI flags by dest name; None values are ignored
        overrides: `key=value` strings

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: carrying the dotted key path of every violation
    """
    pairs: List[Tuple[str, Any]] = []
    if config_path:
        pairs.extend(read_config_file(config_path))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", [item])
        key, raw = (part.strip() for part in item.split("=", 1))
        pairs.append((key, _parse_value(raw)))
    for dest, value in (flags or {}).items():
        if value is not None and dest in FLAG_KEYS:
            pairs.append((FLAG_KEYS[dest], value))
    pairs.append(("command", command))

    nested = nest(pairs)
    model = nested.get("model")
    if isinstance(model, dict) and model.get("kind", "sibuya") == "sibuya":
        model.setdefault("alpha_min", DEFAULT_ALPHA_MIN)
        model.setdefault("alpha_max", DEFAULT_ALPHA_MAX)

    try:
        return RunConfig(**nested)
    except ValidationError as e:
        key_paths = [".".join(str(p) for p in err["loc"]) or "<root>" for err in e.errors()]
        messages = [f"{path}: {err['msg']}" for path, err in zip(key_paths, e.errors())]
        logger.error(f"Error validating run config: {'; '.join(messages)}")
        raise ConfigError("invalid configuration: " + "; ".join(messages), key_paths) from e


def dump_config(config: RunConfig) -> str:
    """The effective config in the file format, one sorted dotted key per line."""
    lines = [f"{key} = {json.dumps(value, sort_keys=True)}" for key, value in flatten(config.model_dump(mode="json"))]
    return "\n".join(lines) + "\n"
