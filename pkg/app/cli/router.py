import argparse
import logging
import sys
import time
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from app.cli.commands import classify, limits, report, simulate, verify
from app.cli.config_loader import dump_config, parse_config
from app.core.errors import (
    AssumptionViolation,
    ConfigError,
    DomainError,
    ModelValidationError,
    StorageError,
)
from app.core.rng import StreamTag
from app.core.storage import run_store
from app.repositories.report_repository import ReportRepository
from app.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_ACCEPTANCE = 4

CONFIG_ECHO = "run_config.txt"
DERIVED_CONFIG_ECHO = "report_config.txt"
# Keys that never change results; kept out of report.json so its bytes match across them
EXECUTION_KEYS = {"workers", "out", "log_level"}

COMMANDS = {
    "simulate": simulate,
    "classify": classify,
    "limits": limits,
    "verify": verify,
    "report": report,
}

_VALIDATION_ERRORS = (ConfigError, ModelValidationError, AssumptionViolation, DomainError)


def _s_grid(raw: str) -> List[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"s grid must be comma-separated numbers, got {raw!r}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="Flat key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a dotted config key")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--replicates", type=int, default=None)
    parser.add_argument("--generations", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", type=str, default=None, help="Run directory")
    parser.add_argument("--log-level", type=str.upper, default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--model", type=str, default=None, choices=["sibuya", "finite_mixture"])
    parser.add_argument("--alpha-min", type=float, default=None)
    parser.add_argument("--alpha-max", type=float, default=None)
    parser.add_argument("--s-grid", type=_s_grid, default=None, help="Comma-separated positive points")
    parser.add_argument("--relax-assumptions", action="store_true", default=None)
    parser.add_argument("--exact-budget", type=int, default=None)
    parser.add_argument("--asymptotic", action=argparse.BooleanOptionalAction, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Simulation and verification toolkit for heavy-tailed branching processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="Simulate trajectories and martingale paths")
    _add_common(p_sim)

    p_cls = sub.add_parser("classify", help="Classify points and processes as regular or irregular")
    _add_common(p_cls)
    p_cls.add_argument("--n-max", type=int, default=None, help="Depth of the regularity classifier")

    p_lim = sub.add_parser("limits", help="Monte Carlo checks of the limit theorems")
    _add_common(p_lim)
    p_lim.add_argument("--profile-n", type=int, default=None, help="Depth of the H and alpha-ratio profiles")

    p_ver = sub.add_parser("verify", help="Run the acceptance suite")
    _add_common(p_ver)
    p_ver.add_argument("--criteria", type=lambda raw: [c.strip() for c in raw.split(",") if c.strip()], default=None)

    p_rep = sub.add_parser("report", help="Re-derive report.json from a previous limits run")
    _add_common(p_rep)
    p_rep.add_argument("--source", type=str, default=None, help="Run directory holding samples.csv")
    return parser


def write_report(config: RunConfig, result: Any, complete: bool = True) -> None:
    """
    Write report.json; the config and seed are embedded so the report reproduces itself.

    Args:
        config: Effective run config
        result: Pydantic model or plain data of the command
        complete: False marks a partial run
    """
    ReportRepository.save_report(
        {
            "command": config.command,
            "complete": complete,
            "config": config.model_dump(mode="json", exclude=EXECUTION_KEYS),
            "seed": config.seed,
            "result": result,
        }
    )


def dispatch(config: RunConfig) -> int:
    """
    Run the command of a validated config and write its artifacts.

    Returns:
        Exit status: 0 ok, 2 validation error, 3 runtime failure, 4 acceptance failure
    """
    started_at = datetime.now(timezone.utc).isoformat()
    start = time.perf_counter()
    status, error = EXIT_RUNTIME, None
    try:
        run_store.configure(config.out)
        echo = DERIVED_CONFIG_ECHO if config.command == "report" else CONFIG_ECHO
        run_store.write_text(echo, dump_config(config))
        result, complete, passed = COMMANDS[config.command].run(config)
        write_report(config, result, complete)
        status = EXIT_OK if passed else EXIT_ACCEPTANCE
    except _VALIDATION_ERRORS as e:
        logger.error(f"Error validating {config.command} run: {str(e)}")
        status, error = EXIT_CONFIG, str(e)
    except Exception as e:
        logger.error(f"Error running {config.command}: {str(e)}")
        status, error = EXIT_RUNTIME, str(e)
    if error is not None and run_store.root is not None:
        try:
            write_report(config, {"error": error}, complete=False)
        except StorageError as e:
            logger.error(f"Error writing partial report: {str(e)}")

    record: Dict[str, Any] = {
        "command": config.command,
        "config": config.model_dump(mode="json"),
        "seed": config.seed,
        "status": status,
        "complete": status in (EXIT_OK, EXIT_ACCEPTANCE),
        "error": error,
        "started_at": started_at,
        "wall_clock_seconds": time.perf_counter() - start,
        "streams": {
            "base_seed": config.seed,
            "tags": {tag.name.lower(): int(tag) for tag in StreamTag},
            "environment_replicates": config.replicates,
        },
    }
    try:
        ReportRepository.save_run_record(record)
    except StorageError as e:
        logger.error(f"Error writing run record: {str(e)}")
        status = EXIT_RUNTIME
    logger.info(f"{config.command} finished with status {status}")
    return status


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = parse_config(args.command, args.config, vars(args), args.set)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    logging.getLogger().setLevel(config.log_level)
    return dispatch(config)
