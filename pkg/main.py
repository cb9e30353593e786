"""
Cohort Simulation Command Line

Fit virtual baseline generators, generate cohorts, run the generic-switch
scenario and analyze simulated data. Each subcommand is driven by one JSON run
config. Diagnostics go to stderr; stdout carries a single JSON summary line.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any

from config.schema import apply_overrides, load_run_config
from config.settings import DEFAULT_LOG_LEVEL, LOG_ENV_VAR, RNG_NAME
from data.models.unified import CommandResult, create_default_command_result
from data.pipeline import cmd_analyze, cmd_fit, cmd_generate, cmd_simulate, exit_code_for
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

COMMANDS = {
    "fit": cmd_fit,
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortsim",
        description="Virtual cohort generation and generic-switch scenario simulation.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        sub = subparsers.add_parser(name, help=(command.__doc__ or "").strip())
        sub.add_argument("--config", required=True, metavar="PATH", help="JSON run config")
        sub.add_argument("--seed", type=int, metavar="N", help="master seed (overrides config)")
        sub.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
        sub.add_argument("--threads", type=int, metavar="N", help="worker threads")
    return parser


def configure_logging() -> None:
    """Log to stderr at the level named by the environment."""
    level_name = os.environ.get(LOG_ENV_VAR, DEFAULT_LOG_LEVEL).upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = getattr(logging, DEFAULT_LOG_LEVEL)
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def summary_line(result: CommandResult) -> str:
    """The JSON summary printed on stdout (stage bookkeeping left out)."""
    payload: dict[str, Any] = {
        key: value for key, value in result.items() if key != "pipeline_state"
    }
    return json.dumps(payload, sort_keys=True, default=str)


def run(command: str, args: argparse.Namespace) -> CommandResult:
    try:
        document = load_run_config(args.config)
    except ConfigError as e:
        result = create_default_command_result(command)
        result.update(
            exit_code=exit_code_for(e),
            rng=RNG_NAME,
            errors=[f"ConfigError: {e}"],
        )
        logger.error(f"❌ {e}")
        return result
    document = apply_overrides(document, args.seed, args.out, args.threads)
    return COMMANDS[command](document)


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    configure_logging()
    logger.info(f"Starting '{args.command}' with {args.config}")

    result = run(args.command, args)
    for message in result.get("diagnostics", []):
        logger.warning(f"⚠️ {message}")
    for message in result.get("errors", []):
        logger.error(f"❌ {message}")

    print(summary_line(result), flush=True)
    return int(result["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
