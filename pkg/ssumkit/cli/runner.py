"""
Command-line runner for ssumkit.

    ssumkit run <config> [--out DIR] [--seed N] [--threads N]
    ssumkit check <config> [--out DIR] [--seed N] [--threads N] [--skip-runs]

Exit codes: 0 success, 1 configuration error, 2 property failure,
3 runtime error.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv

from ssumkit.config import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_PROPERTY_FAILURE,
    EXIT_RUNTIME_ERROR,
    LOG_DIR,
    LOG_FILE,
    LOG_FORMAT,
    PROJECT_ROOT,
    VERSION,
    ensure_directories,
    get_log_level,
)
from ssumkit.errors import ConfigError, SSUMError
from ssumkit.experiments.config_loader import load_config
from ssumkit.experiments.property_suite import PROPERTIES_FILE, property_suite
from ssumkit.experiments.runner import run_and_emit
from ssumkit.models.experiment import ExperimentConfig

logger = logging.getLogger(__name__)


def setup_logging() -> None:
    """Log to the log file and to stdout."""
    ensure_directories()
    logging.basicConfig(
        level=get_log_level(),
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(LOG_DIR / LOG_FILE),
            logging.StreamHandler(sys.stdout),
        ],
    )


def load_environment(env_path: Optional[Path] = None) -> Optional[Path]:
    """
    Load a .env file, the one in the project root by default.

    Variables already set in the process environment win.

    Returns:
        The loaded path, or None when there is no such file
    """
    env_path = env_path or PROJECT_ROOT / ".env"
    if not env_path.exists():
        return None
    load_dotenv(env_path)
    return env_path


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _threads(value: str) -> int:
    threads = int(value)
    if threads < 1:
        raise argparse.ArgumentTypeError("threads must be at least 1")
    return threads


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssumkit",
        description="Stochastic successive upper-bound minimization experiments",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "run an experiment and write results, plot data and manifest"),
        ("check", "run the property suite and report pass/fail with margins"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", type=Path, help="TOML experiment configuration")
        cmd.add_argument("--out", type=Path, help="output directory override")
        cmd.add_argument("--seed", type=_seed, help="master seed override")
        cmd.add_argument("--threads", type=_threads, help="worker threads")
        if name == "check":
            cmd.add_argument(
                "--skip-runs",
                action="store_true",
                help="skip the multi-seed stochastic WMMSE runs",
            )
    return parser


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace):
    """Apply --out, --seed and --threads on top of the file configuration."""
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    return replace(config, **overrides) if overrides else config


def cmd_run(config: ExperimentConfig) -> int:
    table, paths = run_and_emit(config)
    count = len(paths) + 1
    print(f"Experiment '{config.name}' wrote {count} files to {config.output_dir}")
    for method in table.methods:
        final = table.final(method)
        print(
            f"  {method:<20} r={final.iteration:<6} "
            f"value={final.value:.6f} +/- {final.stderr:.6f}"
        )
    return EXIT_OK


def cmd_check(config: ExperimentConfig, skip_runs: bool) -> int:
    report = property_suite(config, include_runs=not skip_runs)
    path = report.write_csv(Path(config.output_dir) / PROPERTIES_FILE)
    print(report.format())
    print(f"Report written to {path}")
    return EXIT_OK if report.passed else EXIT_PROPERTY_FAILURE


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    env_path = load_environment()
    setup_logging()
    if env_path is not None:
        logger.info(f"Loaded environment from {env_path}")
    try:
        config = apply_overrides(load_config(args.config), args)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        if args.command == "run":
            return cmd_run(config)
        return cmd_check(config, args.skip_runs)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except KeyboardInterrupt:
        logger.info("Received keyboard interrupt, shutting down...")
        return EXIT_RUNTIME_ERROR
    except SSUMError as e:
        logger.error(f"Run failed: {e}", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    except Exception as e:
        logger.critical(f"Unexpected error: {e}", exc_info=True)
        print(f"Unexpected error: {e}", file=sys.stderr)
        print(f"Check {LOG_DIR / LOG_FILE} for more details.", file=sys.stderr)
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
