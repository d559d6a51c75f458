"""
Experiment Routes Module.

This module contains the CLI subcommands that run an experiment config:
steady, spectrum, speedmap, slow-motion, simulate and sweep.
"""

import argparse
import os
from pathlib import Path
from typing import Optional

from mfront.core.errors import EXIT_OK, ConfigError
from mfront.core.experiment_service import ExperimentService
from mfront.core.store import RunStore
from mfront.middleware.context import RunContext
from mfront.models.config import ExperimentConfig
from mfront.utils.logger import get_logger

logger = get_logger()

EXPERIMENT_KINDS = ("steady", "spectrum", "speedmap", "slow-motion", "simulate", "sweep")
DEFAULT_OUTPUT_ROOT = "mfront-out"


def add_output_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="Output directory (overrides output_dir of the config)")
    parser.add_argument(
        "--jobs",
        type=int,
        default=os.cpu_count() or 1,
        help="Worker processes for epsilon lists (default: logical cores)",
    )


def register(subparsers) -> None:
    """
    Register one subcommand per experiment kind.

    Args:
        subparsers: The subparsers action of the root parser
    """
    for kind in EXPERIMENT_KINDS:
        parser = subparsers.add_parser(kind, help=f"Run a '{kind}' experiment config")
        parser.add_argument("--config", required=True, help="Path to the JSON experiment config")
        add_output_options(parser)
        parser.set_defaults(handler=run_config_command, kind=kind)


def load_config(path: str, kind: str) -> ExperimentConfig:
    """
    Read and validate a JSON experiment config.

    Args:
        path: Config file path
        kind: Experiment kind the subcommand expects

    Returns:
        ExperimentConfig: The validated config

    Raises:
        ConfigError: If the file is missing or holds another experiment kind
        pydantic.ValidationError: If the document does not match the schema
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"Config file not found: {config_path}")
    config = ExperimentConfig.model_validate_json(config_path.read_text(encoding="utf-8"))
    if config.experiment.kind != kind:
        raise ConfigError(
            f"experiment.kind: config holds a '{config.experiment.kind}' experiment, "
            f"but the '{kind}' subcommand was invoked"
        )
    return config


def execute_config(
    config: ExperimentConfig,
    context: RunContext,
    out: Optional[str],
    jobs: int,
    default_name: str,
) -> int:
    """
    Run a validated config into its output directory.

    On failure the error is recorded next to the partial outputs and the
    directory is renamed with the "_partial" suffix before re-raising.

    Returns:
        int: EXIT_OK

    Raises:
        MfrontError: Propagated from the experiment
    """
    if jobs < 1:
        raise ConfigError(f"--jobs must be at least 1, got {jobs}")
    root = Path(out or config.output_dir or os.path.join(DEFAULT_OUTPUT_ROOT, default_name))
    store = RunStore(root)
    try:
        ExperimentService.run(config, store, context, jobs=jobs)
    except Exception as e:
        logger.error(
            f"Error processing experiment: {str(e)}",
            extra={"kind": config.experiment.kind, "error": str(e), "output_dir": str(root)},
        )
        store.write_json(
            "error.json",
            {"run_id": context.run_id, "error": str(e), "type": type(e).__name__, "wall_time": context.elapsed},
        )
        store.abandon()
        raise
    logger.info("Outputs written", extra={"output_dir": str(store.root), "files": len(store.written)})
    return EXIT_OK


def run_config_command(args: argparse.Namespace, context: RunContext) -> int:
    config = load_config(args.config, args.kind)
    return execute_config(config, context, args.out, args.jobs, args.kind)
