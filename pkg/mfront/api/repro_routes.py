"""
Repro Routes Module.

This module contains the `repro` subcommand, which runs one of the canned
reproductions.
"""

import argparse

from mfront.api.experiment_routes import add_output_options, execute_config
from mfront.core.errors import EXIT_OK, ConfigError
from mfront.core.presets import PRESET_DOCS, get_preset
from mfront.middleware.context import RunContext
from mfront.utils.logger import get_logger

logger = get_logger()


def register(subparsers) -> None:
    parser = subparsers.add_parser("repro", help="Run a canned reproduction")
    parser.add_argument("--preset", choices=sorted(PRESET_DOCS), help="Preset to run")
    parser.add_argument("--list", action="store_true", help="List the presets and exit")
    add_output_options(parser)
    parser.set_defaults(handler=run_preset)


def run_preset(args: argparse.Namespace, context: RunContext) -> int:
    """
    Run the preset named by --preset, or list the presets.

    Raises:
        ConfigError: If neither --preset nor --list is given
    """
    if args.list:
        for name in sorted(PRESET_DOCS):
            print(f"{name}: {PRESET_DOCS[name]}")
        return EXIT_OK
    if args.preset is None:
        raise ConfigError("repro needs --preset NAME (see --list)")
    logger.info("Running preset", extra={"preset": args.preset})
    return execute_config(get_preset(args.preset), context, args.out, args.jobs, f"repro-{args.preset}")
