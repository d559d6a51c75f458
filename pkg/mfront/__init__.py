"""
Main CLI module.

This module builds the `mfront` command-line front door and registers all
command groups.
"""

import argparse
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from mfront.core.errors import EXIT_VALIDATION, MfrontError, exit_code_for

__version__ = "1.0.0"


def create_cli() -> argparse.ArgumentParser:
    """
    Create and configure the command-line parser.

    Returns:
        argparse.ArgumentParser: The configured parser
    """
    # Load environment variables before the logger reads MFRONT_LOG
    load_dotenv()

    from mfront.api.experiment_routes import register as register_experiments
    from mfront.api.repro_routes import register as register_repro

    parser = argparse.ArgumentParser(
        prog="mfront",
        description="Metastability lab for viscous conservation laws with a single interior layer",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Register command groups
    register_experiments(subparsers)
    register_repro(subparsers)
    return parser


def format_validation_error(error: ValidationError) -> str:
    """One 'field.path: message' entry per schema violation."""
    parts = []
    for entry in error.errors():
        path = ".".join(str(p) for p in entry["loc"]) or "<root>"
        parts.append(f"{path}: {entry['msg']}")
    return "; ".join(parts)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]

    Returns:
        int: 0 on success, 2 on validation errors, 3 on numerical failures
    """
    parser = create_cli()
    args = parser.parse_args(argv)

    from mfront.middleware.context import run_context
    from mfront.utils.logger import get_logger

    logger = get_logger()
    with run_context(args.command) as context:
        try:
            return args.handler(args, context)
        except ValidationError as e:
            message = format_validation_error(e)
            logger.error(f"Invalid config: {message}", extra={"command": args.command})
            print(f"mfront: invalid config: {message}", file=sys.stderr)
            return EXIT_VALIDATION
        except MfrontError as e:
            logger.error(
                f"Command failed: {str(e)}",
                extra={"command": args.command, "error": type(e).__name__, "exit_code": e.exit_code},
            )
            print(f"mfront: {type(e).__name__}: {e}", file=sys.stderr)
            return e.exit_code
        except Exception as e:
            logger.exception(f"Unexpected error: {str(e)}", extra={"command": args.command})
            print(f"mfront: unexpected error: {e}", file=sys.stderr)
            return exit_code_for(e)
