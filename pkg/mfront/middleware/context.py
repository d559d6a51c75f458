"""
Run Context Module.

This module provides the run-scoped context every CLI command executes in:
a unique run ID shared by all log records, and the start/finish bookkeeping.
"""

import time
import uuid
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator, Optional
from mfront.utils.logger import get_logger

run_id_context: ContextVar[str] = ContextVar("run_id", default="")
logger = get_logger()


class RunContext:
    """
    Bookkeeping for one command invocation.

    Attributes:
        run_id (str): Unique identifier of the run
        command (str): The subcommand being executed
        started (float): Monotonic start time
    """

    def __init__(self, command: str, run_id: Optional[str] = None):
        self.run_id = run_id or str(uuid.uuid4())
        self.command = command
        self.started = time.perf_counter()

    @property
    def elapsed(self) -> float:
        """Wall time in seconds since the run started."""
        return time.perf_counter() - self.started


@contextmanager
def run_context(command: str, run_id: Optional[str] = None) -> Iterator[RunContext]:
    """
    Execute a block inside a run context.

    Args:
        command: The subcommand name
        run_id: Reuse an existing run ID (worker processes of a sweep)

    Yields:
        RunContext: The active context
    """
    context = RunContext(command, run_id)
    token = run_id_context.set(context.run_id)

    logger.info(
        f"Processing run: {command}",
        extra={"run_id": context.run_id, "command": command}
    )

    try:
        yield context
    finally:
        logger.info(
            f"Finished run: {command}",
            extra={"run_id": context.run_id, "command": command, "wall_time": context.elapsed}
        )
        run_id_context.reset(token)


def get_run_id() -> str:
    """
    Get the current run ID from context.

    Returns:
        str: The current run ID or empty string outside of a run
    """
    return run_id_context.get()
