"""
Error Hierarchy Module.

Every failure the laboratory raises on purpose derives from MfrontError and
carries the process exit code the CLI maps it to.
"""

from typing import Any, Optional

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class MfrontError(Exception):
    """Base class for all laboratory errors."""

    exit_code = EXIT_NUMERICAL


class ValidationFailure(MfrontError):
    """Input, domain or hypothesis problems (exit 2)."""

    exit_code = EXIT_VALIDATION


class ConfigError(ValidationFailure):
    """Malformed or inconsistent experiment configuration."""


class DomainError(ValidationFailure):
    """An abscissa or interface parameter outside its admissible range."""


class HypothesisError(ValidationFailure):
    """A structural hypothesis of the problem does not hold."""

    def __init__(self, message: str, report: Optional[Any] = None):
        super().__init__(message)
        self.report = report


class MonotonicityError(ValidationFailure):
    """A reduced trajectory was asked to cross the equilibrium."""


class ExtractionError(ValidationFailure):
    """The interface of a profile cannot be located."""


class TransversalityError(ValidationFailure):
    """The adjoint eigenfunction is orthogonal to the family tangent."""


class NumericalFailure(MfrontError):
    """Solver failures (exit 3)."""

    exit_code = EXIT_NUMERICAL


class ConvergenceError(NumericalFailure):
    """An iterative procedure did not converge or could not be bracketed."""


class AccuracyError(NumericalFailure):
    """A result misses its accuracy guard; usually the grid is too coarse."""


class TransformConsistencyError(NumericalFailure):
    """The similarity-transformed eigenpair is not an eigenpair of L."""


class BlowUpError(NumericalFailure):
    """The time integration produced non-finite values."""

    def __init__(self, message: str, last_state: Optional[Any] = None):
        super().__init__(message)
        self.last_state = last_state


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to a CLI exit code.

    Args:
        error: The raised exception

    Returns:
        int: 2 for validation problems, 3 for numerical ones
    """
    from pydantic import ValidationError

    if isinstance(error, ValidationError):
        return EXIT_VALIDATION
    if isinstance(error, MfrontError):
        return error.exit_code
    return EXIT_NUMERICAL
