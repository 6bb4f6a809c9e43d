"""Exception hierarchy and plain-text error formatting for hopfduet."""

from typing import Optional, Tuple

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class HopfDuetError(Exception):
    """Base class for all hopfduet errors."""


class DomainError(HopfDuetError, ValueError):
    """Input outside the mathematical domain of an operation."""


class SingularChartError(DomainError):
    """Coordinate chart evaluated where it is singular."""


class NotAdmissibleError(DomainError):
    """Oscillating branch does not exist at these parameters."""


class SupercriticalityLostError(DomainError):
    """Restricted cubic coefficient is no longer negative."""


class NotApplicableError(DomainError):
    """Closed-form formula used outside its preconditions."""


class NotInHopfRegimeError(HopfDuetError):
    """Linearization has no oscillatory eigenvalue pair."""


class DegenerateBasisError(HopfDuetError):
    """Eigenbasis is defective or cannot be normalized."""


class SmallDivisorError(HopfDuetError):
    """Homological divisor below the configured floor."""

    def __init__(self, msg: str, index: Optional[Tuple[int, int, int]] = None):
        super().__init__(msg)
        self.index = index


class IntegrationError(HopfDuetError):
    """Numerical integration failed."""


class ConvergenceError(HopfDuetError):
    """Newton iteration did not converge."""


class NoOscillationError(HopfDuetError):
    """Signal amplitude below the detection floor."""


class ConfigError(HopfDuetError):
    """Run configuration failed validation."""


def error(msg: str, code: str = "ERROR") -> str:
    """Format an error for plain-text surfaces (stderr, tool results)."""
    text = "" if msg is None else str(msg)
    return f"Error ({code}): {text}"


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, HopfDuetError):
        return EXIT_RUNTIME
    return EXIT_UNEXPECTED
