"""
bisimagg error categories.
Core functions raise these; validate()-style helpers report lists instead.
"""

from typing import Optional


class BisimError(Exception):
    """Base class for every error raised by bisimagg."""


class MdpFormatError(BisimError):
    """A document could not be parsed (bad JSON, missing field, wrong version)."""


class DimensionError(BisimError, ValueError):
    """Array shapes disagree with n_states / the action count."""


class MdpValidationError(BisimError):
    """An MDP parsed fine but breaks a model invariant."""

    def __init__(self, violations: list, message: Optional[str] = None):
        self.violations = list(violations)
        if message is None:
            head = "; ".join(self.violations[:5])
            more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
            message = f"MDP failed validation: {head}{more}"
        super().__init__(message)


class PreconditionError(BisimError, ValueError):
    """Parameters outside the range an operation is defined for."""


class IterationCapError(BisimError):
    """An iterative procedure hit its caller-visible cap before converging."""

    def __init__(self, message: str, iterations: int):
        self.iterations = iterations
        super().__init__(message)


class CertificateError(BisimError):
    """A result failed its own optimality certificate or a proven bound."""
