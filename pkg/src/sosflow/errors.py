"""Exception types shared across the solver modules."""

from __future__ import annotations


class SosflowError(Exception):
    """Base class for all solver errors."""


class NonMonotone(SosflowError):
    """A height profile has a non-positive slope somewhere."""


class NotNormalized(SosflowError):
    """A log-slope field does not integrate back to one unit of rise."""


class InfeasibleStart(SosflowError):
    """Initial state has infinite objective or violates the BV ball."""


class NoDecrease(SosflowError):
    """The proximal step could not decrease the objective after all back-offs.

    Carries the partial trajectory computed so far (may be None when raised
    from a single step).
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class BlowUp(SosflowError):
    """Explicit oracle left its validity window (slope bounds violated).

    Carries the partial trajectory computed so far.
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepCollision(SosflowError):
    """Two step positions collided (gap dropped to or below zero)."""


class MonotonicityLost(SosflowError):
    """A test perturbation was large enough to destroy monotonicity."""


class InfeasibleProbe(SosflowError):
    """A probe state handed to a diagnostic is outside the feasible set."""


class ParseError(SosflowError):
    """Malformed config text; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(SosflowError):
    """A config key failed validation; carries the key name."""

    def __init__(self, message: str, key: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class CheckFailure(SosflowError):
    """An invariant check over a finished run directory failed."""
