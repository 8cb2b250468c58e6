"""Exception hierarchy shared by all modules.

The command line maps these onto exit codes, so every failure that can
escape a library call belongs to exactly one of the families below.
"""

from __future__ import annotations


class NearlyTuError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(NearlyTuError, ValueError):
    """Input does not satisfy a declared precondition or invariant."""


class DimensionError(ValidationError):
    """Matrix and vector shapes do not agree."""


class InfiniteBoundError(ValidationError):
    """A solver-core routine received an infinite variable bound."""


class InfeasibleError(NearlyTuError):
    """A polytope that was required to be nonempty is empty."""


class CapExceeded(NearlyTuError):
    """A brute-force enumeration would exceed its configured cap."""

    def __init__(self, what: str, size: int, cap: int) -> None:
        super().__init__(f"{what}: size {size} exceeds cap {cap}")
        self.what = what
        self.size = size
        self.cap = cap


class InvariantBreach(NearlyTuError, AssertionError):
    """An internal self-check failed; indicates a bug, never bad input."""


def check(condition: bool, message: str) -> None:
    """Raise :class:`InvariantBreach` unless ``condition`` holds."""
    if not condition:
        raise InvariantBreach(message)
