"""Exception hierarchy.

Anything raised because a mathematical hypothesis fails (no sign change, no
crossing, a non-positive operator) derives from :class:`SolverError`; the
command line maps those to exit status 1.  Configuration and expression
problems derive from :class:`ConfigError` and map to exit status 2.
"""
from __future__ import annotations


class SteadyStateError(Exception):
    """Base class for every error raised by this package."""

    def report(self) -> dict:
        out = {"error": type(self).__name__, "message": str(self)}
        out.update(getattr(self, "details", {}) or {})
        return out


class SolverError(SteadyStateError):
    """A numerical or mathematical precondition does not hold."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class NoBracket(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class NotMetzler(SolverError):
    pass


class GridMisaligned(SolverError):
    pass


class ResolventConditionViolated(SolverError):
    pass


class HypothesisViolated(SolverError):
    pass


class NoCrossing(SolverError):
    pass


class NoOuterSignChange(SolverError):
    pass


class BadOrigin(SolverError):
    pass


class DegenerateEnvironment(SolverError):
    pass


class NotParallel(SolverError):
    pass


class StrictPositivityFailure(SolverError):
    pass


class ConfigError(SteadyStateError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, position: int, expected: str = ""):
        super().__init__(f"{message} at position {position}")
        self.reason = message
        self.position = position
        self.expected = expected
        self.details = {"position": position, "expected": expected}


class UnboundVariable(ConfigError):
    pass


class DomainError(SteadyStateError):
    """Rate expression evaluated outside its domain (log of x <= 0, x/0)."""


class VerificationFailed(SolverError):
    """A stored steady state does not satisfy its equations to tolerance."""
