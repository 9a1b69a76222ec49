"""Exception hierarchy shared by the engine modules."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(EngineError):
    """Mathematically invalid input data (bad curve point, broken cocycle, ...)."""


class SupportError(ValidationError):
    """A denominator or divisor touches a point that is not marked."""


class MembershipError(ValidationError):
    """An element does not lie in the space it was claimed to lie in."""


class SectionInstabilityError(EngineError):
    """A section-space basis failed to stabilize under spanning-set doubling."""


class ScenarioError(EngineError):
    """Scenario text could not be parsed or refers to undefined objects."""


class InternalError(EngineError):
    """An internal invariant failed; indicates a bug, not bad input."""
