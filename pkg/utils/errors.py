"""
Error types shared by every module of the toolkit.

All of them are ValueErrors so callers that only care about "bad input"
can keep catching ValueError.
"""


class InvalidArgumentError(ValueError):
    """An argument has the wrong value or shape (NaN, out of range, empty)."""


class DomainError(ValueError):
    """A closed-form formula is evaluated outside its mathematical domain."""


class BracketError(ValueError):
    """A root finder was given an interval without a sign change."""


class FixedPointNotFoundError(BracketError):
    """The curve never crosses the diagonal on [0, 1]."""
