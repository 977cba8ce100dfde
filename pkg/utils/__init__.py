"""
Shared numerics, errors, random streams and CSV I/O.
"""

from .errors import InvalidArgumentError, DomainError, BracketError, FixedPointNotFoundError
from .rng import RngSeed, make_rng

__all__ = [
    'InvalidArgumentError',
    'DomainError',
    'BracketError',
    'FixedPointNotFoundError',
    'RngSeed',
    'make_rng'
]
