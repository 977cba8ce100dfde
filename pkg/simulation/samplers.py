"""
Batch Samplers
Per-round index sets for one epoch of DP-SGD.

- poisson: every record joins every round independently with probability q
- shuffle: one uniform permutation cut into M consecutive blocks of
  b = floor(N/M) indices; the last N mod M permuted indices are discarded
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

SCHEMES = ('poisson', 'shuffle')


@dataclass
class BatchPlan:
    """Ordered per-round index sets over range(N)"""
    rounds: List[np.ndarray]  # Sorted int64 arrays, one per round
    scheme: str  # 'poisson' | 'shuffle'
    N: int
    M: int
    q: Optional[float] = None  # Poisson inclusion probability
    discarded: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"Unknown sampling scheme '{self.scheme}'")
        if len(self.rounds) != self.M:
            raise InvalidArgumentError(
                f"Plan has {len(self.rounds)} rounds, expected M={self.M}"
            )

    @property
    def batch_size(self) -> int:
        """b = floor(N/M) for shuffle plans; rounded expected size qN for Poisson."""
        if self.scheme == 'shuffle':
            return self.N // self.M
        return int(round(self.q * self.N))

    @property
    def normalizer(self) -> float:
        """Divisor of the summed batch gradient: b for shuffle, qN for Poisson."""
        if self.scheme == 'shuffle':
            return float(self.N // self.M)
        return self.q * self.N

    def sizes(self) -> np.ndarray:
        return np.array([len(r) for r in self.rounds], dtype=np.int64)

    def membership(self, index: int) -> np.ndarray:
        """Boolean vector over rounds: does `index` belong to round j."""
        return np.array([bool(np.isin(index, r)) for r in self.rounds], dtype=bool)

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns round, index."""
        sizes = self.sizes()
        return pd.DataFrame({
            'round': np.repeat(np.arange(self.M, dtype=np.int64), sizes),
            'index': np.concatenate(self.rounds) if self.M else np.empty(0, dtype=np.int64),
        })


def poisson_sample(N: int, q: float, M: int, rng: np.random.Generator) -> BatchPlan:
    """
    Poisson subsampling over M rounds.

    Args:
        N: Dataset size (>= 1)
        q: Inclusion probability in (0, 1)
        M: Number of rounds (>= 1)
        rng: Generator driving every inclusion draw

    Returns:
        BatchPlan with independent rounds
    """
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    if M < 1:
        raise InvalidArgumentError(f"M must be >= 1, got {M}")
    if not (0.0 < q < 1.0):
        raise InvalidArgumentError(f"q must be in (0, 1), got {q}")

    rounds = [np.flatnonzero(rng.random(N) < q).astype(np.int64) for _ in range(M)]
    logger.debug(f"Poisson plan: N={N}, q={q}, M={M}, mean size {np.mean([len(r) for r in rounds]):.2f}")
    return BatchPlan(rounds=rounds, scheme='poisson', N=N, M=M, q=q)


def shuffle_sample(N: int, M: int, rng: np.random.Generator) -> BatchPlan:
    """Random shuffling: M disjoint blocks of floor(N/M) from one uniform permutation."""
    if M < 1:
        raise InvalidArgumentError(f"M must be >= 1, got {M}")
    if M > N:
        raise InvalidArgumentError(f"M must not exceed N, got M={M}, N={N}")

    # Generator.permutation is an unbiased Fisher-Yates shuffle
    permutation = rng.permutation(N).astype(np.int64)
    b = N // M
    rounds = [np.sort(permutation[j * b:(j + 1) * b]) for j in range(M)]
    discarded = np.sort(permutation[M * b:])

    logger.debug(f"Shuffle plan: N={N}, M={M}, b={b}, discarded {len(discarded)}")
    return BatchPlan(rounds=rounds, scheme='shuffle', N=N, M=M, discarded=discarded)
