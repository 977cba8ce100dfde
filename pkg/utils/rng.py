"""
Seeded random streams.

Every random draw in the toolkit comes from a Philox (counter-based) generator
addressed by (seed, stream). Two different streams never share state, so work
split across threads by stream reproduces a sequential run exactly.
"""

from dataclasses import dataclass

import numpy as np

from utils.errors import InvalidArgumentError

UINT64_MAX = 2**64 - 1

# Fixed stream ids so the samplers, the trainer and the simulator never collide
STREAM_BATCH_PLAN = 1
STREAM_TRAIN_NOISE = 2
STREAM_DATASET = 3
STREAM_SPLIT = 4
STREAM_SIMULATION = 1 << 32


@dataclass(frozen=True)
class RngSeed:
    """(seed, stream) address of a random stream"""
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ('seed', 'stream'):
            value = getattr(self, name)
            if not (0 <= value <= UINT64_MAX):
                raise InvalidArgumentError(
                    f"{name} must be an unsigned 64-bit integer, got {value}"
                )

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, offset: int) -> 'RngSeed':
        """Stream `offset` positions after this one (same seed)."""
        return RngSeed(self.seed, self.stream + offset)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Shorthand for RngSeed(seed, stream).generator()."""
    return RngSeed(seed, stream).generator()
