"""
Toy DP-SGD
One epoch of DP-SGD on a synthetic two-blob classification task, with every
round recorded the way a gradient-observing adversary sees it.

Per round: clip each per-example gradient to norm C, sum, add one
N(0, (C sigma)^2 I) draw, divide by the normalizer (b for shuffle, qN for
Poisson) and step. The last training index is the target record; with
`ghost=True` its gradient is replaced by zero.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from models import logistic_model
from simulation.samplers import BatchPlan, poisson_sample, shuffle_sample
from utils.errors import InvalidArgumentError
from utils.rng import STREAM_BATCH_PLAN, STREAM_DATASET, STREAM_SPLIT, STREAM_TRAIN_NOISE, make_rng

logger = logging.getLogger(__name__)

SAMPLERS = ('shuffle', 'poisson')

DEFAULT_N = 4096
DEFAULT_DIM = 16
DEFAULT_SEPARATION = 2.0
DEFAULT_HOLDOUT = 0.25
CLIP_GRID = (0.1, 0.5, 1.0, 5.0)


@dataclass
class ToyDataset:
    """Features and binary labels of a synthetic task"""
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) in {0, 1}
    separation_distance: float = DEFAULT_SEPARATION
    seed: int = 0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise InvalidArgumentError(
                f"features {self.features.shape} and labels {self.labels.shape} do not match"
            )
        if self.n < 2:
            raise InvalidArgumentError(f"Dataset needs at least 2 examples, got {self.n}")
        if not np.isin(self.labels, (0, 1)).all():
            raise InvalidArgumentError("labels must be 0 or 1")
        if len(np.unique(self.labels)) < 2:
            raise InvalidArgumentError("Dataset must contain both classes")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass
class TrainConfig:
    """One epoch of DP-SGD"""
    batch_size: int = 64
    M: Optional[int] = None  # Rounds; defaults to floor(n_train / batch_size)
    clip: float = 1.0
    sigma: float = 0.0
    learning_rate: float = 0.5
    sampler: str = 'shuffle'  # 'shuffle' | 'poisson'
    seed: int = 0
    ghost: bool = False  # Zero out the target record's gradient
    holdout: float = DEFAULT_HOLDOUT

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise InvalidArgumentError(f"Unknown sampler '{self.sampler}', expected one of {SAMPLERS}")
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.M is not None and self.M < 1:
            raise InvalidArgumentError(f"M must be >= 1, got {self.M}")
        if not (self.clip > 0):
            raise InvalidArgumentError(f"clip must be positive, got {self.clip}")
        if not (self.sigma >= 0) or math.isinf(self.sigma):
            raise InvalidArgumentError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.sigma > 0 and math.isinf(self.clip):
            raise InvalidArgumentError("Noise needs a finite clip (noise std is clip * sigma)")
        if not (self.learning_rate > 0):
            raise InvalidArgumentError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 < self.holdout < 1.0):
            raise InvalidArgumentError(f"holdout must be in (0, 1), got {self.holdout}")

    def rounds(self, n_train: int) -> int:
        """Rounds in the epoch; for shuffle checks b == floor(n_train / M)."""
        M = self.M if self.M is not None else n_train // self.batch_size
        if M < 1:
            raise InvalidArgumentError(
                f"batch_size {self.batch_size} leaves no full round in {n_train} examples"
            )
        if self.sampler == 'shuffle' and n_train // M != self.batch_size:
            raise InvalidArgumentError(
                f"Shuffle batch size must be floor(n/M)={n_train // M}, got {self.batch_size}"
            )
        return M


@dataclass
class RoundRecord:
    """One round as seen by the adversary, plus the hidden noise for checks"""
    round: int
    batch_size: float  # Normalizer |S_j| (shuffle) or qN (Poisson)
    realized_size: int
    update: np.ndarray  # Noisy averaged update G~_j
    partial_sum: np.ndarray  # Clipped sum without the target, G_j^(-)
    membership: bool  # Target in S_j
    noise: np.ndarray  # z_j
    target_gradient: np.ndarray  # Target's clipped gradient at this round's weights


@dataclass
class TrainResult:
    """Output of one training run"""
    weights: np.ndarray
    records: List[RoundRecord]
    accuracy: float  # On the held-out split
    plan: BatchPlan
    sigma: float
    clip: float
    rounds: int = field(init=False)

    def __post_init__(self):
        self.rounds = len(self.records)


def make_synthetic_dataset(
    n: int = DEFAULT_N,
    d: int = DEFAULT_DIM,
    separation_distance: float = DEFAULT_SEPARATION,
    seed: int = 0
) -> ToyDataset:
    """
    Two unit-covariance Gaussian blobs centred at -/+ (separation_distance/2) e_1.

    Labels are balanced (floor(n/2) of class 1) and shuffled.
    """
    if n < 2:
        raise InvalidArgumentError(f"n must be >= 2, got {n}")
    if d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d}")
    if not (separation_distance >= 0) or math.isinf(separation_distance):
        raise InvalidArgumentError(f"separation_distance must be finite and >= 0, got {separation_distance}")

    rng = make_rng(seed, STREAM_DATASET)
    labels = rng.permutation(np.arange(n) % 2).astype(np.int64)
    features = rng.standard_normal((n, d))
    features[:, 0] += (separation_distance / 2.0) * (2.0 * labels - 1.0)
    return ToyDataset(features=features, labels=labels, separation_distance=separation_distance, seed=seed)


def train_size(n: int, holdout: float = DEFAULT_HOLDOUT) -> int:
    """Training examples left after holding out round(holdout * n), at least one each side."""
    if not (0.0 < holdout < 1.0):
        raise InvalidArgumentError(f"holdout must be in (0, 1), got {holdout}")
    n_test = min(max(int(round(holdout * n)), 1), n - 1)
    return n - n_test


def split_dataset(
    dataset: ToyDataset,
    holdout: float = DEFAULT_HOLDOUT,
    seed: int = 0
) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """
    Random (train, test) split with round(holdout * n) test examples.

    Returns:
        ((train_features, train_labels), (test_features, test_labels))
    """
    n_test = dataset.n - train_size(dataset.n, holdout)
    order = make_rng(seed, STREAM_SPLIT).permutation(dataset.n)
    test_idx, train_idx = order[:n_test], order[n_test:]
    return (
        (dataset.features[train_idx], dataset.labels[train_idx]),
        (dataset.features[test_idx], dataset.labels[test_idx]),
    )


def clip_gradients(grads: np.ndarray, C: float) -> np.ndarray:
    """Row-wise g * min(1, C/||g||); every output row has norm <= C."""
    if not (C > 0):
        raise InvalidArgumentError(f"Clip norm must be positive, got {C}")
    grads = np.asarray(grads, dtype=float)
    if grads.ndim != 2:
        raise InvalidArgumentError(f"Expected a (k, d) gradient matrix, got shape {grads.shape}")

    norms = np.linalg.norm(grads, axis=1)
    over = norms > C
    scale = np.where(over, C / np.where(over, norms, 1.0), 1.0)
    clipped = grads * scale[:, None]

    # Rounding can leave a scaled row a few ulps above C
    for _ in range(8):
        over = np.linalg.norm(clipped, axis=1) > C
        if not over.any():
            break
        clipped[over] *= 1.0 - 4.0 * np.finfo(float).eps
    return clipped


def clip_gradient(g: np.ndarray, C: float) -> np.ndarray:
    """Single-vector form of clip_gradients."""
    return clip_gradients(np.atleast_2d(np.asarray(g, dtype=float)), C)[0]


def _noise(d: int, C: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma == 0:
        return np.zeros(d)
    return rng.normal(0.0, C * sigma, size=d)


def _noisy_sum(total: np.ndarray, z: np.ndarray, sigma: float) -> np.ndarray:
    # sigma == 0 leaves the clipped sum untouched, bit for bit
    return total if sigma == 0 else total + z


def noisy_batch_update(
    clipped_grads,
    C: float,
    sigma: float,
    batch_size: float,
    rng: np.random.Generator,
    dim: Optional[int] = None
) -> np.ndarray:
    """
    (sum_i g_i + z) / batch_size with z ~ N(0, (C sigma)^2 I).

    An empty gradient list counts as zero contributions; pass `dim` when it
    cannot be read from an empty (0, d) array.
    """
    if not (sigma >= 0):
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")
    if not (batch_size > 0):
        raise InvalidArgumentError(f"batch_size must be positive, got {batch_size}")
    if sigma > 0 and math.isinf(C):
        raise InvalidArgumentError("Noise needs a finite clip (noise std is C * sigma)")

    grads = np.asarray(clipped_grads, dtype=float)
    if grads.size == 0:
        d = dim if dim is not None else (grads.shape[1] if grads.ndim == 2 else None)
        if d is None:
            raise InvalidArgumentError("Empty gradient list needs an explicit dim")
        grads = np.zeros((0, d))

    z = _noise(grads.shape[1], C, sigma, rng)
    return _noisy_sum(grads.sum(axis=0), z, sigma) / batch_size


def observe_round(
    round_index: int,
    clipped: np.ndarray,
    target_mask: np.ndarray,
    target_gradient: np.ndarray,
    C: float,
    sigma: float,
    normalizer: float,
    rng: np.random.Generator
) -> RoundRecord:
    """
    Noisy update of one round and the adversary's view of it.

    Args:
        round_index: j
        clipped: (k, d) clipped gradients of the batch
        target_mask: (k,) True on the target's row
        target_gradient: Target's clipped gradient (zero for a ghost)
        C: Clip norm
        sigma: Noise multiplier
        normalizer: Divisor of the noisy sum
        rng: Noise stream
    """
    d = clipped.shape[1]
    z = _noise(d, C, sigma, rng)
    total = clipped.sum(axis=0)
    update = _noisy_sum(total, z, sigma) / normalizer
    return RoundRecord(
        round=round_index,
        batch_size=normalizer,
        realized_size=int(clipped.shape[0]),
        update=update,
        partial_sum=clipped[~target_mask].sum(axis=0),
        membership=bool(target_mask.any()),
        noise=z,
        target_gradient=np.asarray(target_gradient, dtype=float),
    )


def reconstruct_contribution(record: RoundRecord) -> np.ndarray:
    """Z_j = |S_j| G~_j - G_j^(-): the target's clipped gradient (if sampled) plus noise."""
    return record.batch_size * record.update - record.partial_sum


def project_contribution(z: np.ndarray, direction: np.ndarray, C: float, sigma: float) -> float:
    """<Z_j, u> / (C sigma) with u the unit vector along `direction`."""
    if not (C > 0 and sigma > 0) or math.isinf(C * sigma):
        raise InvalidArgumentError(f"C * sigma must be positive and finite, got C={C}, sigma={sigma}")
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise InvalidArgumentError("Projection direction must be nonzero")
    return float(np.dot(z, direction / norm) / (C * sigma))


def make_plan(n_train: int, config: TrainConfig) -> BatchPlan:
    M = config.rounds(n_train)
    rng = make_rng(config.seed, STREAM_BATCH_PLAN)
    if config.sampler == 'shuffle':
        return shuffle_sample(n_train, M, rng)
    return poisson_sample(n_train, config.batch_size / n_train, M, rng)


def _sgd_step(weights: np.ndarray, update: np.ndarray, learning_rate: float) -> np.ndarray:
    return weights - learning_rate * update


def train(dataset: ToyDataset, config: TrainConfig) -> TrainResult:
    """
    One epoch of DP-SGD from zero weights.

    Args:
        dataset: Full dataset; split by config.holdout and config.seed
        config: Training configuration

    Returns:
        TrainResult with final weights, every RoundRecord and held-out accuracy
    """
    (x_train, y_train), (x_test, y_test) = split_dataset(dataset, config.holdout, config.seed)
    n_train = len(y_train)
    plan = make_plan(n_train, config)
    normalizer = plan.normalizer
    target = n_train - 1

    noise_rng = make_rng(config.seed, STREAM_TRAIN_NOISE)
    weights = np.zeros(dataset.d)
    records = []

    for j, batch in enumerate(plan.rounds):
        grads = logistic_model.per_example_gradients(weights, x_train[batch], y_train[batch])
        target_mask = batch == target
        if config.ghost:
            grads[target_mask] = 0.0
        clipped = clip_gradients(grads, config.clip)

        if config.ghost:
            target_gradient = np.zeros(dataset.d)
        elif target_mask.any():
            target_gradient = clipped[target_mask][0]
        else:
            target_gradient = clip_gradient(
                logistic_model.per_example_gradients(weights, x_train[target:], y_train[target:])[0],
                config.clip,
            )

        record = observe_round(
            j, clipped, target_mask, target_gradient,
            config.clip, config.sigma, normalizer, noise_rng
        )
        records.append(record)
        weights = _sgd_step(weights, record.update, config.learning_rate)

    test_accuracy = logistic_model.accuracy(weights, x_test, y_test)
    logger.info(
        f"Trained {plan.M} rounds ({config.sampler}, b={config.batch_size}, "
        f"sigma={config.sigma:.4g}, C={config.clip:g}, seed={config.seed}): accuracy {test_accuracy:.4f}"
    )
    return TrainResult(
        weights=weights,
        records=records,
        accuracy=test_accuracy,
        plan=plan,
        sigma=config.sigma,
        clip=config.clip,
    )


def plain_sgd(
    train_split: Tuple[np.ndarray, np.ndarray],
    plan: BatchPlan,
    learning_rate: float
) -> np.ndarray:
    """Unclipped, noiseless mini-batch SGD over `plan` from zero weights."""
    features, labels = train_split
    weights = np.zeros(features.shape[1])
    for batch in plan.rounds:
        grads = logistic_model.per_example_gradients(weights, features[batch], labels[batch])
        weights = _sgd_step(weights, grads.sum(axis=0) / plan.normalizer, learning_rate)
    return weights


def accuracy_gap(dataset: ToyDataset, config: TrainConfig) -> Tuple[float, float]:
    """
    Held-out accuracy without and with noise on the same split and batch plan.

    Returns:
        (accuracy_clean, accuracy_dp)
    """
    clean = train(dataset, replace(config, sigma=0.0))
    private = train(dataset, config)
    return clean.accuracy, private.accuracy


def run_log_frame(records: List[RoundRecord]) -> pd.DataFrame:
    """Table with columns round, batch_size, membership, update_norm, z_norm."""
    return pd.DataFrame({
        'round': [r.round for r in records],
        'batch_size': [r.realized_size for r in records],
        'membership': [int(r.membership) for r in records],
        'update_norm': [float(np.linalg.norm(r.update)) for r in records],
        'z_norm': [float(np.linalg.norm(r.noise)) for r in records],
    })


def metrics_frame(accuracy_clean: float, accuracy_dp: float, sigma: float, M: int, C: float) -> pd.DataFrame:
    return pd.DataFrame([{
        'accuracy_clean': accuracy_clean,
        'accuracy_dp': accuracy_dp,
        'sigma': sigma,
        'M': M,
        'C': C,
    }])
