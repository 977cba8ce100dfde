"""
Adversary Simulation
Monte Carlo estimate of the one-epoch membership hypothesis test.

The adversary sees M projected observations x_1..x_M:
- H0: x_j ~ N(0, 1) independently
- H1 shuffled: one uniformly chosen coordinate is shifted by 1/sigma
- H1 poisson: each coordinate is shifted by 1/sigma with probability q

Two tests are supported: thresholding max_j x_j, and thresholding the log
likelihood ratio of the model (Neyman-Pearson). Rejection happens when the
statistic is >= the threshold.

Trials run in fixed-size blocks, each on its own (seed, block) random stream,
so results are identical for any number of worker threads.
"""

import logging
import math
from concurrent import futures
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import special

from utils.errors import InvalidArgumentError
from utils.numerics import ArrayOrFloat, RealScalar, std_normal_log_cdf
from utils.rng import STREAM_SIMULATION, RngSeed

logger = logging.getLogger(__name__)

SCHEMES = ('shuffled', 'poisson')
HYPOTHESES = ('H0', 'H1')
TESTS = ('max', 'np')

DEFAULT_THRESHOLD_COUNT = 512
TRIAL_BLOCK = 8192


@dataclass(frozen=True)
class ObservationModel:
    """Observation model of the reduced one-dimensional test"""
    scheme: str  # 'shuffled' | 'poisson'
    M: int
    sigma: float
    q: Optional[float] = None  # Poisson inclusion probability

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"Unknown scheme '{self.scheme}', expected one of {SCHEMES}")
        if int(self.M) != self.M or self.M < 1:
            raise InvalidArgumentError(f"M must be an integer >= 1, got {self.M}")
        if not (self.sigma > 0):
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")
        if self.scheme == 'poisson':
            if self.q is None or not (0.0 < self.q < 1.0):
                raise InvalidArgumentError(f"poisson scheme needs q in (0, 1), got {self.q}")

    @property
    def shift(self) -> float:
        return 1.0 / self.sigma


@dataclass
class EmpiricalTradeoffPoint:
    """Empirical (type I, type II) errors of one threshold"""
    threshold: RealScalar
    alpha_hat: float
    beta_hat: float
    alpha_se: float  # sqrt(alpha_hat (1 - alpha_hat) / trials_h0)
    beta_se: float
    trials_h0: int
    trials_h1: int


def draw_observations(
    model: ObservationModel,
    hypothesis: str,
    count: int,
    rng: np.random.Generator
) -> np.ndarray:
    """`count` observation vectors as a (count, M) matrix."""
    if hypothesis not in HYPOTHESES:
        raise InvalidArgumentError(f"hypothesis must be 'H0' or 'H1', got {hypothesis}")
    if count < 0:
        raise InvalidArgumentError(f"count must be >= 0, got {count}")

    obs = rng.standard_normal((count, model.M))
    if hypothesis == 'H0':
        return obs

    if model.scheme == 'shuffled':
        shifted = rng.integers(0, model.M, size=count)
        obs[np.arange(count), shifted] += model.shift
    else:
        # No conditioning on the number of shifted rounds: all-zero draws stay
        obs += model.shift * (rng.random((count, model.M)) < model.q)
    return obs


def draw_observation(model: ObservationModel, hypothesis: str, rng: np.random.Generator) -> np.ndarray:
    """One observation vector of length M."""
    return draw_observations(model, hypothesis, 1, rng)[0]


def _check_obs(obs) -> np.ndarray:
    arr = np.asarray(obs, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise InvalidArgumentError("Observation vector must not be empty")
    return arr


def _unwrap(values: np.ndarray) -> ArrayOrFloat:
    return float(values) if np.ndim(values) == 0 else values


def max_statistic(obs) -> ArrayOrFloat:
    """max_j x_j of a vector (or of each row of a matrix)."""
    return _unwrap(np.max(_check_obs(obs), axis=-1))


def np_log_statistic(obs, M: int, sigma: float) -> ArrayOrFloat:
    """
    Log of the shuffled-model likelihood ratio,
    logsumexp_j(x_j/sigma - 1/(2 sigma^2)) - log M.

    Stays finite where the ratio itself overflows (H1) or underflows (H0) at
    small sigma; rows of a matrix are handled independently.
    """
    arr = _check_obs(obs)
    if arr.shape[-1] != M:
        raise InvalidArgumentError(f"Observation has length {arr.shape[-1]}, expected M={M}")
    if not (sigma > 0):
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")

    exponents = arr / sigma - 0.5 / (sigma * sigma)
    return _unwrap(special.logsumexp(exponents, axis=-1) - math.log(M))


def np_statistic(obs, M: int, sigma: float) -> ArrayOrFloat:
    """Shuffled-model likelihood ratio (1/M) sum_j exp(x_j/sigma - 1/(2 sigma^2))."""
    return _unwrap(np.exp(np_log_statistic(obs, M, sigma)))


def poisson_np_statistic(obs, q: float, sigma: float) -> ArrayOrFloat:
    """
    Poisson-model log likelihood ratio sum_j log((1 - q) + q exp(x_j/sigma - 1/(2 sigma^2))).
    """
    arr = _check_obs(obs)
    if not (0.0 < q < 1.0):
        raise InvalidArgumentError(f"q must be in (0, 1), got {q}")
    if not (sigma > 0):
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")

    exponents = arr / sigma - 0.5 / (sigma * sigma)
    terms = np.logaddexp(math.log1p(-q), math.log(q) + exponents)
    return _unwrap(np.sum(terms, axis=-1))


def compute_statistic(model: ObservationModel, test: str, obs: np.ndarray) -> ArrayOrFloat:
    """
    Statistic of `test` under `model`.

    NP uses the model's own log likelihood ratio, so NP thresholds are on the
    log scale for both schemes.
    """
    if test == 'max':
        return max_statistic(obs)
    if test == 'np':
        if model.scheme == 'shuffled':
            return np_log_statistic(obs, model.M, model.sigma)
        return poisson_np_statistic(obs, model.q, model.sigma)
    raise InvalidArgumentError(f"Unknown test '{test}', expected one of {TESTS}")


def simulate_statistics(
    model: ObservationModel,
    test: str,
    trials: int,
    seed: int,
    threads: int = 1
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Test statistics of `trials` H0 draws and `trials` H1 draws.

    Block k draws H0 from stream STREAM_SIMULATION + 2k and H1 from the next
    stream, so the output does not depend on `threads`.

    Returns:
        (h0_stats, h1_stats), each of length `trials`, in block order
    """
    if int(trials) != trials or trials < 1:
        raise InvalidArgumentError(f"trials must be a positive integer, got {trials}")
    if test not in TESTS:
        raise InvalidArgumentError(f"Unknown test '{test}', expected one of {TESTS}")
    if threads < 1:
        raise InvalidArgumentError(f"threads must be >= 1, got {threads}")

    root = RngSeed(seed, STREAM_SIMULATION)
    n_blocks = -(-int(trials) // TRIAL_BLOCK)

    def run_block(block: int) -> Tuple[np.ndarray, np.ndarray]:
        count = min(TRIAL_BLOCK, trials - block * TRIAL_BLOCK)
        h0 = draw_observations(model, 'H0', count, root.child(2 * block).generator())
        h1 = draw_observations(model, 'H1', count, root.child(2 * block + 1).generator())
        return (
            np.atleast_1d(compute_statistic(model, test, h0)),
            np.atleast_1d(compute_statistic(model, test, h1)),
        )

    if threads == 1:
        results = [run_block(k) for k in range(n_blocks)]
    else:
        with futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_block, range(n_blocks)))

    h0_stats = np.concatenate([r[0] for r in results])
    h1_stats = np.concatenate([r[1] for r in results])
    logger.debug(f"Simulated {trials} trials per hypothesis in {n_blocks} blocks ({threads} threads)")
    return h0_stats, h1_stats


def default_thresholds(
    h0_stats: np.ndarray,
    h1_stats: np.ndarray,
    count: int = DEFAULT_THRESHOLD_COUNT
) -> np.ndarray:
    """
    Thresholds at `count` evenly spaced empirical quantiles of the pooled statistics.

    Non-finite statistics are left out of the quantiles; infinite ones still count
    as rejections (+inf) or acceptances (-inf) at every threshold.
    """
    if count < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")
    pooled = np.concatenate([np.asarray(h0_stats, float), np.asarray(h1_stats, float)])
    finite = pooled[np.isfinite(pooled)]
    if finite.size == 0:
        raise InvalidArgumentError("Cannot place thresholds without finite statistics")
    if finite.size < pooled.size:
        logger.warning(f"Ignoring {pooled.size - finite.size} non-finite statistics when placing thresholds")
    levels = (np.arange(count) + 0.5) / count
    return np.unique(np.quantile(finite, levels))


def _check_thresholds(thresholds: Sequence[float]) -> np.ndarray:
    values = np.asarray(thresholds, dtype=float).ravel()
    if values.size == 0:
        raise InvalidArgumentError("thresholds must not be empty")
    if np.isnan(values).any():
        raise InvalidArgumentError("thresholds must not contain NaN")
    if (np.diff(values) < 0).any():
        raise InvalidArgumentError("thresholds must be sorted in increasing order")
    return values


def tradeoff_points(
    h0_stats: np.ndarray,
    h1_stats: np.ndarray,
    thresholds: Sequence[float]
) -> List[EmpiricalTradeoffPoint]:
    """Empirical errors of every threshold from one sorted pass over the statistics."""
    levels = _check_thresholds(thresholds)
    h0_sorted = np.sort(np.asarray(h0_stats, dtype=float))
    h1_sorted = np.sort(np.asarray(h1_stats, dtype=float))
    n0, n1 = len(h0_sorted), len(h1_sorted)
    if n0 == 0 or n1 == 0:
        raise InvalidArgumentError("Need at least one statistic per hypothesis")

    # Reject on stat >= h: false positives are H0 stats >= h, misses are H1 stats < h
    alpha = (n0 - np.searchsorted(h0_sorted, levels, side='left')) / n0
    beta = np.searchsorted(h1_sorted, levels, side='left') / n1
    alpha_se = np.sqrt(alpha * (1.0 - alpha) / n0)
    beta_se = np.sqrt(beta * (1.0 - beta) / n1)

    return [
        EmpiricalTradeoffPoint(
            threshold=float(h),
            alpha_hat=float(a),
            beta_hat=float(b),
            alpha_se=float(a_se),
            beta_se=float(b_se),
            trials_h0=n0,
            trials_h1=n1,
        )
        for h, a, b, a_se, b_se in zip(levels, alpha, beta, alpha_se, beta_se)
    ]


def estimate_tradeoff(
    model: ObservationModel,
    test: str,
    thresholds: Optional[Sequence[float]] = None,
    trials: int = 100_000,
    seed: int = 0,
    threads: int = 1
) -> List[EmpiricalTradeoffPoint]:
    """
    Empirical trade-off points of a test.

    Args:
        model: Observation model
        test: 'max' or 'np'
        thresholds: Sorted thresholds on the statistic's scale; None places
                    DEFAULT_THRESHOLD_COUNT thresholds at pooled quantiles
        trials: Draws per hypothesis
        seed: Root seed of the simulation streams
        threads: Worker threads over trial blocks

    Returns:
        One EmpiricalTradeoffPoint per threshold
    """
    h0_stats, h1_stats = simulate_statistics(model, test, trials, seed, threads)
    if thresholds is None:
        thresholds = default_thresholds(h0_stats, h1_stats)
    points = tradeoff_points(h0_stats, h1_stats, thresholds)
    logger.info(
        f"Estimated {len(points)} trade-off points: {model.scheme} M={model.M} "
        f"sigma={model.sigma:.6g} test={test} trials={trials} seed={seed}"
    )
    return points


def estimate_separation(points: Sequence[EmpiricalTradeoffPoint]) -> RealScalar:
    """Largest ((1 - alpha_hat) - beta_hat)/sqrt(2) over the points."""
    if not points:
        raise InvalidArgumentError("points must not be empty")
    return max(((1.0 - p.alpha_hat) - p.beta_hat) / math.sqrt(2.0) for p in points)


def analytic_max_test_point(M: int, sigma: float, threshold: ArrayOrFloat) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """
    Exact errors of the max test under the shuffled model:
    alpha = 1 - Phi(h)^M, beta = Phi(h - 1/sigma) Phi(h)^(M-1).
    """
    if int(M) != M or M < 1:
        raise InvalidArgumentError(f"M must be an integer >= 1, got {M}")
    if not (sigma > 0):
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")

    h = np.asarray(threshold, dtype=float)
    log_cdf = std_normal_log_cdf(h)
    alpha = -np.expm1(M * log_cdf)
    with np.errstate(invalid='ignore'):
        beta = np.exp(std_normal_log_cdf(h - 1.0 / sigma) + (M - 1) * log_cdf)
    beta = np.where(np.isneginf(h), 0.0, beta)
    return _unwrap(alpha), _unwrap(beta)


def points_frame(points: Sequence[EmpiricalTradeoffPoint]) -> pd.DataFrame:
    return pd.DataFrame([vars(p) for p in points])
