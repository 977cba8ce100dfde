"""
Trade-off Curves
f-DP trade-off functions as values, plus pointwise and global separation
from the random-guessing line beta = 1 - alpha.

Supported curves:
- random_guess:     1 - alpha
- gaussian(mu):     Phi(Phi^-1(1 - alpha) - mu)
- eps_delta(e, d):  max{0, 1 - d - e^e alpha, e^-e (1 - d - alpha)}
- sub_shuffled(M, sigma): the max-statistic curve of one shuffled epoch
      Phi(Phi^-1((1 - alpha)^(1/M)) - 1/sigma) * (1 - alpha)^((M-1)/M)
- poisson_mixture(base, p): p (1 - alpha) + (1 - p) base(alpha)
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from utils.errors import (
    BracketError,
    DomainError,
    FixedPointNotFoundError,
    InvalidArgumentError,
)
from utils.numerics import (
    DEFAULT_MAX_TOL,
    DEFAULT_ROOT_TOL,
    ArrayOrFloat,
    Probability,
    RealScalar,
    check_probability,
    find_root,
    maximize_scalar,
    std_normal_cdf,
    std_normal_cdf_inv,
)

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
MAX_SEPARATION = 1.0 / SQRT2

KINDS = ('random_guess', 'gaussian', 'eps_delta', 'sub_shuffled', 'poisson_mixture')
METHODS = ('fixed_point', 'maximization')


@dataclass(frozen=True)
class TradeoffCurve:
    """
    Immutable trade-off curve. Build instances with the factory functions
    below rather than directly.

    `symmetric` and `convex` are claims about the closed form; only curves
    carrying both may use the fixed-point shortcut for their separation.
    """
    kind: str
    mu: float = 0.0
    eps: float = 0.0
    delta: float = 0.0
    M: int = 1
    sigma: float = 1.0
    p: float = 0.0
    base: Optional['TradeoffCurve'] = None
    symmetric: bool = False
    convex: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"Unknown curve kind '{self.kind}'")
        if self.kind == 'gaussian' and not (math.isfinite(self.mu) and self.mu >= 0):
            raise InvalidArgumentError(f"mu must be finite and >= 0, got {self.mu}")
        if self.kind == 'eps_delta':
            if not (math.isfinite(self.eps) and self.eps >= 0):
                raise InvalidArgumentError(f"eps must be finite and >= 0, got {self.eps}")
            check_probability(self.delta, 'delta')
        if self.kind == 'sub_shuffled':
            if int(self.M) != self.M or self.M < 1:
                raise InvalidArgumentError(f"M must be an integer >= 1, got {self.M}")
            if not (self.sigma > 0):
                raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")
        if self.kind == 'poisson_mixture':
            if self.base is None:
                raise InvalidArgumentError("poisson_mixture needs a base curve")
            check_probability(self.p, 'p')

    def __call__(self, alpha: ArrayOrFloat) -> ArrayOrFloat:
        return eval_curve(self, alpha)

    def describe(self) -> str:
        if self.kind == 'gaussian':
            return f"gaussian(mu={self.mu})"
        if self.kind == 'eps_delta':
            return f"eps_delta(eps={self.eps}, delta={self.delta})"
        if self.kind == 'sub_shuffled':
            return f"sub_shuffled(M={self.M}, sigma={self.sigma})"
        if self.kind == 'poisson_mixture':
            return f"poisson_mixture(p={self.p}, base={self.base.describe()})"
        return self.kind


@dataclass(frozen=True)
class SeparationResult:
    """Global separation of a curve"""
    kappa: RealScalar
    attaining_alpha: Probability
    method: str  # 'fixed_point' | 'maximization'

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidArgumentError(f"Unknown separation method '{self.method}'")
        if not (0.0 <= self.kappa < MAX_SEPARATION):
            raise DomainError(
                f"Separation must lie in [0, 1/sqrt(2)), got {self.kappa} "
                f"(the curve reaches perfect distinguishability)"
            )


def random_guess() -> TradeoffCurve:
    return TradeoffCurve(kind='random_guess', symmetric=True, convex=True)


def gaussian(mu: float) -> TradeoffCurve:
    return TradeoffCurve(kind='gaussian', mu=float(mu), symmetric=True, convex=True)


def eps_delta(eps: float, delta: float) -> TradeoffCurve:
    return TradeoffCurve(
        kind='eps_delta', eps=float(eps), delta=float(delta), symmetric=True, convex=True
    )


def sub_shuffled(M: int, sigma: float) -> TradeoffCurve:
    # Neither symmetry nor convexity of this curve is established
    return TradeoffCurve(kind='sub_shuffled', M=int(M), sigma=float(sigma))


def poisson_mixture(base: TradeoffCurve, p: float) -> TradeoffCurve:
    return TradeoffCurve(kind='poisson_mixture', base=base, p=float(p), convex=base.convex)


def _eval_sub_shuffled(alpha: np.ndarray, M: int, sigma: float) -> np.ndarray:
    with np.errstate(divide='ignore', invalid='ignore'):
        log_survival = np.log1p(-alpha)
        # 1 - (1 - alpha)^(1/M) without cancellation for large M
        upper_tail = 0.0 - np.expm1(log_survival / M)
        inner = -std_normal_cdf_inv(upper_tail) - 1.0 / sigma
        values = std_normal_cdf(inner) * np.exp(log_survival * (M - 1) / M)
    return np.where(alpha >= 1.0, 0.0, values)


def eval_curve(curve: TradeoffCurve, alpha: ArrayOrFloat) -> ArrayOrFloat:
    """
    Evaluate a trade-off curve at alpha (scalar or array in [0, 1]).

    Raises:
        InvalidArgumentError: alpha is NaN or outside [0, 1]
    """
    checked = check_probability(alpha, 'alpha')
    a = np.asarray(checked, dtype=float)

    if curve.kind == 'random_guess':
        values = 1.0 - a
    elif curve.kind == 'gaussian':
        # Phi^-1(1 - a) == -Phi^-1(a), which keeps precision for small a
        values = std_normal_cdf(-std_normal_cdf_inv(a) - curve.mu)
    elif curve.kind == 'eps_delta':
        e_eps = math.exp(curve.eps)
        values = np.maximum.reduce([
            np.zeros_like(a),
            1.0 - curve.delta - e_eps * a,
            (1.0 - curve.delta - a) / e_eps,
        ])
    elif curve.kind == 'sub_shuffled':
        values = _eval_sub_shuffled(a, curve.M, curve.sigma)
    else:
        values = curve.p * (1.0 - a) + (1.0 - curve.p) * np.asarray(eval_curve(curve.base, a))

    if np.ndim(checked) == 0:
        return float(values)
    return values


def pointwise_separation(curve: TradeoffCurve, alpha: ArrayOrFloat) -> ArrayOrFloat:
    """Distance from (alpha, f(alpha)) to the line beta = 1 - alpha."""
    checked = check_probability(alpha, 'alpha')
    sep = ((1.0 - np.asarray(checked)) - np.asarray(eval_curve(curve, checked))) / SQRT2
    return float(sep) if np.ndim(checked) == 0 else sep


def fixed_point(curve: TradeoffCurve, tol: float = DEFAULT_ROOT_TOL) -> Probability:
    """
    The alpha where the curve crosses the diagonal, f(a) = a.

    Raises:
        FixedPointNotFoundError: f(a) - a has no sign change on [0, 1]
    """
    try:
        return find_root(lambda a: eval_curve(curve, a) - a, 0.0, 1.0, tol)
    except BracketError as exc:
        raise FixedPointNotFoundError(
            f"{curve.describe()} has no fixed point on [0, 1]: {exc}"
        ) from exc


def global_separation(
    curve: TradeoffCurve,
    tol: float = DEFAULT_MAX_TOL,
    method: str = 'auto',
    root_tol: float = DEFAULT_ROOT_TOL
) -> SeparationResult:
    """
    Maximum pointwise separation of a curve.

    Args:
        curve: Trade-off curve
        tol: Tolerance of the maximization path
        method: 'auto' (fixed point for symmetric convex curves, maximization
                otherwise), 'fixed_point' or 'maximization'
        root_tol: Tolerance of the fixed-point root search

    Returns:
        SeparationResult with kappa and the attaining alpha
    """
    if method == 'auto':
        method = 'fixed_point' if (curve.symmetric and curve.convex) else 'maximization'
    if method not in METHODS:
        raise InvalidArgumentError(f"Unknown separation method '{method}'")

    if method == 'fixed_point':
        a_hat = fixed_point(curve, tol=root_tol)
        kappa = (1.0 - 2.0 * a_hat) / SQRT2
    else:
        a_hat, kappa = maximize_scalar(lambda a: pointwise_separation(curve, a), 0.0, 1.0, tol)

    logger.debug(f"sep({curve.describe()}) = {kappa!r} at alpha={a_hat!r} via {method}")
    return SeparationResult(kappa=max(0.0, kappa), attaining_alpha=a_hat, method=method)


def sample_curve(curve: TradeoffCurve, points: int) -> pd.DataFrame:
    """Evaluate a curve on `points` evenly spaced alphas in [0, 1]."""
    if points < 2:
        raise InvalidArgumentError(f"points must be at least 2, got {points}")
    alphas = np.linspace(0.0, 1.0, int(points))
    return pd.DataFrame({'alpha': alphas, 'beta': eval_curve(curve, alphas)})
