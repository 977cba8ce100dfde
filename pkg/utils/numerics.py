"""
Numerics
Standard-normal special functions and 1-D solvers used by every other module.

Phi and its inverse come from scipy.special (ndtr / ndtri), which are accurate
to a few ulps over the whole real line, and accept +-inf as ordinary values:
Phi(-inf) = 0, Phi(+inf) = 1, Phi^-1(0) = -inf, Phi^-1(1) = +inf.
"""

import logging
import math
from typing import Callable, Tuple, Union

import numpy as np
from scipy import optimize, special

from utils.errors import BracketError, InvalidArgumentError

logger = logging.getLogger(__name__)

# Aliases used in signatures across the toolkit
Probability = float
RealScalar = float
ArrayOrFloat = Union[float, np.ndarray]

DEFAULT_ROOT_TOL = 1e-12
DEFAULT_MAX_TOL = 1e-10
MIN_GRID_POINTS = 1024

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1 / golden ratio
INV_PHI_SQUARED = (3.0 - math.sqrt(5.0)) / 2.0


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise InvalidArgumentError(f"{name} must not be NaN, got {x}")
    return arr


def _unwrap(arr: np.ndarray, original) -> ArrayOrFloat:
    if np.ndim(original) == 0:
        return float(arr)
    return arr


def check_probability(value, name: str = "probability") -> ArrayOrFloat:
    """Validate that value (scalar or array) lies in [0, 1]."""
    arr = _as_float_array(value, name)
    if ((arr < 0.0) | (arr > 1.0)).any():
        raise InvalidArgumentError(f"{name} must be between 0 and 1, got {value}")
    return _unwrap(arr, value)


def std_normal_cdf(x: ArrayOrFloat) -> ArrayOrFloat:
    """Phi(x) for real or infinite x."""
    arr = _as_float_array(x, "x")
    return _unwrap(special.ndtr(arr), x)


def std_normal_cdf_inv(p: ArrayOrFloat) -> ArrayOrFloat:
    """Phi^-1(p) for p in [0, 1]; the endpoints map to -inf and +inf."""
    arr = np.asarray(check_probability(p, "p"), dtype=float)
    return _unwrap(special.ndtri(arr), p)


def std_normal_log_cdf(x: ArrayOrFloat) -> ArrayOrFloat:
    """log Phi(x), accurate deep in the lower tail."""
    arr = _as_float_array(x, "x")
    return _unwrap(special.log_ndtr(arr), x)


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_ROOT_TOL
) -> RealScalar:
    """
    Root of a monotone function on [lo, hi] by Brent's bracketing method.

    Args:
        f: Function with a sign change on [lo, hi]
        lo: Left end of the bracket
        hi: Right end of the bracket
        tol: Width of the final bracket

    Returns:
        x with f(x) == 0 up to a bracket of width tol

    Raises:
        InvalidArgumentError: tol <= 0 or lo >= hi
        BracketError: f(lo) and f(hi) have the same sign
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}")
    if not lo < hi:
        raise InvalidArgumentError(f"Empty bracket [{lo}, {hi}]")

    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0.0:
        return float(lo)
    if f_hi == 0.0:
        return float(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(
            f"No sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}"
        )

    root, info = optimize.brentq(f, lo, hi, xtol=tol, full_output=True)
    logger.debug(f"find_root: {info.iterations} iterations, root={root!r}")
    return float(root)


def golden_section_max(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float
) -> Tuple[float, float]:
    """
    Golden-section search for the maximum of a unimodal f on [a, b].

    Returns:
        A sub-bracket [c, d] holding the maximum with d - c <= tol
    """
    h = b - a
    if h <= tol:
        return a, b

    # Steps needed to shrink h below tol
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARED * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)

    for _ in range(n - 1):
        if yc > yd:
            b, d, yd = d, c, yc
            h *= INV_PHI
            c = a + INV_PHI_SQUARED * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= INV_PHI
            d = a + INV_PHI * h
            yd = f(d)

    return (a, d) if yc > yd else (c, b)


def maximize_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_MAX_TOL,
    grid_points: int = MIN_GRID_POINTS + 1
) -> Tuple[RealScalar, RealScalar]:
    """
    Global maximum of a continuous function on [lo, hi].

    A coarse grid scan locates the best cell, then golden-section search over
    the two neighbouring cells shrinks the bracket to width tol. The grid
    guards against several local maxima.

    Returns:
        (argmax, max)
    """
    if not lo < hi:
        raise InvalidArgumentError(f"Empty interval [{lo}, {hi}]")
    if not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}")

    n_points = max(int(grid_points), MIN_GRID_POINTS)
    grid = np.linspace(lo, hi, n_points)
    values = np.array([f(float(x)) for x in grid])
    best = int(np.argmax(values))

    left = float(grid[max(best - 1, 0)])
    right = float(grid[min(best + 1, n_points - 1)])
    c, d = golden_section_max(f, left, right, tol)
    x_refined = 0.5 * (c + d)
    f_refined = float(f(x_refined))

    x_best, f_best = float(grid[best]), float(values[best])
    if f_refined >= f_best:
        x_best, f_best = x_refined, f_refined

    logger.debug(f"maximize_scalar: grid cell {best}/{n_points}, bracket width {d - c:.3g}, argmax={x_best!r}")
    return x_best, f_best
