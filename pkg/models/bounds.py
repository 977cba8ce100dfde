"""
Separation Bounds
Closed-form lower bounds on the separation of one-epoch shuffled and
Poisson-subsampled DP-SGD, the (eps, delta) and mu-GDP conversions, and the
table and sweep generators built on top of them.

Every formula containing ln M requires M >= 2 and raises DomainError below it.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
from scipy import special

from utils.errors import DomainError, InvalidArgumentError
from utils.numerics import (
    Probability,
    RealScalar,
    check_probability,
    std_normal_cdf,
    std_normal_log_cdf,
)

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
MAX_SEPARATION = 1.0 / SQRT2
ONE_MINUS_INV_E = -math.expm1(-1.0)

# Above this sigma^-2 the e^{sigma^-2} term is handled in log space
LOG_SPACE_CUTOFF = 700.0

# Training-set sizes behind the sigma column of the experiment tables
REFERENCE_DATASETS: Dict[str, int] = {
    'cifar10': 50_000,
    'cifar100': 50_000,
    'svhn': 604_388,      # train + extra
    'agnews': 120_000,
}

# Printed precision of the published table
DISPLAY_DECIMALS = {
    'kappa_shuf': 3,
    'kappa_pois': 3,
    'eps_min_shuf': 2,
    'eps_min_pois': 2,
    'sigma_threshold': 2,
}


@dataclass(frozen=True)
class BoundParams:
    """Inputs shared by the bound formulas"""
    M: int  # Rounds per epoch
    sigma: float  # Noise multiplier
    N: int = 100_000_000  # Dataset size
    delta: Optional[float] = None  # Defaults to 1/N
    E: float = 1.0  # Epoch budget (asymptotic mu-GDP only)

    def __post_init__(self):
        _check_rounds(self.M)
        if not (self.sigma > 0):
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgumentError(f"N must be an integer >= 1, got {self.N}")
        if self.delta is not None:
            check_probability(self.delta, 'delta')
        if not (self.E > 0):
            raise InvalidArgumentError(f"E must be positive, got {self.E}")

    @property
    def resolved_delta(self) -> Probability:
        return 1.0 / self.N if self.delta is None else float(self.delta)


@dataclass
class BoundsRow:
    """One row of the minimum-epsilon table"""
    M: int
    kappa_shuf: RealScalar
    eps_min_shuf: RealScalar
    kappa_pois: RealScalar
    eps_min_pois: RealScalar
    sigma_threshold: RealScalar


@dataclass(frozen=True)
class AStar:
    """Type I error where the inner argument of the max-test curve vanishes"""
    a_star: Probability
    bound: RealScalar  # 1/sqrt(4 pi ln M), +inf when M == 1
    proven_regime: bool  # sigma <= sigma_threshold(M), where a_star <= bound holds


def _check_rounds(M, minimum: int = 2) -> float:
    value = float(M)
    if math.isnan(value):
        raise InvalidArgumentError(f"M must not be NaN, got {M}")
    if value < minimum:
        raise DomainError(f"M must be >= {minimum} (ln M must be positive), got {M}")
    return value


def sigma_threshold(M) -> RealScalar:
    """Noise multiplier 1/sqrt(2 ln M) below which one shuffled epoch leaks."""
    m = _check_rounds(M)
    return 1.0 / math.sqrt(2.0 * math.log(m))


def epsilon_M(M) -> RealScalar:
    """Correction term 2/(M sqrt(4 pi ln M))."""
    m = _check_rounds(M)
    return 2.0 / (m * math.sqrt(4.0 * math.pi * math.log(m)))


def kappa_shuf_lower(M, with_correction: bool = False) -> RealScalar:
    """
    Lower bound on the separation of one shuffled epoch at sigma below the
    threshold: (1/sqrt(8)) (1 - 1/sqrt(4 pi ln M)), optionally times
    (1 - epsilon_M).
    """
    m = _check_rounds(M)
    kappa = (1.0 - 1.0 / math.sqrt(4.0 * math.pi * math.log(m))) / math.sqrt(8.0)
    if with_correction:
        kappa *= 1.0 - epsilon_M(m)
    return kappa


def poisson_mixing_weight(q: float, M) -> Probability:
    """Probability (1 - q)^M that Poisson sampling never selects the target."""
    check_probability(q, 'q')
    m = _check_rounds(M, minimum=1)
    if q == 1.0:
        return 0.0
    return math.exp(m * math.log1p(-q))


def kappa_pois_lower(M, exact_mixing: bool = False) -> RealScalar:
    """
    Poisson counterpart of kappa_shuf_lower at q = 1/M.

    The published factor is the limit 1 - 1/e of 1 - (1 - 1/M)^M; with
    exact_mixing the finite-M value is used instead.
    """
    m = _check_rounds(M)
    factor = 1.0 - poisson_mixing_weight(1.0 / m, m) if exact_mixing else ONE_MINUS_INV_E
    return factor * kappa_shuf_lower(m, with_correction=False)


def a_star(M, sigma: float) -> AStar:
    """
    a* = 1 - Phi(1/sigma)^M, reported with its bound 1/sqrt(4 pi ln M).

    Raises:
        ArithmeticError: a* exceeds the bound although sigma <= sigma_threshold(M)
    """
    m = _check_rounds(M, minimum=1)
    if not (sigma > 0):
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")

    # 1 - exp(M log Phi(1/sigma)) keeps full precision when a* is tiny
    value = float(-np.expm1(m * std_normal_log_cdf(1.0 / sigma)))
    if m < 2:
        return AStar(a_star=value, bound=math.inf, proven_regime=False)

    bound = 1.0 / math.sqrt(4.0 * math.pi * math.log(m))
    proven = sigma <= sigma_threshold(m)
    if proven and value > bound:
        raise ArithmeticError(
            f"a*={value!r} exceeds 1/sqrt(4 pi ln M)={bound!r} at M={M}, sigma={sigma}"
        )
    return AStar(a_star=value, bound=bound, proven_regime=proven)


def kappa_eps_delta(eps: float, delta: float) -> RealScalar:
    """Separation (e^eps - 1 + 2 delta) / ((1 + e^eps) sqrt(2)) of an (eps, delta) curve."""
    if not (eps >= 0):
        raise InvalidArgumentError(f"eps must be >= 0, got {eps}")
    check_probability(delta, 'delta')
    # (e^eps - 1)/(e^eps + 1) == tanh(eps/2) and 1/(1 + e^eps) == expit(-eps)
    return (math.tanh(eps / 2.0) + 2.0 * delta * float(special.expit(-eps))) / SQRT2


def eps_min_from_kappa(kappa: float, delta: float) -> RealScalar:
    """
    Smallest eps for which an (eps, delta) guarantee is compatible with
    separation kappa: ln((1 + kappa sqrt(2) - 2 delta) / (1 - kappa sqrt(2))).
    """
    check_probability(delta, 'delta')
    if math.isnan(kappa) or kappa < 0:
        raise InvalidArgumentError(f"kappa must be >= 0, got {kappa}")
    if kappa >= MAX_SEPARATION:
        raise DomainError(f"kappa must be < 1/sqrt(2), got {kappa}")

    numerator = 1.0 + kappa * SQRT2 - 2.0 * delta
    if numerator <= 0:
        raise DomainError(
            f"1 + kappa sqrt(2) - 2 delta must be positive, got kappa={kappa}, delta={delta}"
        )
    return math.log(numerator) - math.log1p(-kappa * SQRT2)


def mu_gdp_asymptotic(M, E: float, sigma: float) -> RealScalar:
    """
    Asymptotic mu-GDP parameter of Poisson DP-SGD run for E epochs of M rounds:

        mu = sqrt(2) sqrt(E/M) sqrt(e^{1/sigma^2} Phi(1.5/sigma) + 3 Phi(-0.5/sigma) - 2)

    Args:
        M: Rounds per epoch (>= 1)
        E: Epoch budget (> 0)
        sigma: Noise multiplier (> 0, may be +inf)

    Raises:
        OverflowError: e^{1/sigma^2} leaves the double range
    """
    m = _check_rounds(M, minimum=1)
    if not (E > 0):
        raise InvalidArgumentError(f"E must be positive, got {E}")
    if not (sigma > 0):
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")

    inv_sigma = 1.0 / sigma
    inv_var = inv_sigma * inv_sigma
    log_lead = inv_var + std_normal_log_cdf(1.5 * inv_sigma)

    if inv_var > LOG_SPACE_CUTOFF:
        # The remaining terms are below the resolution of e^{log_lead}
        try:
            root_radicand = math.exp(0.5 * log_lead)
        except OverflowError as exc:
            raise OverflowError(
                f"e^(1/sigma^2) overflows for sigma={sigma}; use sigma above ~{1 / math.sqrt(1418):.4f}"
            ) from exc
    else:
        radicand = math.exp(log_lead) + 3.0 * std_normal_cdf(-0.5 * inv_sigma) - 2.0
        if radicand < 0:
            if radicand < -1e-15:
                raise ArithmeticError(
                    f"mu-GDP radicand is negative ({radicand!r}) at sigma={sigma}"
                )
            radicand = 0.0
        root_radicand = math.sqrt(radicand)

    mu = SQRT2 * math.sqrt(E / m) * root_radicand
    if not math.isfinite(mu):
        raise OverflowError(f"mu overflows for sigma={sigma}, M={M}, E={E}")
    return mu


def gaussian_separation(mu: float) -> RealScalar:
    """Closed form (2 Phi(mu/2) - 1)/sqrt(2) of sep(G_mu)."""
    if math.isnan(mu) or mu < 0:
        raise InvalidArgumentError(f"mu must be >= 0, got {mu}")
    # 2 Phi(x) - 1 == erf(x / sqrt(2))
    return float(special.erf(mu / (2.0 * SQRT2))) / SQRT2


def mugdp_separation(M, E: float, sigma: float) -> RealScalar:
    """Separation of the Gaussian curve at mu = mu_gdp_asymptotic(M, E, sigma)."""
    return gaussian_separation(mu_gdp_asymptotic(M, E, sigma))


def sep_tail_lower(mu: float) -> RealScalar:
    """
    Tail lower bound 1/sqrt(2) - (2/sqrt(pi)) e^{-mu^2/8} / mu on sep(G_mu).

    Negative for small mu, where it is still a valid (vacuous) lower bound.
    """
    if math.isnan(mu) or mu <= 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    if math.isinf(mu):
        return MAX_SEPARATION
    return MAX_SEPARATION - (2.0 / math.sqrt(math.pi)) * math.exp(-mu * mu / 8.0) / mu


def appendix_f_instantiation(M, s: float) -> RealScalar:
    """
    Explicit separation bound for sigma = s / sqrt(ln M) and one epoch:

        1/sqrt(2) - (2/sqrt(pi)) exp(-M^{1/s^2 - 1} / 16) / ((1/sqrt(2)) M^{1/(2 s^2) - 1/2})

    Evaluated in log space so large M and small s neither overflow nor
    underflow.

    Raises:
        DomainError: M < 2, s <= 0 or M^{1/s^2} < 4
    """
    m = _check_rounds(M)
    if math.isnan(s) or s <= 0:
        raise DomainError(f"s must be > 0, got {s}")

    log_m = math.log(m)
    inv_s2 = 1.0 / (s * s)
    if inv_s2 * log_m < math.log(4.0):
        raise DomainError(
            f"The explicit bound needs M^(1/s^2) >= 4, got M={M}, s={s}"
        )

    with np.errstate(over='ignore'):
        growth = float(np.exp((inv_s2 - 1.0) * log_m))
    log_denominator = -0.5 * math.log(2.0) + (0.5 * inv_s2 - 0.5) * log_m
    log_tail = math.log(2.0 / math.sqrt(math.pi)) - growth / 16.0 - log_denominator
    tail = math.exp(log_tail) if log_tail > -745.0 else 0.0
    return MAX_SEPARATION - tail


def bounds_row(M, N: int, delta: Optional[float] = None) -> BoundsRow:
    """Table row for M rounds at sigma_threshold(M), with delta defaulting to 1/N."""
    params = BoundParams(M=int(_check_rounds(M)), sigma=sigma_threshold(M), N=N, delta=delta)
    kappa_shuf = kappa_shuf_lower(params.M, with_correction=False)
    kappa_pois = kappa_pois_lower(params.M)
    return BoundsRow(
        M=params.M,
        kappa_shuf=kappa_shuf,
        eps_min_shuf=eps_min_from_kappa(kappa_shuf, params.resolved_delta),
        kappa_pois=kappa_pois,
        eps_min_pois=eps_min_from_kappa(kappa_pois, params.resolved_delta),
        sigma_threshold=params.sigma,
    )


def bounds_table(M_list: Iterable, N: int, delta: Optional[float] = None) -> List[BoundsRow]:
    """
    Minimum-epsilon table for one epoch at delta = 1/N, or at an explicit delta.

    The kappa columns use the bound without the (1 - epsilon_M) factor,
    which is what the published table prints.
    """
    rows = [bounds_row(M, N, delta) for M in M_list]
    if not rows:
        raise InvalidArgumentError("M_list must not be empty")
    logger.info(f"Built bounds table for {len(rows)} values of M (N={N}, delta={delta!r})")
    return rows


def bounds_frame(rows: List[BoundsRow]) -> pd.DataFrame:
    return pd.DataFrame([vars(row) for row in rows])


def round_for_display(table: pd.DataFrame) -> pd.DataFrame:
    """Half-even rounding to the published precision (kappa 3, eps and sigma 2 decimals)."""
    decimals = {k: v for k, v in DISPLAY_DECIMALS.items() if k in table.columns}
    return table.round(decimals)


def experiment_sigma_column(dataset: str, batch_sizes: Iterable[int]) -> pd.DataFrame:
    """
    sigma_threshold(floor(N / batch size)) for a reference training set.

    Args:
        dataset: One of REFERENCE_DATASETS
        batch_sizes: Batch sizes of the experiment table

    Returns:
        DataFrame with columns batch_size, M, sigma_threshold
    """
    if dataset not in REFERENCE_DATASETS:
        raise InvalidArgumentError(
            f"Unknown dataset '{dataset}', expected one of {sorted(REFERENCE_DATASETS)}"
        )
    n = REFERENCE_DATASETS[dataset]

    records = []
    for batch_size in batch_sizes:
        if int(batch_size) != batch_size or batch_size < 1:
            raise InvalidArgumentError(f"batch size must be a positive integer, got {batch_size}")
        rounds = n // int(batch_size)
        records.append({
            'batch_size': int(batch_size),
            'M': rounds,
            'sigma_threshold': sigma_threshold(rounds),
        })
    return pd.DataFrame(records, columns=['batch_size', 'M', 'sigma_threshold'])


def appendix_f_sweep(M_values: Iterable, s_values: Iterable[float], E: float = 1.0) -> pd.DataFrame:
    """
    Separation data at sigma = s / sqrt(ln M) over a grid of M for each s.

    Columns: s, M, sigma, mu, kappa_mugdp, tail_lower, explicit_bound.
    explicit_bound is NaN where its validity condition fails.
    """
    records = []
    for s in s_values:
        for M in M_values:
            m = _check_rounds(M)
            sigma = s / math.sqrt(math.log(m))
            mu = mu_gdp_asymptotic(m, E, sigma)
            try:
                explicit = appendix_f_instantiation(m, s)
            except DomainError as exc:
                logger.warning(f"Skipping explicit bound: {exc}")
                explicit = math.nan
            records.append({
                's': float(s),
                'M': int(M),
                'sigma': sigma,
                'mu': mu,
                'kappa_mugdp': gaussian_separation(mu),
                'tail_lower': sep_tail_lower(mu) if mu > 0 else -math.inf,
                'explicit_bound': explicit,
            })
    return pd.DataFrame(
        records,
        columns=['s', 'M', 'sigma', 'mu', 'kappa_mugdp', 'tail_lower', 'explicit_bound'],
    )
