"""
Closed-form models: trade-off curves, separation bounds and the toy classifier.
"""

from .tradeoff import (
    TradeoffCurve,
    SeparationResult,
    random_guess,
    gaussian,
    eps_delta,
    sub_shuffled,
    poisson_mixture,
    eval_curve,
    pointwise_separation,
    fixed_point,
    global_separation,
    sample_curve
)
from .bounds import (
    BoundParams,
    BoundsRow,
    AStar,
    sigma_threshold,
    epsilon_M,
    kappa_shuf_lower,
    kappa_pois_lower,
    poisson_mixing_weight,
    a_star,
    kappa_eps_delta,
    eps_min_from_kappa,
    mu_gdp_asymptotic,
    mugdp_separation,
    sep_tail_lower,
    appendix_f_instantiation,
    bounds_table
)

__all__ = [
    'TradeoffCurve',
    'SeparationResult',
    'random_guess',
    'gaussian',
    'eps_delta',
    'sub_shuffled',
    'poisson_mixture',
    'eval_curve',
    'pointwise_separation',
    'fixed_point',
    'global_separation',
    'sample_curve',
    'BoundParams',
    'BoundsRow',
    'AStar',
    'sigma_threshold',
    'epsilon_M',
    'kappa_shuf_lower',
    'kappa_pois_lower',
    'poisson_mixing_weight',
    'a_star',
    'kappa_eps_delta',
    'eps_min_from_kappa',
    'mu_gdp_asymptotic',
    'mugdp_separation',
    'sep_tail_lower',
    'appendix_f_instantiation',
    'bounds_table'
]
