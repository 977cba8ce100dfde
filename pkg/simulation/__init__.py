"""
Stochastic engines: batch samplers, the adversary Monte Carlo and toy DP-SGD.
"""

from .samplers import BatchPlan, poisson_sample, shuffle_sample
from .adversary_sim import (
    ObservationModel,
    EmpiricalTradeoffPoint,
    estimate_tradeoff,
    estimate_separation
)
from .dpsgd_toy import ToyDataset, TrainConfig, RoundRecord, train

__all__ = [
    'BatchPlan',
    'poisson_sample',
    'shuffle_sample',
    'ObservationModel',
    'EmpiricalTradeoffPoint',
    'estimate_tradeoff',
    'estimate_separation',
    'ToyDataset',
    'TrainConfig',
    'RoundRecord',
    'train'
]
