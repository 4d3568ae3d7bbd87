"""Weight oracles, matching heuristics and exact baselines."""

from .evaluate import evaluate_matching, pairwise_weight
from .exact import brute_force_bhm, exact_assignment
from .heuristics import ORDER_POLICIES, classic_greedy, order_prosumers, round_robin, single_pass
from .weights import WEIGHT_FUNCTIONS, TableWeights, WeightConfig, WeightOracle

__all__ = [
    "ORDER_POLICIES",
    "WEIGHT_FUNCTIONS",
    "TableWeights",
    "WeightConfig",
    "WeightOracle",
    "brute_force_bhm",
    "classic_greedy",
    "evaluate_matching",
    "exact_assignment",
    "order_prosumers",
    "pairwise_weight",
    "round_robin",
    "single_pass",
]
