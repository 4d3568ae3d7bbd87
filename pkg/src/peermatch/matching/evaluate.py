"""Scoring of finished matchings."""

from __future__ import annotations

from ..model import Matching, Window
from ..optimizer import Billing, community_saving


def evaluate_matching(m: Matching, billing: Billing, window: Window | None = None) -> float:
    """Global cost saving: the sum of the community savings over ``window``."""
    return float(sum(community_saving(c, billing, window) for c in m.communities))


def pairwise_weight(m: Matching, oracle) -> float:
    """Sum of the pairwise weights of every (prosumer, consumer) pair in ``m``."""
    return float(sum(oracle.weight(c.prosumer, j, ()) for c in m.communities for j in c.consumers))
