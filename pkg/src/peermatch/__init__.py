"""Peer-to-peer energy community formation by geographical peer matching."""

from .datagen import ScenarioConfig, generate, summarize
from .errors import (
    ContractError,
    DomainError,
    InstanceTooLargeError,
    MalformedInputError,
    PeerMatchError,
    SolverError,
)
from .geo import GeoPoint, NeighborGraph, build_neighborhoods, distance, sample_neighborhood
from .model import Community, Household, Matching, Scenario, Tariff, TimeSeries, validate_matching
from .optimizer import Billing, aggregate_community, bill_battery, community_saving, hourly_cost

__version__ = "0.1.0"

__all__ = [
    "Billing", "Community", "ContractError", "DomainError", "GeoPoint", "Household",
    "InstanceTooLargeError", "MalformedInputError", "Matching", "NeighborGraph",
    "PeerMatchError", "Scenario", "ScenarioConfig", "SolverError", "Tariff", "TimeSeries",
    "aggregate_community", "bill_battery", "build_neighborhoods", "community_saving",
    "distance", "generate", "hourly_cost", "sample_neighborhood", "summarize",
    "validate_matching",
]
