"""Domain types: time series, households, tariffs, communities and matchings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import DomainError, MalformedInputError
from .geo import GeoPoint, NeighborGraph

Window = tuple[int, int]
"""Half-open hour range ``(start, stop)`` into the scenario horizon."""


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Hourly non-negative series starting at ``start_hour``."""

    values: np.ndarray
    start_hour: int = 0

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 1 or len(arr) < 1:
            raise DomainError("a time series needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise DomainError("time series values must be finite")
        if np.any(arr < 0):
            raise DomainError("time series values must be >= 0")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.start_hour == other.start_hour and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.start_hour, self.values.tobytes()))

    def window(self, window: Window | None = None) -> np.ndarray:
        """Values over ``window`` given in absolute hours."""
        if window is None:
            return self.values
        start, stop = window
        lo, hi = start - self.start_hour, stop - self.start_hour
        if lo < 0 or hi > len(self.values) or lo >= hi:
            raise DomainError(f"window {window} outside series hours "
                              f"[{self.start_hour}, {self.start_hour + len(self.values)})")
        return self.values[lo:hi]

    def __add__(self, other: "TimeSeries") -> "TimeSeries":
        if len(self) != len(other) or self.start_hour != other.start_hour:
            raise MalformedInputError("cannot add series with different horizons")
        return TimeSeries(self.values + other.values, self.start_hour)


@dataclass(frozen=True)
class Tariff:
    """Relative tax, fixed energy tax and feed-in premium, all in € or €/kWh."""

    tax: float = 0.25
    el_tax: float = 0.069
    el_net: float = 0.0058

    def __post_init__(self):
        if self.tax < 0:
            raise DomainError("tax must be >= 0")
        if not self.el_net < self.el_tax:
            raise DomainError("el_net must be smaller than el_tax")

    def buy_price(self, price):
        return price * (1.0 + self.tax) + self.el_tax

    def sell_price(self, price):
        return price + self.el_net


@dataclass(frozen=True, eq=False)
class Household:
    id: int
    position: GeoPoint
    consumption: TimeSeries
    pv_capacity: float = 0.0
    battery_capacity: float = 0.0

    def __post_init__(self):
        if not (self.pv_capacity >= 0 and math.isfinite(self.pv_capacity)):
            raise DomainError(f"household {self.id}: pv capacity must be finite and >= 0")
        if not (self.battery_capacity >= 0 and math.isfinite(self.battery_capacity)):
            raise DomainError(f"household {self.id}: battery capacity must be finite and >= 0")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Household):
            return NotImplemented
        return (self.id, self.position, self.pv_capacity, self.battery_capacity) == (
            other.id, other.position, other.pv_capacity, other.battery_capacity
        ) and self.consumption == other.consumption

    def __hash__(self):
        return hash(self.id)

    @property
    def is_prosumer(self) -> bool:
        return self.pv_capacity > 0

    @property
    def is_consumer(self) -> bool:
        return self.pv_capacity == 0 and self.battery_capacity == 0

    @property
    def resources(self) -> float:
        """PV kWp plus battery kWh, the score used by the resource ordering."""
        return self.pv_capacity + self.battery_capacity


@dataclass(frozen=True)
class Community:
    """One prosumer with the consumers sharing its resources."""

    prosumer: int
    consumers: tuple[int, ...]
    weights: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "consumers", tuple(sorted(int(c) for c in self.consumers)))

    @property
    def members(self) -> tuple[int, ...]:
        return (self.prosumer,) + self.consumers

    def __len__(self) -> int:
        return 1 + len(self.consumers)


@dataclass(frozen=True)
class Matching:
    communities: tuple[Community, ...]
    metadata: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "communities",
                           tuple(sorted(self.communities, key=lambda c: c.prosumer)))

    def __len__(self) -> int:
        return len(self.communities)

    def __iter__(self):
        return iter(self.communities)

    @property
    def matched_ids(self) -> set[int]:
        return {i for c in self.communities for i in c.members}

    @classmethod
    def from_groups(cls, groups: Mapping[int, Iterable[int]], **metadata) -> "Matching":
        """Build from ``{prosumer: consumers}``; prosumers without consumers are dropped."""
        comms = [Community(p, tuple(cs)) for p, cs in groups.items() if len(tuple(cs))]
        return cls(tuple(comms), dict(metadata))


@dataclass(frozen=True)
class Verdict:
    ok: bool
    violation: str | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_matching(m: Matching, g: NeighborGraph, k: int) -> Verdict:
    """Check disjointness, size bound, roles and radius feasibility of ``m``.

    Returns the first violated invariant. Ids that are neither a prosumer nor
    a consumer of ``g`` raise :class:`MalformedInputError`.
    """
    prosumers = set(g.adjacency)
    consumers = set(g.consumers)
    known = prosumers | consumers
    for comm in m.communities:
        for i in comm.members:
            if i not in known:
                raise MalformedInputError(f"unknown household id {i}")

    seen: set[int] = set()
    for comm in m.communities:
        tag = f"community of prosumer {comm.prosumer}"
        if len(comm.consumers) < 1 or len(comm) > k:
            return Verdict(False, "size bound", f"{tag} has size {len(comm)} (k={k})")
        if comm.prosumer not in prosumers:
            return Verdict(False, "prosumer role", f"{tag}: {comm.prosumer} is not a prosumer")
        for c in comm.consumers:
            if c == comm.prosumer:
                return Verdict(False, "self-match", f"{tag} lists itself as consumer")
            if c not in consumers:
                return Verdict(False, "consumer role", f"{tag}: {c} is not a consumer")
        for i in comm.members:
            if i in seen:
                return Verdict(False, "disjointness", f"household {i} appears twice")
            seen.add(i)
        for c in comm.consumers:
            if not g.has_edge(comm.prosumer, c):
                return Verdict(False, "delta-feasibility",
                               f"pair ({comm.prosumer}, {c}) is not within {g.delta} m")
    return Verdict(True)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Households plus the shared price and sun series over one horizon."""

    households: tuple[Household, ...]
    prices: TimeSeries
    sun: TimeSeries
    tariff: Tariff = Tariff()
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "households", tuple(sorted(self.households, key=lambda h: h.id)))
        ids = [h.id for h in self.households]
        if len(set(ids)) != len(ids):
            raise MalformedInputError("household ids must be unique")
        horizon = len(self.prices)
        if len(self.sun) != horizon:
            raise MalformedInputError("price and sun series must share the horizon")
        for h in self.households:
            if len(h.consumption) != horizon:
                raise MalformedInputError(f"household {h.id} consumption does not span the horizon")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.households == other.households and self.prices == other.prices
                and self.sun == other.sun and self.tariff == other.tariff
                and dict(self.metadata) == dict(other.metadata))

    @property
    def horizon(self) -> int:
        return len(self.prices)

    @cached_property
    def by_id(self) -> dict[int, Household]:
        return {h.id: h for h in self.households}

    def household(self, hid: int) -> Household:
        try:
            return self.by_id[hid]
        except KeyError:
            raise MalformedInputError(f"unknown household id {hid}") from None

    @property
    def prosumers(self) -> list[Household]:
        return [h for h in self.households if h.is_prosumer]

    @property
    def consumers(self) -> list[Household]:
        return [h for h in self.households if h.is_consumer]

    @property
    def full_window(self) -> Window:
        return (self.prices.start_hour, self.prices.start_hour + self.horizon)
