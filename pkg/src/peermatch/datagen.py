"""Seeded synthetic scenarios: households, resources, positions, price and sun."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .geo import GeoPoint, build_neighborhoods, neighbor_counts
from .model import Household, Scenario, Tariff, TimeSeries

HOURS_PER_YEAR = 8760
PLACEMENTS = ("town-clusters", "uniform", "torus")


@dataclass(frozen=True)
class ScenarioConfig:
    n_households: int = 200
    horizon: int = HOURS_PER_YEAR
    prosumer_pv_share: float = 0.10
    prosumer_pv_batt_share: float = 0.10
    pv_sizing_ratio: float = 1.0
    battery_per_kwp: float = 1.0
    placement: str = "town-clusters"
    area_m: float = 60_000.0
    n_towns: int = 12
    town_jitter_m: float = 1_000.0
    tariff: Tariff = field(default_factory=Tariff)
    seed: int = 0
    median_annual_kwh: float = 4_000.0
    sigma_log: float = 0.4
    latitude_deg: float = 50.0
    start_day: int = 0
    k: int = 5
    delta_m: float = 1_000.0

    def __post_init__(self):
        if self.n_households < 0:
            raise DomainError("n_households must be >= 0")
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1 hour")
        for name in ("prosumer_pv_share", "prosumer_pv_batt_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1]")
        if self.prosumer_pv_share + self.prosumer_pv_batt_share > 1.0 + 1e-12:
            raise DomainError("prosumer shares sum above 1")
        if self.pv_sizing_ratio < 0 or self.battery_per_kwp < 0:
            raise DomainError("capacity ratios must be >= 0")
        if self.placement not in PLACEMENTS:
            raise DomainError(f"unknown placement {self.placement!r}")
        if self.area_m <= 0 or self.n_towns < 1 or self.town_jitter_m < 0:
            raise DomainError("invalid placement parameters")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        if isinstance(data.get("tariff"), dict):
            data["tariff"] = Tariff(**data["tariff"])
        return cls(**data)


def class_counts(n: int, pv_share: float, batt_share: float) -> tuple[int, int, int]:
    """(PV-only, PV+battery, consumer) head counts; shares are floored."""
    # round first so that e.g. 0.29 * 100 is not floored to 28
    n_pv = math.floor(round(n * pv_share, 9))
    n_batt = math.floor(round(n * batt_share, 9))
    return n_pv, n_batt, n - n_pv - n_batt


def _calendar(horizon: int, start_day: int):
    t = np.arange(horizon)
    hour = t % 24
    doy = (start_day + t // 24) % 365
    return t, hour, doy


def sun_profile(horizon: int, rng: np.random.Generator, latitude_deg: float = 50.0,
                start_day: int = 0) -> np.ndarray:
    """Clear-sky shape times a daily clearness draw, in kWh per kWp, zero at night."""
    _, hour, doy = _calendar(horizon, start_day)
    decl = np.radians(23.45) * np.sin(2 * np.pi * (284 + doy) / 365.0)
    omega = np.radians(15.0 * (hour + 0.5 - 12.0))
    lat = np.radians(latitude_deg)
    sin_elev = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(omega)
    n_days = (horizon + 23) // 24
    clearness = 0.25 + 0.75 * rng.beta(2.0, 1.2, size=n_days)
    day = np.arange(horizon) // 24
    return 0.8 * np.maximum(sin_elev, 0.0) * clearness[day]


def price_profile(horizon: int, rng: np.random.Generator, start_day: int = 0) -> np.ndarray:
    """Wholesale-like €/kWh with winter and twin daily peaks; strictly positive."""
    _, hour, doy = _calendar(horizon, start_day)
    seasonal = 0.010 * np.cos(2 * np.pi * (doy - 15) / 365.0)
    daily = (0.012 * np.exp(-((hour - 8.0) / 2.0) ** 2)
             + 0.016 * np.exp(-((hour - 18.5) / 2.5) ** 2)
             - 0.008 * np.exp(-((hour - 3.0) / 2.5) ** 2))
    n_days = (horizon + 23) // 24
    level = rng.lognormal(0.0, 0.2, size=n_days)[np.arange(horizon) // 24]
    return np.maximum((0.040 + seasonal + daily) * level, 0.005)


def consumption_profile(horizon: int, annual_kwh: float, rng: np.random.Generator,
                        start_day: int = 0) -> np.ndarray:
    """Residential load: diurnal double peak, winter-heavy season, clipped noise."""
    _, hour, doy = _calendar(horizon, start_day)
    morning = rng.uniform(6.5, 8.5)
    evening = rng.uniform(17.5, 20.5)
    diurnal = (0.55 + rng.uniform(0.3, 0.7) * np.exp(-((hour - morning) / 1.5) ** 2)
               + rng.uniform(0.6, 1.2) * np.exp(-((hour - evening) / 2.0) ** 2))
    seasonal = 1.0 + rng.uniform(0.15, 0.35) * np.cos(2 * np.pi * (doy - 15) / 365.0)
    shape = diurnal * seasonal
    shape /= shape.mean()
    noise = np.maximum(1.0 + 0.3 * rng.standard_normal(horizon), 0.0)
    return annual_kwh / HOURS_PER_YEAR * shape * noise


def _positions(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    n, side = config.n_households, config.area_m
    if config.placement in ("uniform", "torus"):
        return rng.uniform(0.0, side, size=(n, 2))
    towns = rng.uniform(0.0, side, size=(config.n_towns, 2))
    sizes = rng.dirichlet(np.full(config.n_towns, 1.5))
    home = rng.choice(config.n_towns, size=n, p=sizes)
    radius = config.town_jitter_m * np.sqrt(rng.uniform(size=n))
    angle = rng.uniform(0.0, 2 * np.pi, size=n)
    return towns[home] + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def generate(config: ScenarioConfig) -> Scenario:
    """Build a scenario; identical configs give identical scenarios."""
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(5)]
    rng_pos, rng_role, rng_cons, rng_sun, rng_price = streams
    n, horizon = config.n_households, config.horizon

    sun = sun_profile(horizon, rng_sun, config.latitude_deg, config.start_day)
    prices = price_profile(horizon, rng_price, config.start_day)
    sun_total = float(sun.sum())
    if config.pv_sizing_ratio > 0 and sun_total <= 0 and n:
        raise DomainError("the horizon has no daylight; PV cannot be sized")

    xy = _positions(config, rng_pos)
    n_pv, n_batt, _ = class_counts(n, config.prosumer_pv_share, config.prosumer_pv_batt_share)
    perm = rng_role.permutation(n)
    role = np.zeros(n, dtype=int)
    role[perm[:n_pv]] = 1
    role[perm[n_pv:n_pv + n_batt]] = 2
    annual = rng_cons.lognormal(math.log(config.median_annual_kwh), config.sigma_log, size=n)

    households = []
    for i in range(n):
        cons = consumption_profile(horizon, float(annual[i]), rng_cons, config.start_day)
        pv = batt = 0.0
        if role[i] and config.pv_sizing_ratio > 0:
            pv = config.pv_sizing_ratio * float(cons.sum()) / sun_total
            if role[i] == 2:
                batt = config.battery_per_kwp * pv
        households.append(Household(i, GeoPoint(float(xy[i, 0]), float(xy[i, 1])),
                                    TimeSeries(cons), pv, batt))

    metadata = {
        "seed": config.seed,
        "k": config.k,
        "delta_m": config.delta_m,
        "placement": config.placement,
        "area_m": config.area_m,
        "torus_size": config.area_m if config.placement == "torus" else None,
        "config": config.to_dict(),
    }
    return Scenario(tuple(households), TimeSeries(prices), TimeSeries(sun), config.tariff, metadata)


def _quantiles(values: Sequence[float]) -> dict[str, float]:
    if not len(values):
        return {}
    qs = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)
    return {f"q{int(q * 100):02d}": float(v) for q, v in zip(qs, np.quantile(values, qs))}


def summarize(scenario: Scenario, radii: Iterable[float] = ()) -> dict:
    """Head counts, consumption quantiles and neighborhood sizes per radius."""
    hh = scenario.households
    pv_only = sum(1 for h in hh if h.is_prosumer and h.battery_capacity == 0)
    pv_batt = sum(1 for h in hh if h.is_prosumer and h.battery_capacity > 0)
    totals = [float(h.consumption.values.sum()) for h in hh]
    report = {
        "households": len(hh),
        "prosumers": pv_only + pv_batt,
        "prosumers_pv_only": pv_only,
        "prosumers_pv_battery": pv_batt,
        "consumers": sum(1 for h in hh if h.is_consumer),
        "horizon_h": scenario.horizon,
        "consumption_kwh": _quantiles(totals),
        "radii": [],
    }
    torus = scenario.metadata.get("torus_size")
    xy = np.array([[h.position.x, h.position.y] for h in hh], dtype=float).reshape(-1, 2)
    for delta in radii:
        g = build_neighborhoods(hh, delta, torus_size=torus)
        sizes = [len(v) for v in g.adjacency.values()]
        counts = neighbor_counts(xy, delta, torus) if len(xy) else np.zeros(0)
        hist = np.bincount(sizes) if sizes else np.zeros(0, dtype=int)
        report["radii"].append({
            "delta_m": float(delta),
            "edges": g.num_edges,
            "mean_degree": g.mean_degree,
            "max_degree": g.max_degree,
            "neighborhood_sizes": _quantiles(sizes),
            "histogram": [int(x) for x in hist],
            "mean_all_pairs_degree": float(counts.mean()) if len(counts) else 0.0,
        })
    return report
