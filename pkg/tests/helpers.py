"""Small hand-built scenarios shared by the test modules."""

from __future__ import annotations

import numpy as np

from peermatch.geo import GeoPoint
from peermatch.model import Household, Scenario, Tariff, TimeSeries

REFERENCE_TARIFF = Tariff(tax=0.25, el_tax=0.069, el_net=0.0058)


def household(hid, cons, pv=0.0, batt=0.0, x=0.0, y=0.0):
    return Household(hid, GeoPoint(float(x), float(y)), TimeSeries(cons), pv, batt)


def scenario(households, prices, sun, tariff=REFERENCE_TARIFF, **metadata):
    return Scenario(tuple(households), TimeSeries(prices), TimeSeries(sun), tariff, metadata)


def random_scenario(rng: np.random.Generator, n_prosumers: int, n_consumers: int,
                    horizon: int = 24, side: float = 1_000.0, battery_prob: float = 0.5):
    """Random small scenario; prosumer ids come first, then consumer ids."""
    hours = np.arange(horizon) % 24
    sun = np.clip(np.sin(np.pi * (hours - 6) / 12), 0, None) * rng.uniform(0.5, 1.0, horizon)
    prices = rng.uniform(0.02, 0.3, horizon)
    hh = []
    for i in range(n_prosumers + n_consumers):
        base = rng.uniform(0.1, 1.5)
        cons = base * rng.uniform(0.2, 2.0, horizon)
        x, y = rng.uniform(0, side, 2)
        if i < n_prosumers:
            pv = rng.uniform(0.5, 4.0)
            batt = rng.uniform(0.5, 6.0) if rng.uniform() < battery_prob else 0.0
            hh.append(household(i, cons, pv, batt, x, y))
        else:
            hh.append(household(i, cons, 0.0, 0.0, x, y))
    return scenario(hh, prices, sun)
