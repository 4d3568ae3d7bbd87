"""Electricity bills of households and communities.

Consumers and PV-only prosumers have closed-form bills. With a battery the
bill is the optimum of a small linear program over the billing window; two
exact routes are provided:

* ``"chain"`` (default): backward induction on the value function of the
  battery level. That function is convex and piecewise linear on
  ``[0, B]``; one hour of trading clips its slopes to ``[-buy, -sell]`` and
  shifts it by the hour's net production, so the whole window costs O(T)
  amortized deque operations and yields a buy-up-to / sell-down-to policy.
* ``"lp"``: the same program handed to HiGHS through :func:`scipy.optimize.linprog`.
"""

from __future__ import annotations

import csv
import io
import threading
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import ContractError, DomainError, MalformedInputError, SolverError
from .model import Household, Scenario, Tariff, TimeSeries, Window

_LENGTH_TOL = 1e-12


def hourly_cost(el_in: float, el_out: float, price_t: float, tariff: Tariff) -> float:
    """Cost in € of buying ``el_in`` and selling ``el_out`` kWh during one hour."""
    if el_in < 0 or el_out < 0:
        raise DomainError("energy flows must be >= 0")
    return el_in * tariff.buy_price(price_t) - el_out * tariff.sell_price(price_t)


@dataclass(frozen=True, eq=False)
class DispatchResult:
    bill: float
    el_in: np.ndarray
    el_out: np.ndarray
    bat: np.ndarray
    start_hour: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hour", "el_in", "el_out", "bat"])
        for i, (a, b, c) in enumerate(zip(self.el_in, self.el_out, self.bat)):
            w.writerow([self.start_hour + i, repr(float(a)), repr(float(b)), repr(float(c))])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class VirtualHousehold:
    """A community billed as one prosumer with pooled demand and resources."""

    members: tuple[int, ...]
    consumption: TimeSeries
    pv_capacity: float
    battery_capacity: float

    @property
    def id(self) -> tuple[int, ...]:
        return self.members


def aggregate_community(members: Iterable[Household]) -> Household | VirtualHousehold:
    members = sorted(members, key=lambda h: h.id)
    if not members:
        raise MalformedInputError("cannot aggregate an empty community")
    if len(members) == 1:
        return members[0]
    base = members[0].consumption
    for h in members[1:]:
        if len(h.consumption) != len(base) or h.consumption.start_hour != base.start_hour:
            raise MalformedInputError("community members have mismatched horizons")
    cons = np.sum([h.consumption.values for h in members], axis=0)
    return VirtualHousehold(
        members=tuple(h.id for h in members),
        consumption=TimeSeries(cons, base.start_hour),
        pv_capacity=float(sum(h.pv_capacity for h in members)),
        battery_capacity=float(sum(h.battery_capacity for h in members)),
    )


def _grid_prices(prices: TimeSeries, tariff: Tariff, window: Window | None):
    p = prices.window(window)
    return tariff.buy_price(p), tariff.sell_price(p)


def _window_of(series: TimeSeries, window: Window | None) -> Window:
    if window is None:
        return (series.start_hour, series.start_hour + len(series))
    return window


def bill_consumer(consumption: TimeSeries, prices: TimeSeries, tariff: Tariff,
                  window: Window | None = None) -> float:
    window = _window_of(prices, window)
    buy, _ = _grid_prices(prices, tariff, window)
    return float(np.dot(consumption.window(window), buy))


def net_production(h, sun: TimeSeries, window: Window) -> np.ndarray:
    """Hourly generation minus consumption in kWh over ``window``."""
    return h.pv_capacity * sun.window(window) - h.consumption.window(window)


def _pv_only_bill(net: np.ndarray, buy: np.ndarray, sell: np.ndarray) -> float:
    return float(np.dot(np.maximum(-net, 0.0), buy) - np.dot(np.maximum(net, 0.0), sell))


def bill_pv_only(h, sun: TimeSeries, prices: TimeSeries, tariff: Tariff,
                 window: Window | None = None) -> float:
    """Bill of a household without storage: self-consume first, trade the rest."""
    if h.battery_capacity > 0:
        raise ContractError("household has a battery; use bill_battery")
    window = _window_of(prices, window)
    buy, sell = _grid_prices(prices, tariff, window)
    return _pv_only_bill(net_production(h, sun, window), buy, sell)


def _chain_policy(net, buy, sell, capacity):
    """Backward pass. Returns per-hour (buy-up-to, sell-down-to) levels and F_0 pieces."""
    T = len(net)
    lo = np.empty(T)
    hi = np.empty(T)
    tol = _LENGTH_TOL * max(1.0, capacity)
    # value of the remaining hours as a function of the battery level entering
    # them: F(0) = v0, then consecutive [length, slope] pieces, slopes ascending
    pieces = deque([[capacity, 0.0]])
    v0 = 0.0

    for t in range(T - 1, -1, -1):
        nb, ns = -buy[t], -sell[t]

        a = acc = 0.0
        while pieces and pieces[0][1] < nb:
            length, slope = pieces.popleft()
            a += length
            acc += length * slope
        if a > 0:
            v0 += acc - nb * a
            if pieces and pieces[0][1] == nb:
                pieces[0][0] += a
            else:
                pieces.appendleft([a, nb])
        c = 0.0
        while pieces and pieces[-1][1] > ns:
            c += pieces.pop()[0]
        if c > 0:
            if pieces and pieces[-1][1] == ns:
                pieces[-1][0] += c
            else:
                pieces.append([c, ns])
        lo[t] = min(max(a, 0.0), capacity)
        hi[t] = min(max(capacity - c, lo[t]), capacity)

        x = net[t]
        if x > 0:
            if pieces and pieces[-1][1] == ns:
                pieces[-1][0] += x
            else:
                pieces.append([x, ns])
            r = x
            while r > tol and pieces:
                length, slope = pieces[0]
                if length <= r + tol:
                    pieces.popleft()
                    v0 += length * slope
                    r -= length
                else:
                    pieces[0][0] = length - r
                    v0 += r * slope
                    r = 0.0
        elif x < 0:
            r = -x
            v0 += buy[t] * r
            if pieces and pieces[0][1] == nb:
                pieces[0][0] += r
            else:
                pieces.appendleft([r, nb])
            while r > tol and pieces:
                length = pieces[-1][0]
                if length <= r + tol:
                    pieces.pop()
                    r -= length
                else:
                    pieces[-1][0] = length - r
                    r = 0.0
    return lo, hi, v0, pieces


def _value_at(v0, pieces, level):
    value, left = v0, level
    for length, slope in pieces:
        step = min(length, left)
        value += step * slope
        left -= step
        if left <= 0:
            break
    return value


def solve_dispatch_chain(net, buy, sell, capacity, initial_soc=0.0):
    """Exact battery schedule by backward induction; returns (bill, el_in, el_out, bat)."""
    net = np.asarray(net, dtype=float)
    lo, hi, v0, pieces = _chain_policy(net, buy, sell, capacity)
    T = len(net)
    el_in = np.zeros(T)
    el_out = np.zeros(T)
    bat = np.zeros(T)
    level = initial_soc
    for t in range(T):
        y = level + net[t]
        level = min(max(y, lo[t]), hi[t])
        if level > y:
            el_in[t] = level - y
        elif level < y:
            el_out[t] = y - level
        bat[t] = level
    bill = float(np.dot(el_in, buy) - np.dot(el_out, sell))
    expected = _value_at(v0, pieces, initial_soc)
    if abs(bill - expected) > 1e-6 * max(1.0, abs(bill)):
        raise SolverError(f"schedule cost {bill} disagrees with value function {expected}")
    return bill, el_in, el_out, bat


def solve_dispatch_lp(net, buy, sell, capacity, initial_soc=0.0):
    """Same program through HiGHS; the returned schedule never buys and sells in one hour."""
    net = np.asarray(net, dtype=float)
    T = len(net)
    cost = np.concatenate([buy, -np.asarray(sell), np.zeros(T)])
    eye = sp.identity(T, format="csr")
    shift = sp.eye(T, k=-1, format="csr")
    # bat_t - bat_{t-1} - in_t + out_t = x_t
    a_eq = sp.hstack([-eye, eye, eye - shift], format="csr")
    b_eq = net.copy()
    b_eq[0] += initial_soc
    bounds = [(0, None)] * (2 * T) + [(0, capacity)] * T
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        raise SolverError("dispatch LP reported infeasible; this cannot happen with unbounded purchases")
    if res.status != 0:
        raise SolverError(f"dispatch LP did not converge: {res.message}")
    el_in, el_out, bat = res.x[:T], res.x[T:2 * T], res.x[2 * T:]
    d = el_in - el_out
    el_in, el_out = np.maximum(d, 0.0), np.maximum(-d, 0.0)
    bill = float(np.dot(el_in, buy) - np.dot(el_out, sell))
    return bill, el_in, el_out, np.clip(bat, 0.0, capacity)


_SOLVERS = {"chain": solve_dispatch_chain, "lp": solve_dispatch_lp}


def bill_battery(h, sun: TimeSeries, prices: TimeSeries, tariff: Tariff,
                 window: Window | None = None, initial_soc: float = 0.0,
                 method: str = "chain") -> DispatchResult:
    """Minimum bill over ``window`` for a household or community with storage.

    The battery starts at ``initial_soc`` kWh and its final level is free.
    """
    capacity = float(h.battery_capacity)
    if capacity < 0:
        raise DomainError("battery capacity must be >= 0")
    if not 0 <= initial_soc <= capacity:
        raise DomainError(f"initial state of charge {initial_soc} outside [0, {capacity}]")
    try:
        solver = _SOLVERS[method]
    except KeyError:
        raise DomainError(f"unknown dispatch method {method!r}") from None
    window = _window_of(prices, window)
    buy, sell = _grid_prices(prices, tariff, window)
    net = net_production(h, sun, window)
    if capacity == 0:
        el_in, el_out = np.maximum(-net, 0.0), np.maximum(net, 0.0)
        bill = float(np.dot(el_in, buy) - np.dot(el_out, sell))
        return DispatchResult(bill, el_in, el_out, np.zeros(len(net)), window[0])
    bill, el_in, el_out, bat = solver(net, buy, sell, capacity, initial_soc)
    return DispatchResult(bill, el_in, el_out, bat, window[0])


def household_bill(h, sun: TimeSeries, prices: TimeSeries, tariff: Tariff,
                   window: Window | None = None, method: str = "chain") -> float:
    """Optimal bill of any household or virtual household, picking the cheapest exact route."""
    if h.battery_capacity > 0:
        return bill_battery(h, sun, prices, tariff, window, method=method).bill
    if h.pv_capacity > 0:
        return bill_pv_only(h, sun, prices, tariff, window)
    return bill_consumer(h.consumption, prices, tariff, window)


class Billing:
    """Bills and savings of household groups within one scenario.

    Individual bills are memoized per ``(id, window)`` since every saving and
    every saving-based weight reuses them. Safe to share between threads.
    """

    def __init__(self, scenario: Scenario, method: str = "chain"):
        self.scenario = scenario
        self.method = method
        self._individual: dict[tuple[int, Window], float] = {}
        self._lock = threading.Lock()

    def _resolve(self, window: Window | None) -> Window:
        return self.scenario.full_window if window is None else tuple(window)

    def bill(self, ids: Sequence[int], window: Window | None = None) -> float:
        """Joint optimal bill of the households ``ids`` acting as one community."""
        window = self._resolve(window)
        if len(ids) == 1:
            return self.individual_bill(ids[0], window)
        members = [self.scenario.household(i) for i in ids]
        s = self.scenario
        return household_bill(aggregate_community(members), s.sun, s.prices, s.tariff,
                              window, self.method)

    def individual_bill(self, hid: int, window: Window | None = None) -> float:
        window = self._resolve(window)
        key = (hid, window)
        with self._lock:
            if key in self._individual:
                return self._individual[key]
        s = self.scenario
        value = household_bill(s.household(hid), s.sun, s.prices, s.tariff, window, self.method)
        with self._lock:
            self._individual.setdefault(key, value)
        return value

    def saving(self, ids: Sequence[int], window: Window | None = None) -> float:
        """Sum of stand-alone bills minus the joint bill."""
        window = self._resolve(window)
        if len(ids) <= 1:
            return 0.0
        alone = sum(self.individual_bill(i, window) for i in ids)
        return alone - self.bill(ids, window)


def community_saving(community, billing: Billing, window: Window | None = None) -> float:
    """Cost saving of a :class:`~peermatch.model.Community` (or any member list)."""
    ids = community.members if hasattr(community, "members") else tuple(community)
    return billing.saving(tuple(ids), window)
