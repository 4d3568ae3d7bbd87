"""Round robin, single pass and classic greedy matching procedures.

All three consume a :class:`~peermatch.geo.NeighborGraph` and an oracle
exposing ``weight(p, c, partial)``, ``computed_count``, ``memoryfull`` and
``name``. Ties in every argmax or sort go to the lower id.
"""

from __future__ import annotations

import time
from typing import Iterable, Sequence

import numpy as np

from ..errors import ContractError, DomainError
from ..geo import NeighborGraph
from ..model import Community, Household, Matching, Window

ORDER_POLICIES = ("incr", "decr", "rsc")


def order_prosumers(households: Iterable[Household], policy: str,
                    window: Window | None = None) -> list[int]:
    """Processing order of the prosumers among ``households``.

    ``incr``/``decr`` sort by mean hourly consumption over ``window``; ``rsc``
    sorts by PV kWp plus battery kWh, largest first. Equal scores keep
    ascending id.
    """
    if policy not in ORDER_POLICIES:
        raise DomainError(f"unknown order policy {policy!r}")
    prosumers = [h for h in households if h.is_prosumer]
    if policy == "rsc":
        return [h.id for h in sorted(prosumers, key=lambda h: (-h.resources, h.id))]
    avg = {h.id: float(np.mean(h.consumption.window(window))) for h in prosumers}
    sign = 1 if policy == "incr" else -1
    return sorted(avg, key=lambda i: (sign * avg[i], i))


def _sequence(g: NeighborGraph, order: Sequence[int] | None) -> list[int]:
    """Graph prosumers in ``order``; prosumers missing from it follow in id order."""
    known = set(g.adjacency)
    seq = [] if order is None else [p for p in order if p in known]
    if len(set(seq)) != len(seq):
        raise DomainError("processing order lists a prosumer twice")
    listed = set(seq)
    return seq + [p for p in sorted(known) if p not in listed]


def _check_k(k: int):
    if k < 2:
        raise DomainError("communities need k >= 2")


def _best(candidates, scores):
    return min(candidates, key=lambda j: (-scores[j], j))


def _finish(groups, picks, oracle, count0, algorithm, g, k, started) -> Matching:
    comms = []
    for p, cs in groups.items():
        if cs:
            pairs = sorted(zip(cs, picks[p]))
            comms.append(Community(p, tuple(c for c, _ in pairs), tuple(w for _, w in pairs)))
    return Matching(tuple(comms), {
        "algorithm": algorithm,
        "weights": oracle.name,
        "delta_m": g.delta,
        "k": k,
        "computed_count": oracle.computed_count - count0,
        "wall_s": time.perf_counter() - started,
    })


def round_robin(g: NeighborGraph, k: int, order: Sequence[int] | None, oracle) -> Matching:
    """Give every active prosumer one consumer per pass until all are saturated.

    A prosumer leaves the rotation once it holds k-1 consumers or has no
    unmatched neighbor left. With a single candidate it is taken without
    evaluating any weight.
    """
    _check_k(k)
    started = time.perf_counter()
    count0 = oracle.computed_count
    active = _sequence(g, order)
    groups = {p: [] for p in active}
    picks = {p: [] for p in active}
    taken: set[int] = set()
    while active:
        survivors = []
        for i in active:
            avail = [j for j in g.neighbors(i) if j not in taken]
            if not avail or len(groups[i]) == k - 1:
                continue
            if len(avail) > 1:
                scores = {j: oracle.weight(i, j, groups[i]) for j in avail}
                pick = _best(avail, scores)
                picks[i].append(scores[pick])
            else:
                pick = avail[0]
                picks[i].append(float("nan"))
            taken.add(pick)
            groups[i].append(pick)
            survivors.append(i)
        active = survivors
    return _finish(groups, picks, oracle, count0, "round_robin", g, k, started)


def single_pass(g: NeighborGraph, k: int, order: Sequence[int] | None, oracle) -> Matching:
    """Visit prosumers once; each takes its k-1 best unmatched neighbors.

    Weights are only evaluated when at least k neighbors are still free;
    otherwise the whole free neighborhood is taken as is.
    """
    _check_k(k)
    started = time.perf_counter()
    count0 = oracle.computed_count
    seq = _sequence(g, order)
    groups = {p: [] for p in seq}
    picks = {p: [] for p in seq}
    taken: set[int] = set()
    for i in seq:
        avail = [j for j in g.neighbors(i) if j not in taken]
        if len(avail) >= k:
            scores = {j: oracle.weight(i, j, groups[i]) for j in avail}
            ranked = sorted(avail, key=lambda j: (-scores[j], j))[: k - 1]
            groups[i] = ranked
            picks[i] = [scores[j] for j in ranked]
        else:
            groups[i] = avail
            picks[i] = [float("nan")] * len(avail)
        taken.update(groups[i])
    return _finish(groups, picks, oracle, count0, "single_pass", g, k, started)


def classic_greedy(g: NeighborGraph, k: int, oracle) -> Matching:
    """Evaluate every edge, then accept pairs by decreasing weight while feasible."""
    _check_k(k)
    if oracle.memoryfull:
        raise ContractError("classic greedy precomputes pairwise weights; use WA or WB")
    started = time.perf_counter()
    count0 = oracle.computed_count
    scored = [(-oracle.weight(p, c, ()), p, c) for p, c in g.edges()]
    scored.sort()
    groups = {p: [] for p in g.prosumers}
    picks = {p: [] for p in g.prosumers}
    taken: set[int] = set()
    for neg, p, c in scored:
        if len(groups[p]) < k - 1 and c not in taken:
            taken.add(c)
            groups[p].append(c)
            picks[p].append(-neg)
    return _finish(groups, picks, oracle, count0, "classic_greedy", g, k, started)
