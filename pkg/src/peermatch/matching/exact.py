"""Exact baselines: the pairwise assignment relaxation and exhaustive search."""

from __future__ import annotations

import time
from functools import lru_cache
from itertools import combinations
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import ContractError, InstanceTooLargeError
from ..geo import NeighborGraph
from ..model import Community, Matching

_TIE_EPS = 1e-12


def exact_assignment(g: NeighborGraph, k: int, oracle) -> Matching:
    """Maximize the sum of pairwise weights with at most k-1 consumers per prosumer.

    Each prosumer is replicated k-1 times and the resulting one-to-one
    assignment is solved exactly. Pairs with non-positive weight are never
    worth forming and stay unmatched, so no weight shifting is needed.
    """
    if oracle.memoryfull:
        raise ContractError("the assignment reduction needs memoryless weights")
    started = time.perf_counter()
    count0 = oracle.computed_count
    prosumers = g.prosumers
    consumers = sorted({c for p in prosumers for c in g.neighbors(p)})
    col = {c: j for j, c in enumerate(consumers)}
    slots = [p for p in prosumers for _ in range(k - 1)]
    gain = np.zeros((len(slots), len(consumers)))
    for r, p in enumerate(slots):
        for c in g.neighbors(p):
            gain[r, col[c]] = max(oracle.weight(p, c, ()), 0.0)
    groups: dict[int, list[int]] = {}
    weights: dict[int, list[float]] = {}
    if gain.size:
        rows, cols = linear_sum_assignment(gain, maximize=True)
        for r, j in zip(rows, cols):
            if gain[r, j] > 0:
                p = slots[r]
                groups.setdefault(p, []).append(consumers[j])
                weights.setdefault(p, []).append(float(gain[r, j]))
    comms = []
    for p, cs in groups.items():
        pairs = sorted(zip(cs, weights[p]))
        comms.append(Community(p, tuple(c for c, _ in pairs), tuple(w for _, w in pairs)))
    return Matching(tuple(comms), {
        "algorithm": "exact_assignment",
        "weights": oracle.name,
        "delta_m": g.delta,
        "k": k,
        "computed_count": oracle.computed_count - count0,
        "wall_s": time.perf_counter() - started,
    })


def brute_force_bhm(g: NeighborGraph, k: int, hyperedge_weight: Callable[[Community], float],
                    max_vertices: int = 12) -> Matching:
    """Maximum-weight k-bounded bipartite hypergraph matching by exhaustive search.

    Searches over prosumers in id order with the set of already used
    consumers as state, so each hyperedge weight is requested at most once.
    Among optimal matchings the lexicographically smallest list of
    ``(prosumer, *consumers)`` tuples wins.
    """
    prosumers = g.prosumers
    n_vertices = len(prosumers) + len(g.consumers)
    if n_vertices > max_vertices:
        raise InstanceTooLargeError(
            f"{n_vertices} vertices exceed the exhaustive-search guard of {max_vertices}")
    started = time.perf_counter()
    weight_cache: dict[tuple[int, ...], float] = {}

    def w(key):
        if key not in weight_cache:
            weight_cache[key] = float(hyperedge_weight(Community(key[0], key[1:])))
        return weight_cache[key]

    @lru_cache(maxsize=None)
    def best(i: int, used: frozenset) -> tuple[float, tuple]:
        if i == len(prosumers):
            return 0.0, ()
        p = prosumers[i]
        value, key = best(i + 1, used)
        avail = [c for c in g.neighbors(p) if c not in used]
        for size in range(1, min(k - 1, len(avail)) + 1):
            for group in combinations(avail, size):
                edge = (p,) + group
                sub_value, sub_key = best(i + 1, used | frozenset(group))
                cand_value, cand_key = w(edge) + sub_value, (edge,) + sub_key
                if cand_value > value + _TIE_EPS or (
                        abs(cand_value - value) <= _TIE_EPS and cand_key < key):
                    value, key = cand_value, cand_key
        return value, key

    value, key = best(0, frozenset())
    comms = tuple(Community(e[0], e[1:]) for e in key)
    return Matching(comms, {
        "algorithm": "brute_force",
        "weights": "saving",
        "delta_m": g.delta,
        "k": k,
        "objective": value,
        "hyperedges_evaluated": len(weight_cache),
        "wall_s": time.perf_counter() - started,
    })
