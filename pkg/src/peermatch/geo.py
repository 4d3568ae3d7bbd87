"""Positions, distances and the prosumer-consumer neighborhood graph."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError

if TYPE_CHECKING:
    from .model import Household

EARTH_RADIUS_M = 6_371_000.0
_MAX_CELLS = 1 << 20


@dataclass(frozen=True)
class GeoPoint:
    """Planar position in meters, optionally remembering its lat/lon origin."""

    x: float
    y: float
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite coordinates ({self.x}, {self.y})")


def distance(a: GeoPoint, b: GeoPoint, torus_size: float | None = None) -> float:
    """Euclidean distance in meters, with optional wraparound on a square torus."""
    dx = abs(a.x - b.x)
    dy = abs(a.y - b.y)
    if torus_size is not None:
        dx = min(dx, torus_size - dx)
        dy = min(dy, torus_size - dy)
    return float(np.hypot(dx, dy))


def project_latlon(coords: Sequence[tuple[float, float]],
                   origin: tuple[float, float] | None = None) -> list[GeoPoint]:
    """Project (lat, lon) degree pairs onto a local equirectangular plane.

    The projection is centred on ``origin`` or, by default, on the centroid of
    the input. At the few tens of kilometers covered by a scenario the
    distortion is well below the search radii of interest.
    """
    if not coords:
        return []
    lats = np.array([c[0] for c in coords], dtype=float)
    lons = np.array([c[1] for c in coords], dtype=float)
    lat0, lon0 = origin if origin is not None else (lats.mean(), lons.mean())
    k = EARTH_RADIUS_M * math.pi / 180.0
    xs = k * (lons - lon0) * math.cos(math.radians(lat0))
    ys = k * (lats - lat0)
    return [GeoPoint(float(x), float(y), float(la), float(lo))
            for x, y, la, lo in zip(xs, ys, lats, lons)]


def torus_expected_degree(n: int, delta: float, side: float) -> float:
    """Mean number of neighbors within ``delta`` for n uniform points on a torus."""
    return (n - 1) * math.pi * (delta / side) ** 2


class GridIndex:
    """Uniform bucket index over planar points for fixed-radius queries.

    Cells are at least ``cell_size`` wide so a query of radius ``<= cell_size``
    only needs the 3x3 block of cells around the query point.
    """

    def __init__(self, xy: np.ndarray, cell_size: float, torus_size: float | None = None):
        if cell_size <= 0:
            raise DomainError("cell size must be positive")
        self.xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        self.torus_size = torus_size
        # wider cells stay correct; this only bounds the integer cell keys
        if torus_size is not None:
            self.ncell = max(1, int(min(torus_size // cell_size, _MAX_CELLS)))
            self.cell = torus_size / self.ncell
        else:
            scale = float(np.abs(self.xy).max()) if len(self.xy) else 1.0
            self.ncell = None
            self.cell = max(cell_size, scale / _MAX_CELLS, 1e-9)
        buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, key in enumerate(map(tuple, self._cells(self.xy))):
            buckets[key].append(i)
        self.buckets = {key: np.array(idx, dtype=np.int64) for key, idx in buckets.items()}

    def _cells(self, xy: np.ndarray) -> np.ndarray:
        cells = np.clip(np.floor(xy / self.cell), -2.0**62, 2.0**62).astype(np.int64)
        if self.ncell is not None:
            cells %= self.ncell
        return cells

    def _block(self, cx: int, cy: int) -> Iterable[tuple[int, int]]:
        offsets = (-1, 0, 1)
        if self.ncell is None:
            return [(cx + i, cy + j) for i in offsets for j in offsets]
        n = self.ncell
        return sorted({((cx + i) % n, (cy + j) % n) for i in offsets for j in offsets})

    def query(self, x: float, y: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Return (indices, distances) of points within ``radius`` of (x, y), sorted by index."""
        if radius > self.cell:
            raise DomainError("query radius exceeds the index cell size")
        cx, cy = (int(v) for v in self._cells(np.array([[x, y]]))[0])
        parts = [self.buckets[c] for c in self._block(cx, cy) if c in self.buckets]
        if not parts:
            return np.empty(0, dtype=np.int64), np.empty(0)
        idx = np.sort(np.concatenate(parts))
        d = _pairwise(np.array([x, y]), self.xy[idx], self.torus_size)
        keep = d <= radius
        return idx[keep], d[keep]


def _pairwise(point: np.ndarray, others: np.ndarray, torus_size: float | None) -> np.ndarray:
    dx = np.abs(others[:, 0] - point[0])
    dy = np.abs(others[:, 1] - point[1])
    if torus_size is not None:
        dx = np.minimum(dx, torus_size - dx)
        dy = np.minimum(dy, torus_size - dy)
    return np.hypot(dx, dy)


@dataclass(frozen=True)
class NeighborGraph:
    """Bipartite graph of prosumer-consumer pairs within the search radius.

    ``adjacency`` maps every prosumer id (including isolated ones) to its
    consumer neighbors sorted by id; ``distances`` holds the length of each edge.
    """

    delta: float
    adjacency: Mapping[int, tuple[int, ...]]
    distances: Mapping[tuple[int, int], float] = field(repr=False)
    consumers: tuple[int, ...] = ()
    torus_size: float | None = None
    sampling: tuple[str, int] | None = None

    @property
    def prosumers(self) -> tuple[int, ...]:
        return tuple(sorted(self.adjacency))

    @property
    def num_edges(self) -> int:
        return sum(len(v) for v in self.adjacency.values())

    @property
    def mean_degree(self) -> float:
        if not self.adjacency:
            return 0.0
        return self.num_edges / len(self.adjacency)

    @property
    def max_degree(self) -> int:
        return max((len(v) for v in self.adjacency.values()), default=0)

    def neighbors(self, p: int) -> tuple[int, ...]:
        return self.adjacency.get(p, ())

    def has_edge(self, p: int, c: int) -> bool:
        return (p, c) in self.distances

    def edges(self) -> list[tuple[int, int]]:
        """All (prosumer, consumer) pairs in prosumer-then-consumer id order."""
        return [(p, c) for p in self.prosumers for c in self.adjacency[p]]

    def edge_rows(self) -> list[tuple[int, int, float]]:
        return [(p, c, self.distances[(p, c)]) for p, c in self.edges()]

    def sampled_edge_cap(self, s: int) -> int:
        """Upper bound on the edge count after capping every list at ``s``."""
        return sum(min(s, len(v)) for v in self.adjacency.values())


def _split_roles(households: Iterable["Household"]):
    prosumers, consumers = [], []
    for h in households:
        if h.is_prosumer:
            prosumers.append(h)
        elif h.is_consumer:
            consumers.append(h)
    prosumers.sort(key=lambda h: h.id)
    consumers.sort(key=lambda h: h.id)
    return prosumers, consumers


def build_neighborhoods(households: Iterable["Household"], delta: float,
                        torus_size: float | None = None,
                        method: str = "grid") -> NeighborGraph:
    """Connect every prosumer to the consumers within ``delta`` meters (inclusive).

    ``method`` is ``"grid"`` (bucket index, cell size delta) or ``"brute"``
    (all pairs); both produce the same edge set.
    """
    if delta < 0 or not math.isfinite(delta):
        raise DomainError(f"search radius must be finite and >= 0, got {delta}")
    if method not in ("grid", "brute"):
        raise DomainError(f"unknown method {method!r}")
    prosumers, consumers = _split_roles(households)
    cons_ids = np.array([c.id for c in consumers], dtype=np.int64)
    cons_xy = np.array([[c.position.x, c.position.y] for c in consumers], dtype=float).reshape(-1, 2)

    adjacency: dict[int, tuple[int, ...]] = {}
    distances: dict[tuple[int, int], float] = {}
    index = None
    if method == "grid" and delta > 0 and len(consumers):
        index = GridIndex(cons_xy, delta, torus_size)
    for p in prosumers:
        point = np.array([p.position.x, p.position.y])
        if not len(consumers):
            idx, d = np.empty(0, dtype=np.int64), np.empty(0)
        elif index is not None:
            idx, d = index.query(point[0], point[1], delta)
        else:
            d_all = _pairwise(point, cons_xy, torus_size)
            idx = np.nonzero(d_all <= delta)[0]
            d = d_all[idx]
        ids = cons_ids[idx]
        order = np.argsort(ids, kind="stable")
        adjacency[p.id] = tuple(int(c) for c in ids[order])
        for c, dist in zip(ids[order], d[order]):
            distances[(p.id, int(c))] = float(dist)
    return NeighborGraph(delta=float(delta), adjacency=adjacency, distances=distances,
                         consumers=tuple(int(c) for c in cons_ids), torus_size=torus_size)


def sample_neighborhood(g: NeighborGraph, s: int, strategy: str = "random",
                        seed: int | None = 0,
                        consumption: Mapping[int, float] | None = None) -> NeighborGraph:
    """Cap every neighborhood at ``s`` consumers.

    ``random`` draws a uniform subset per prosumer from a generator seeded by
    ``(seed, prosumer id)``, so results do not depend on iteration order.
    ``greedy`` keeps the ``s`` consumers with the largest ``consumption``
    value, ties going to the lower id.
    """
    if s < 1:
        raise DomainError("sample size must be >= 1")
    if strategy not in ("random", "greedy"):
        raise DomainError(f"unknown sampling strategy {strategy!r}")
    if strategy == "greedy" and consumption is None:
        raise DomainError("greedy sampling needs per-consumer consumption totals")
    adjacency = {}
    for p, nbrs in g.adjacency.items():
        if len(nbrs) <= s:
            adjacency[p] = nbrs
            continue
        if strategy == "random":
            rng = np.random.default_rng([0 if seed is None else seed, p])
            picked = rng.choice(len(nbrs), size=s, replace=False)
            adjacency[p] = tuple(sorted(nbrs[i] for i in picked))
        else:
            ranked = sorted(nbrs, key=lambda c: (-consumption[c], c))
            adjacency[p] = tuple(sorted(ranked[:s]))
    distances = {(p, c): g.distances[(p, c)] for p, nbrs in adjacency.items() for c in nbrs}
    return NeighborGraph(delta=g.delta, adjacency=adjacency, distances=distances,
                         consumers=g.consumers, torus_size=g.torus_size,
                         sampling=(strategy, s))


def neighbor_counts(xy: np.ndarray, delta: float, torus_size: float | None = None) -> np.ndarray:
    """For every point, the number of *other* points within ``delta``."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if delta <= 0:
        counts = np.zeros(len(xy), dtype=np.int64)
        for i in range(len(xy)):
            counts[i] = int(np.sum(_pairwise(xy[i], xy, torus_size) <= delta)) - 1
        return counts
    index = GridIndex(xy, delta, torus_size)
    return np.array([len(index.query(x, y, delta)[0]) - 1 for x, y in xy], dtype=np.int64)
