"""Pairwise weight functions with memoization and computed-weight accounting."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Mapping

from ..errors import DomainError
from ..model import Window
from ..optimizer import Billing

# name -> (memoryfull, saving-based)
WEIGHT_FUNCTIONS = {
    "WA": (False, False),
    "WB": (False, True),
    "WC": (True, False),
    "WD": (True, True),
}


@dataclass(frozen=True)
class WeightConfig:
    function: str = "WB"
    window: Window | None = None

    def __post_init__(self):
        if self.function not in WEIGHT_FUNCTIONS:
            raise DomainError(f"unknown weight function {self.function!r}")

    @property
    def memoryfull(self) -> bool:
        return WEIGHT_FUNCTIONS[self.function][0]


class WeightOracle:
    """Evaluates WA/WB/WC/WD on top of community bills.

    * WA: minus the joint bill of the pair.
    * WB: the pair's saving (stand-alone bills minus the joint bill).
    * WC, WD: the same two quantities for the prosumer's current group plus
      the candidate consumer.

    Every evaluation that misses the cache counts as one computed weight.
    With ``cache=False`` every call is computed and counted.
    """

    def __init__(self, billing: Billing, config: WeightConfig | str = "WB",
                 window: Window | None = None, cache: bool = True):
        if isinstance(config, str):
            config = WeightConfig(config, window)
        self.billing = billing
        self.config = config
        if config.window is not None:
            start, stop = config.window
            lo, hi = billing.scenario.full_window
            if not (lo <= start < stop <= hi):
                raise DomainError(f"weight window {config.window} outside the horizon [{lo}, {hi})")
        self.cache_enabled = cache
        self._cache: dict[tuple, float] = {}
        self._lock = threading.Lock()
        self.computed_count = 0

    @property
    def name(self) -> str:
        return self.config.function

    @property
    def memoryfull(self) -> bool:
        return self.config.memoryfull

    def key(self, p: int, c: int, partial: Iterable[int] = ()) -> tuple:
        group = tuple(sorted(partial)) if self.memoryfull else ()
        return (p, group, c)

    def _compute(self, p: int, c: int, group: tuple[int, ...]) -> float:
        ids = (p,) + group + (c,)
        window = self.config.window
        if WEIGHT_FUNCTIONS[self.name][1]:
            return self.billing.saving(ids, window)
        return -self.billing.bill(ids, window)

    def weight(self, p: int, c: int, partial: Iterable[int] = ()) -> float:
        key = self.key(p, c, partial)
        if self.cache_enabled:
            with self._lock:
                if key in self._cache:
                    return self._cache[key]
        value = self._compute(p, c, key[1])
        with self._lock:
            if not self.cache_enabled:
                self.computed_count += 1
            elif key not in self._cache:
                # a racing thread may have filled the key meanwhile; count it once
                self._cache[key] = value
                self.computed_count += 1
            else:
                value = self._cache[key]
        return value


class TableWeights:
    """Memoryless oracle over a fixed ``{(prosumer, consumer): weight}`` table.

    Mirrors :class:`WeightOracle` accounting: first lookup of a pair counts.
    """

    memoryfull = False

    def __init__(self, table: Mapping[tuple[int, int], float], name: str = "table"):
        self.table = dict(table)
        self.name = name
        self._seen: set[tuple[int, int]] = set()
        self.computed_count = 0

    def weight(self, p: int, c: int, partial: Iterable[int] = ()) -> float:
        if (p, c) not in self._seen:
            self._seen.add((p, c))
            self.computed_count += 1
        return self.table[(p, c)]
