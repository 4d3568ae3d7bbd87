"""Experiment runner: radius/k sweeps, billing-period studies and sensitivity curves.

Every run writes a CSV report plus a ``run.json`` sidecar. With timing
disabled both files are byte-identical across runs with the same spec.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from .datagen import ScenarioConfig, generate
from .errors import DomainError, PeerMatchError
from .fileio import _jsonable, load_scenario, write_matching
from .geo import NeighborGraph, build_neighborhoods, sample_neighborhood
from .matching import (
    WeightOracle,
    brute_force_bhm,
    classic_greedy,
    evaluate_matching,
    exact_assignment,
    order_prosumers,
    round_robin,
    single_pass,
)
from .model import Matching, Scenario, Window, validate_matching
from .optimizer import Billing

log = logging.getLogger(__name__)

DEFAULT_RADII = (100.0, 500.0, 1_000.0, 3_000.0, 20_000.0, 40_000.0)
DEFAULT_KS = (2, 3, 5, 10)
DEFAULT_COMBOS = (
    ("round_robin", "decr", "WA"),
    ("round_robin", "decr", "WB"),
    ("round_robin", "decr", "WC"),
    ("round_robin", "decr", "WD"),
    ("round_robin", "incr", "WB"),
    ("round_robin", "rsc", "WB"),
    ("round_robin", "rsc", "WD"),
    ("single_pass", "decr", "WA"),
    ("single_pass", "decr", "WB"),
    ("single_pass", "incr", "WB"),
    ("single_pass", "rsc", "WB"),
    ("classic_greedy", "-", "WA"),
    ("classic_greedy", "-", "WB"),
)
PERIOD_HOURS = {"year": 8760, "2-month": 1460, "month": 730, "2-week": 336, "week": 168}
ALGORITHMS = ("round_robin", "single_pass", "classic_greedy", "exact_assignment", "brute_force")
ORDERED = ("round_robin", "single_pass")

REPORT_COLUMNS = ["scenario", "algorithm", "order", "weights", "k", "delta_m", "s", "strategy",
                  "saving_eur", "fraction", "weights_computed", "wall_ms"]
PERIOD_COLUMNS = ["scenario", "algorithm", "order", "weights", "k", "delta_m", "s", "strategy",
                  "period", "period_hours", "n_periods", "saving_eur", "fixed_saving_eur",
                  "fixed_per_period_eur", "ratio", "weights_computed", "wall_ms"]


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str | None = None
    config: ScenarioConfig | None = None
    label: str | None = None
    radii: Sequence[float] = DEFAULT_RADII
    ks: Sequence[int] = DEFAULT_KS
    combos: Sequence[tuple[str, str, str]] = DEFAULT_COMBOS
    sampling: tuple[str, int] | None = None
    s_values: Sequence[int] = (5, 10, 20, 40, 80)
    strategies: Sequence[str] = ("random", "greedy")
    periods: Sequence[str | int] = ("week", "2-week", "month", "2-month")
    window: Window | None = None
    seed: int = 0
    workers: int = 1
    record_timing: bool = True
    emit_matchings: bool = True

    def __post_init__(self):
        if not self.radii:
            raise DomainError("at least one search radius is required")
        if not self.combos:
            raise DomainError("at least one algorithm combination is required")
        if self.scenario is None and self.config is None:
            raise DomainError("an experiment needs a scenario path or a scenario config")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.scenario:
            return Path(self.scenario).name
        return f"synthetic-n{self.config.n_households}-seed{self.config.seed}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return _jsonable(d)


@dataclass(frozen=True)
class Cell:
    algorithm: str
    order: str
    weights: str
    k: int
    delta: float
    s: int | None = None
    strategy: str = "none"
    window: Window | None = None

    @property
    def key(self) -> str:
        s = "all" if self.s is None else str(self.s)
        return (f"{self.algorithm}_{self.order}_{self.weights}_k{self.k}"
                f"_d{self.delta:g}_s{s}_{self.strategy}").replace("-", "x")


class Context:
    """Scenario-wide state shared by the cells of one run (graphs, bill cache)."""

    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.billing = Billing(scenario)
        self._graphs: dict[tuple, NeighborGraph] = {}
        self._grand: dict[Window, float] = {}

    def window(self, window: Window | None) -> Window:
        return self.scenario.full_window if window is None else tuple(window)

    def graph(self, delta: float, s: int | None, strategy: str, window: Window) -> NeighborGraph:
        key = (delta, s, strategy, window if strategy == "greedy" else None)
        if key not in self._graphs:
            base_key = (delta, None, "none", None)
            if base_key not in self._graphs:
                torus = self.scenario.metadata.get("torus_size")
                self._graphs[base_key] = build_neighborhoods(self.scenario.households, delta,
                                                             torus_size=torus)
            g = self._graphs[base_key]
            if s is not None:
                totals = None
                if strategy == "greedy":
                    totals = {c: float(self.scenario.household(c).consumption.window(window).sum())
                              for c in g.consumers}
                g = sample_neighborhood(g, s, strategy, self.seed, totals)
            self._graphs[key] = g
        return self._graphs[key]

    def grand_saving(self, window: Window) -> float:
        """Saving of the single community made of every household."""
        if window not in self._grand:
            ids = tuple(h.id for h in self.scenario.households)
            self._grand[window] = self.billing.saving(ids, window)
        return self._grand[window]


def run_matching(ctx: Context, cell: Cell) -> tuple[Matching, NeighborGraph]:
    """Form communities for one cell with weights computed over the cell window."""
    if cell.algorithm not in ALGORITHMS:
        raise DomainError(f"unknown algorithm {cell.algorithm!r}")
    window = ctx.window(cell.window)
    g = ctx.graph(cell.delta, cell.s, cell.strategy, window)
    if cell.algorithm == "brute_force":
        m = brute_force_bhm(g, cell.k, lambda c: ctx.billing.saving(c.members, window))
        return m, g
    oracle = WeightOracle(ctx.billing, cell.weights, window)
    if cell.algorithm in ORDERED:
        order = order_prosumers(ctx.scenario.households, cell.order, window)
        algo = round_robin if cell.algorithm == "round_robin" else single_pass
        m = algo(g, cell.k, order, oracle)
    elif cell.algorithm == "classic_greedy":
        m = classic_greedy(g, cell.k, oracle)
    else:
        m = exact_assignment(g, cell.k, oracle)
    return m, g


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _run_cell(ctx: Context, cell: Cell, spec: ExperimentSpec, out: Path | None) -> dict:
    row = {"scenario": spec.name, "algorithm": cell.algorithm, "order": cell.order,
           "weights": cell.weights, "k": cell.k, "delta_m": float(cell.delta),
           "s": cell.s, "strategy": cell.strategy, "saving_eur": None, "fraction": None,
           "weights_computed": None, "wall_ms": None}
    try:
        started = time.perf_counter()
        m, g = run_matching(ctx, cell)
        wall_ms = (time.perf_counter() - started) * 1e3
        verdict = validate_matching(m, g, cell.k)
        if not verdict:
            raise PeerMatchError(f"invalid matching ({verdict.violation}): {verdict.detail}")
        window = ctx.window(cell.window)
        saving = evaluate_matching(m, ctx.billing, window)
        grand = ctx.grand_saving(window)
        row.update(saving_eur=saving,
                   fraction=saving / grand if grand > 0 else None,
                   weights_computed=m.metadata.get("computed_count", m.metadata.get("hyperedges_evaluated")),
                   wall_ms=round(wall_ms, 3) if spec.record_timing else None)
        if out is not None and spec.emit_matchings:
            write_matching(m, out / "matchings" / f"{cell.key}.csv",
                           {"order": cell.order, "s": cell.s, "strategy": cell.strategy,
                            "window": list(window), "seed": spec.seed,
                            "edges": g.num_edges, "saving_eur": saving})
        return {"row": row, "error": None, "edges": g.num_edges, "matching": m}
    except (PeerMatchError, ValueError) as exc:
        log.warning("cell %s failed: %s", cell.key, exc)
        return {"row": row, "error": f"{type(exc).__name__}: {exc}", "edges": None,
                "matching": None}


def _load(spec: ExperimentSpec) -> Scenario:
    if spec.scenario is not None:
        return load_scenario(spec.scenario)
    return generate(spec.config)


def _cells(spec: ExperimentSpec, sampling_grid: Sequence[tuple[int | None, str]] | None = None) -> list[Cell]:
    if sampling_grid is None:
        sampling_grid = [(None, "none")] if spec.sampling is None else [(spec.sampling[1], spec.sampling[0])]
    cells = []
    for delta in spec.radii:
        for k in spec.ks:
            for algorithm, order, weights in spec.combos:
                for s, strategy in sampling_grid:
                    cells.append(Cell(algorithm, order if algorithm in ORDERED else "-", weights,
                                      int(k), float(delta), s, strategy, spec.window))
    return cells


_WORKER_CTX: Context | None = None


def _init_worker(scenario: Scenario, seed: int):
    global _WORKER_CTX
    _WORKER_CTX = Context(scenario, seed)


def _worker(args):
    cell, spec, out = args
    res = _run_cell(_WORKER_CTX, cell, spec, out)
    res.pop("matching")
    return res


def _execute(ctx: Context, cells: list[Cell], spec: ExperimentSpec, out: Path | None) -> list[dict]:
    if spec.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(spec.workers, initializer=_init_worker,
                                 initargs=(ctx.scenario, spec.seed)) as pool:
            return list(pool.map(_worker, [(c, spec, out) for c in cells]))
    return [_run_cell(ctx, c, spec, out) for c in cells]


def _write_csv(path: Path, columns: list[str], rows: list[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def _write_run_json(path: Path, spec: ExperimentSpec, ctx: Context, kind: str,
                    results: list[dict], extra: dict[str, Any], total_s: float):
    meta = {
        "kind": kind,
        "spec": spec.to_dict(),
        "scenario": {"name": spec.name, "households": len(ctx.scenario.households),
                     "prosumers": len(ctx.scenario.prosumers),
                     "consumers": len(ctx.scenario.consumers),
                     "horizon": ctx.scenario.horizon,
                     "seed": ctx.scenario.metadata.get("seed")},
        "cells": len(results),
        "failed": [{"cell": r["row"], "error": r["error"]} for r in results if r["error"]],
    }
    meta.update(extra)
    if spec.record_timing:
        meta["wall_s"] = round(total_s, 3)
    path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")


@dataclass
class Report:
    rows: list[dict]
    errors: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)
    results: list[dict] = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return not self.errors


def _finish(spec, ctx, kind, results, columns, out, name, extra, started) -> Report:
    rows = [r["row"] for r in results]
    errors = [r["error"] for r in results if r["error"]]
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / name, columns, rows)
        _write_run_json(out / "run.json", spec, ctx, kind, results, extra,
                        time.perf_counter() - started)
    return Report(rows, errors, extra, results)


def run_sweep(spec: ExperimentSpec, out: str | Path | None = None,
              scenario: Scenario | None = None) -> Report:
    """One cell per radius x k x algorithm combination; writes ``report.csv``."""
    started = time.perf_counter()
    ctx = Context(scenario if scenario is not None else _load(spec), spec.seed)
    out = Path(out) if out is not None else None
    results = _execute(ctx, _cells(spec), spec, out)
    window = ctx.window(spec.window)
    extra = {"grand_coalition_saving_eur": ctx.grand_saving(window), "window": list(window)}
    return _finish(spec, ctx, "sweep", results, REPORT_COLUMNS, out, "report.csv", extra, started)


def run_sensitivity(spec: ExperimentSpec, out: str | Path | None = None,
                    scenario: Scenario | None = None) -> Report:
    """Saving against k (unsampled) and against the sample size per strategy."""
    started = time.perf_counter()
    ctx = Context(scenario if scenario is not None else _load(spec), spec.seed)
    out = Path(out) if out is not None else None
    grid: list[tuple[int | None, str]] = [(None, "none")]
    grid += [(int(s), strat) for strat in spec.strategies for s in spec.s_values]
    results = _execute(ctx, _cells(spec, grid), spec, out)
    window = ctx.window(spec.window)
    extra = {"grand_coalition_saving_eur": ctx.grand_saving(window), "window": list(window)}
    return _finish(spec, ctx, "sensitivity", results, REPORT_COLUMNS, out, "sensitivity.csv",
                   extra, started)


def period_windows(window: Window, hours: int) -> list[Window]:
    """Consecutive billing periods covering ``window``; the last one may be shorter."""
    start, stop = window
    if hours < 1:
        raise DomainError("period length must be >= 1 hour")
    if hours > stop - start:
        raise DomainError(f"period of {hours} h is longer than the {stop - start} h window")
    return [(t, min(t + hours, stop)) for t in range(start, stop, hours)]


def _period_hours(period: str | int) -> int:
    if isinstance(period, int) or str(period).isdigit():
        return int(period)
    try:
        return PERIOD_HOURS[period]
    except KeyError:
        raise DomainError(f"unknown billing period {period!r}") from None


def run_periods(spec: ExperimentSpec, out: str | Path | None = None,
                scenario: Scenario | None = None) -> Report:
    """Re-match every billing period and compare with one matching over the whole window.

    For each period length the matching is recomputed on each period's own
    data (weights and evaluation share that window; batteries restart empty).
    ``ratio`` is the summed per-period saving over the saving of the matching
    formed and evaluated on the whole window.
    """
    started = time.perf_counter()
    ctx = Context(scenario if scenario is not None else _load(spec), spec.seed)
    out = Path(out) if out is not None else None
    base = ctx.window(spec.window)
    lengths = [(str(p), _period_hours(p)) for p in spec.periods]
    for _, h in lengths:
        period_windows(base, h)

    results = []
    for cell in _cells(spec):
        cell = replace(cell, window=base)
        fixed = _run_cell(ctx, cell, spec, out)
        for label, hours in lengths:
            row = {c: fixed["row"].get(c) for c in ("scenario", "algorithm", "order", "weights",
                                                    "k", "delta_m", "s", "strategy")}
            row.update(period=label, period_hours=hours, n_periods=None, saving_eur=None,
                       fixed_saving_eur=fixed["row"]["saving_eur"], fixed_per_period_eur=None,
                       ratio=None, weights_computed=None, wall_ms=None)
            error = fixed["error"]
            if error is None:
                try:
                    t0 = time.perf_counter()
                    windows = period_windows(base, hours)
                    total = fixed_split = 0.0
                    computed = 0
                    for w in windows:
                        m, g = run_matching(ctx, replace(cell, window=w))
                        total += evaluate_matching(m, ctx.billing, w)
                        fixed_split += evaluate_matching(fixed["matching"], ctx.billing, w)
                        computed += m.metadata.get("computed_count",
                                                   m.metadata.get("hyperedges_evaluated", 0))
                    fixed_total = fixed["row"]["saving_eur"]
                    row.update(n_periods=len(windows), saving_eur=total,
                               fixed_per_period_eur=fixed_split,
                               ratio=total / fixed_total if fixed_total > 0 else None,
                               weights_computed=computed,
                               wall_ms=round((time.perf_counter() - t0) * 1e3, 3)
                               if spec.record_timing else None)
                except (PeerMatchError, ValueError) as exc:
                    error = f"{type(exc).__name__}: {exc}"
            results.append({"row": row, "error": error})
    extra = {"window": list(base), "periods": {label: h for label, h in lengths}}
    return _finish(spec, ctx, "periods", results, PERIOD_COLUMNS, out, "periods.csv", extra, started)
