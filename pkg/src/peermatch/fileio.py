"""Scenario, matching and graph files.

A scenario directory holds::

    scenario.json     horizon, tariff, seed, default k and radius, placement
    households.csv    id,x_m,y_m,pv_kwp,batt_kwh
    consumption.csv   id,hour,kwh
    price.csv         hour,value
    sun.csv           hour,value

Floats are written with ``repr`` so a load returns the exact same values.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import pandas as pd

from .errors import MalformedInputError
from .geo import GeoPoint, NeighborGraph
from .model import Community, Household, Matching, Scenario, Tariff, TimeSeries

FORMAT_VERSION = 1


def _num(v) -> str:
    return repr(float(v))


def _dump_json(data: Mapping[str, Any], path: Path):
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def save_scenario(scenario: Scenario, directory: str | Path) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    meta = dict(scenario.metadata)
    meta.update({
        "format_version": FORMAT_VERSION,
        "horizon": scenario.horizon,
        "tariff": {"tax": scenario.tariff.tax, "el_tax": scenario.tariff.el_tax,
                   "el_net": scenario.tariff.el_net},
    })
    _dump_json(meta, out / "scenario.json")

    with open(out / "households.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x_m", "y_m", "pv_kwp", "batt_kwh"])
        for h in scenario.households:
            w.writerow([h.id, _num(h.position.x), _num(h.position.y),
                        _num(h.pv_capacity), _num(h.battery_capacity)])

    with open(out / "consumption.csv", "w", newline="") as fh:
        fh.write("id,hour,kwh\n")
        for h in scenario.households:
            fh.write("".join(f"{h.id},{t},{v!r}\n" for t, v in enumerate(h.consumption.values.tolist())))

    for name, series in (("price.csv", scenario.prices), ("sun.csv", scenario.sun)):
        with open(out / name, "w", newline="") as fh:
            fh.write("hour,value\n")
            fh.write("".join(f"{t},{v!r}\n" for t, v in enumerate(series.values.tolist())))
    return out


def _read_series(path: Path, horizon: int) -> np.ndarray:
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns) != ["hour", "value"]:
        raise MalformedInputError(f"{path.name}: expected columns hour,value")
    if not np.array_equal(df["hour"].to_numpy(), np.arange(horizon)):
        raise MalformedInputError(f"{path.name}: hours must run 0..{horizon - 1}")
    return df["value"].to_numpy(dtype=float)


def load_scenario(directory: str | Path) -> Scenario:
    src = Path(directory)
    if not (src / "scenario.json").exists():
        raise MalformedInputError(f"no scenario.json in {src}")
    meta = json.loads((src / "scenario.json").read_text())
    horizon = int(meta.pop("horizon"))
    tariff = Tariff(**meta.pop("tariff"))
    meta.pop("format_version", None)

    prices = _read_series(src / "price.csv", horizon)
    sun = _read_series(src / "sun.csv", horizon)
    hh = pd.read_csv(src / "households.csv", float_precision="round_trip")
    cons = pd.read_csv(src / "consumption.csv", float_precision="round_trip")
    if list(cons.columns) != ["id", "hour", "kwh"]:
        raise MalformedInputError("consumption.csv: expected columns id,hour,kwh")
    cons = cons.sort_values(["id", "hour"], kind="stable")
    by_id = {int(i): g for i, g in cons.groupby("id", sort=True)}

    households = []
    for row in hh.itertuples(index=False):
        hid = int(row.id)
        if hid not in by_id:
            raise MalformedInputError(f"household {hid} has no consumption rows")
        rows = by_id[hid]
        if not np.array_equal(rows["hour"].to_numpy(), np.arange(horizon)):
            raise MalformedInputError(f"household {hid}: consumption hours must run 0..{horizon - 1}")
        households.append(Household(hid, GeoPoint(float(row.x_m), float(row.y_m)),
                                    TimeSeries(rows["kwh"].to_numpy(dtype=float)),
                                    float(row.pv_kwp), float(row.batt_kwh)))
    unknown = set(by_id) - {h.id for h in households}
    if unknown:
        raise MalformedInputError(f"consumption rows for unknown households {sorted(unknown)[:5]}")
    return Scenario(tuple(households), TimeSeries(prices), TimeSeries(sun), tariff, meta)


def write_matching(m: Matching, path: str | Path, metadata: Mapping[str, Any] | None = None,
                   timing: bool = False) -> Path:
    """Write ``community_id,prosumer_id,consumer_ids`` rows plus a ``.json`` sidecar.

    The sidecar omits ``wall_s`` unless ``timing`` is set, so repeated runs
    produce identical files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["community_id", "prosumer_id", "consumer_ids"])
        for i, c in enumerate(m.communities):
            w.writerow([i, c.prosumer, ";".join(str(j) for j in c.consumers)])
    meta = {k: v for k, v in dict(m.metadata).items() if timing or k != "wall_s"}
    if metadata:
        meta.update(metadata)
    _dump_json(_jsonable(meta), path.with_suffix(".json"))
    return path


def read_matching(path: str | Path) -> Matching:
    path = Path(path)
    comms = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["community_id", "prosumer_id", "consumer_ids"]:
            raise MalformedInputError(f"{path.name}: unexpected header {reader.fieldnames}")
        for row in reader:
            ids = [int(x) for x in row["consumer_ids"].split(";") if x]
            comms.append(Community(int(row["prosumer_id"]), tuple(ids)))
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return Matching(tuple(comms), meta)


def write_edges(g: NeighborGraph, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["prosumer_id", "consumer_id", "distance_m"])
        for p, c, d in g.edge_rows():
            w.writerow([p, c, _num(d)])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj
