"""Command line entry point: ``peermatch <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .datagen import PLACEMENTS, ScenarioConfig, generate, summarize
from .errors import PeerMatchError
from .experiments import (
    ALGORITHMS,
    DEFAULT_COMBOS,
    DEFAULT_KS,
    DEFAULT_RADII,
    Cell,
    Context,
    ExperimentSpec,
    run_matching,
    run_periods,
    run_sensitivity,
    run_sweep,
)
from .fileio import load_scenario, read_matching, save_scenario, write_edges, write_matching
from .geo import build_neighborhoods
from .matching import evaluate_matching
from .model import Tariff, validate_matching
from .optimizer import Billing


def _combo(text: str) -> tuple[str, str, str]:
    parts = text.split(":")
    if len(parts) != 3 or parts[0] not in ALGORITHMS:
        raise argparse.ArgumentTypeError(f"expected algorithm:order:weights, got {text!r}")
    return parts[0], parts[1], parts[2]


def _sampling(text: str) -> tuple[str, int]:
    strategy, _, s = text.partition(":")
    if strategy not in ("random", "greedy") or not s.isdigit():
        raise argparse.ArgumentTypeError(f"expected random:S or greedy:S, got {text!r}")
    return strategy, int(s)


def _add_config_flags(p: argparse.ArgumentParser, seed_required: bool):
    p.add_argument("--seed", type=int, required=seed_required, default=None)
    p.add_argument("--n", dest="n_households", type=int, default=200)
    p.add_argument("--horizon", type=int, default=8760)
    p.add_argument("--pv-share", type=float, default=0.10)
    p.add_argument("--pv-batt-share", type=float, default=0.10)
    p.add_argument("--pv-ratio", type=float, default=1.0, help="annual PV yield / annual consumption")
    p.add_argument("--batt-per-kwp", type=float, default=1.0)
    p.add_argument("--placement", choices=PLACEMENTS, default="town-clusters")
    p.add_argument("--area", type=float, default=60_000.0, help="side of the square area in meters")
    p.add_argument("--towns", type=int, default=12)
    p.add_argument("--jitter", type=float, default=1_000.0)
    p.add_argument("--tax", type=float, default=0.25)
    p.add_argument("--el-tax", type=float, default=0.069)
    p.add_argument("--el-net", type=float, default=0.0058)


def _config(args) -> ScenarioConfig:
    return ScenarioConfig(
        n_households=args.n_households, horizon=args.horizon,
        prosumer_pv_share=args.pv_share, prosumer_pv_batt_share=args.pv_batt_share,
        pv_sizing_ratio=args.pv_ratio, battery_per_kwp=args.batt_per_kwp,
        placement=args.placement, area_m=args.area, n_towns=args.towns,
        town_jitter_m=args.jitter, tariff=Tariff(args.tax, args.el_tax, args.el_net),
        seed=args.seed if args.seed is not None else 0,
    )


def _window(args):
    return tuple(args.window) if args.window else None


def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--scenario", help="scenario directory; otherwise one is generated from the flags")
    _add_config_flags(p, seed_required=False)
    p.add_argument("--label")
    p.add_argument("--radii", type=float, nargs="+", default=list(DEFAULT_RADII))
    p.add_argument("--ks", type=int, nargs="+", default=list(DEFAULT_KS))
    p.add_argument("--combos", type=_combo, nargs="+", default=list(DEFAULT_COMBOS),
                   help="algorithm:order:weights triples, e.g. round_robin:decr:WB")
    p.add_argument("--sample", type=_sampling, help="neighborhood sampling, e.g. random:20")
    p.add_argument("--window", type=int, nargs=2, metavar=("START", "STOP"))
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timing", action="store_true",
                   help="leave wall-time fields empty so reports are byte-identical")
    p.add_argument("--out", required=True)


def _spec(args, **extra) -> ExperimentSpec:
    config = None
    if args.scenario is None:
        if args.seed is None:
            raise PeerMatchError("--seed is required when generating the scenario inline")
        config = _config(args)
    return ExperimentSpec(
        scenario=args.scenario, config=config, label=args.label,
        radii=tuple(args.radii), ks=tuple(args.ks), combos=tuple(args.combos),
        sampling=args.sample, window=_window(args), seed=args.sample_seed,
        workers=args.workers, record_timing=not args.no_timing, **extra,
    )


def cmd_generate(args) -> int:
    scenario = generate(_config(args))
    save_scenario(scenario, args.out)
    print(f"wrote {len(scenario.households)} households to {args.out}")
    return 0


def cmd_summarize(args) -> int:
    report = summarize(load_scenario(args.scenario), args.radii)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_match(args) -> int:
    scenario = load_scenario(args.scenario)
    ctx = Context(scenario, args.sample_seed)
    s, strategy = (args.sample[1], args.sample[0]) if args.sample else (None, "none")
    cell = Cell(args.algorithm, args.order, args.weights, args.k, args.delta, s, strategy,
                _window(args))
    m, g = run_matching(ctx, cell)
    window = ctx.window(cell.window)
    saving = evaluate_matching(m, ctx.billing, window)
    write_matching(m, args.out, {"order": args.order, "s": s, "strategy": strategy,
                                 "window": list(window), "seed": args.sample_seed,
                                 "edges": g.num_edges, "saving_eur": saving},
                  timing=not args.no_timing)
    if args.edges:
        write_edges(g, args.edges)
    print(json.dumps({"communities": len(m), "saving_eur": saving,
                      "weights_computed": m.metadata.get("computed_count")}, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    scenario = load_scenario(args.scenario)
    m = read_matching(args.matching)
    result = {"communities": len(m)}
    if args.delta is not None and args.k is not None:
        g = build_neighborhoods(scenario.households, args.delta,
                                torus_size=scenario.metadata.get("torus_size"))
        verdict = validate_matching(m, g, args.k)
        result["valid"] = verdict.ok
        result["violation"] = verdict.violation
    result["saving_eur"] = evaluate_matching(m, Billing(scenario), _window(args))
    print(json.dumps(result, sort_keys=True))
    return 0 if result.get("valid", True) else 1


def _report_exit(report) -> int:
    for err in report.errors:
        print(f"cell failed: {err}", file=sys.stderr)
    return 0 if report.ok else 1


def cmd_sweep(args) -> int:
    return _report_exit(run_sweep(_spec(args), args.out))


def cmd_periods(args) -> int:
    periods = [int(p) if p.isdigit() else p for p in args.periods]
    return _report_exit(run_periods(_spec(args, periods=tuple(periods)), args.out))


def cmd_sensitivity(args) -> int:
    spec = _spec(args, s_values=tuple(args.s_values), strategies=tuple(args.strategies))
    return _report_exit(run_sensitivity(spec, args.out))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peermatch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic scenario directory")
    _add_config_flags(p, seed_required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("summarize", help="counts and neighborhood statistics")
    p.add_argument("scenario")
    p.add_argument("--radii", type=float, nargs="*", default=[])
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("match", help="form communities with one algorithm")
    p.add_argument("scenario")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="round_robin")
    p.add_argument("--order", choices=("incr", "decr", "rsc", "-"), default="decr")
    p.add_argument("--weights", choices=("WA", "WB", "WC", "WD"), default="WB")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--delta", type=float, default=1_000.0)
    p.add_argument("--sample", type=_sampling)
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--window", type=int, nargs=2, metavar=("START", "STOP"))
    p.add_argument("--edges", help="also write the neighborhood edge list here")
    p.add_argument("--no-timing", action="store_true", help="omit wall time from the sidecar")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", help="global saving of a matching file")
    p.add_argument("scenario")
    p.add_argument("matching")
    p.add_argument("--window", type=int, nargs=2, metavar=("START", "STOP"))
    p.add_argument("--delta", type=float)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="radius x k x algorithm grid")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("periods", help="re-matching per billing period")
    _add_experiment_flags(p)
    p.add_argument("--periods", nargs="+", default=["week", "2-week", "month", "2-month"])
    p.set_defaults(func=cmd_periods)

    p = sub.add_parser("sensitivity", help="saving against k and sample size")
    _add_experiment_flags(p)
    p.add_argument("--s-values", type=int, nargs="+", default=[5, 10, 20, 40, 80])
    p.add_argument("--strategies", nargs="+", choices=("random", "greedy"),
                   default=["random", "greedy"])
    p.set_defaults(func=cmd_sensitivity)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PeerMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
