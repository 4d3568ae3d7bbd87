import csv

import pytest

from peermatch.datagen import ScenarioConfig, generate
from peermatch.errors import DomainError
from peermatch.experiments import (
    REPORT_COLUMNS,
    Cell,
    Context,
    ExperimentSpec,
    period_windows,
    run_matching,
    run_periods,
    run_sensitivity,
    run_sweep,
)
from peermatch.fileio import load_scenario, read_matching, save_scenario
from peermatch.matching import evaluate_matching
from peermatch.optimizer import Billing

CONFIG = ScenarioConfig(seed=7, n_households=60, horizon=24 * 7, placement="uniform", area_m=4_000)
COMBOS = (("round_robin", "decr", "WB"), ("round_robin", "rsc", "WD"),
          ("single_pass", "incr", "WA"), ("classic_greedy", "-", "WB"),
          ("exact_assignment", "-", "WB"))


@pytest.fixture(scope="module")
def scenario():
    return generate(CONFIG)


def spec(**kw):
    base = dict(config=CONFIG, radii=(500.0, 1500.0), ks=(2, 4), combos=COMBOS, record_timing=False)
    base.update(kw)
    return ExperimentSpec(**base)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestSweep:
    def test_zero_radius_gives_zero_saving(self, scenario):
        report = run_sweep(spec(radii=(0.0,)), scenario=scenario)
        assert report.ok
        assert all(r["saving_eur"] == 0 for r in report.rows)

    def test_cells_and_bounds(self, scenario, tmp_path):
        report = run_sweep(spec(), tmp_path, scenario=scenario)
        assert report.ok and len(report.rows) == 2 * 2 * len(COMBOS)
        ctx = Context(scenario, 0)
        for res in report.results:
            row = res["row"]
            assert row["fraction"] is not None and row["fraction"] <= 1 + 1e-9
            assert row["saving_eur"] >= -1e-9
            if row["algorithm"] == "classic_greedy":
                assert row["weights_computed"] == res["edges"]
            else:
                assert row["weights_computed"] <= (row["k"] - 1) * res["edges"]
        rows = read_rows(tmp_path / "report.csv")
        assert list(rows[0]) == REPORT_COLUMNS
        assert all(r["wall_ms"] == "" for r in rows)
        assert (tmp_path / "run.json").exists()
        assert report.extra["grand_coalition_saving_eur"] == ctx.grand_saving(scenario.full_window)

    def test_invalid_combination_reported_and_run_continues(self, scenario):
        combos = (("classic_greedy", "-", "WC"), ("round_robin", "decr", "WB"))
        report = run_sweep(spec(combos=combos, radii=(1000.0,), ks=(3,)), scenario=scenario)
        assert not report.ok and len(report.errors) == 1
        assert "ContractError" in report.errors[0]
        assert report.rows[1]["saving_eur"] is not None

    def test_byte_identical_reports(self, scenario, tmp_path):
        s = spec(radii=(1000.0,))
        run_sweep(s, tmp_path / "a", scenario=scenario)
        run_sweep(s, tmp_path / "b", scenario=scenario)
        for name in ("report.csv", "run.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_timing_recorded_on_request(self, scenario):
        report = run_sweep(spec(radii=(1000.0,), ks=(3,), record_timing=True), scenario=scenario)
        assert all(r["wall_ms"] is not None for r in report.rows)

    def test_saving_reproducible_from_matching_file(self, scenario, tmp_path):
        save_scenario(scenario, tmp_path / "sc")
        s = spec(scenario=str(tmp_path / "sc"), config=None, radii=(1500.0,), ks=(4,))
        report = run_sweep(s, tmp_path / "out")
        billing = Billing(load_scenario(tmp_path / "sc"))
        for res in report.results:
            cell = Cell(res["row"]["algorithm"], res["row"]["order"], res["row"]["weights"], 4, 1500.0)
            m = read_matching(tmp_path / "out" / "matchings" / f"{cell.key}.csv")
            assert evaluate_matching(m, billing) == res["row"]["saving_eur"]

    def test_workers_do_not_change_results(self, scenario, tmp_path):
        run_sweep(spec(radii=(1000.0,)), tmp_path / "a", scenario=scenario)
        run_sweep(spec(radii=(1000.0,), workers=2), tmp_path / "b", scenario=scenario)
        assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()

    def test_spec_invariants(self):
        with pytest.raises(DomainError):
            spec(radii=())
        with pytest.raises(DomainError):
            spec(combos=())
        with pytest.raises(DomainError):
            ExperimentSpec()


class TestSensitivity:
    def test_large_sample_equals_unsampled(self, scenario):
        s = spec(radii=(1500.0,), ks=(2, 3), s_values=(2, 1000), strategies=("random", "greedy"))
        report = run_sensitivity(s, scenario=scenario)
        assert report.ok
        by = {(r["algorithm"], r["order"], r["weights"], r["k"], r["s"], r["strategy"]): r
              for r in report.rows}
        for (algo, order, weights, k, s_, strategy), r in by.items():
            if s_ == 1000:
                base = by[(algo, order, weights, k, None, "none")]
                assert r["saving_eur"] == base["saving_eur"]
                assert r["weights_computed"] == base["weights_computed"]
        assert any(r["k"] == 2 for r in report.rows)
        assert {r["strategy"] for r in report.rows} == {"none", "random", "greedy"}

    def test_sampled_counts_within_cap(self, scenario):
        s = spec(radii=(3000.0,), ks=(5,), combos=(("round_robin", "decr", "WB"),), s_values=(3,))
        report = run_sensitivity(s, scenario=scenario)
        g = Context(scenario, 0).graph(3000.0, None, "none", scenario.full_window)
        for r in report.rows:
            if r["s"] == 3:
                assert r["weights_computed"] <= g.sampled_edge_cap(3)


class TestPeriods:
    def test_windows(self):
        assert period_windows((0, 10), 4) == [(0, 4), (4, 8), (8, 10)]
        with pytest.raises(DomainError):
            period_windows((0, 10), 11)

    def test_full_horizon_ratio_is_one(self, scenario):
        s = spec(radii=(1500.0,), ks=(3,), periods=(scenario.horizon,))
        report = run_periods(s, scenario=scenario)
        assert report.ok
        for r in report.rows:
            if r["fixed_saving_eur"] > 0:
                assert r["ratio"] == 1.0
            assert r["n_periods"] == 1

    def test_weekly_days(self, scenario):
        s = spec(radii=(1500.0,), ks=(3,), periods=(24, "week"),
                 combos=(("round_robin", "decr", "WB"),))
        report = run_periods(s, scenario=scenario)
        assert [r["n_periods"] for r in report.rows] == [7, 1]

    def test_period_longer_than_window(self, scenario):
        with pytest.raises(DomainError):
            run_periods(spec(periods=("month",)), scenario=scenario)

    def test_brute_force_period_dominance(self):
        small = generate(ScenarioConfig(seed=3, n_households=8, horizon=24 * 4,
                                        prosumer_pv_share=0.25, prosumer_pv_batt_share=0.125,
                                        placement="uniform", area_m=2_000))
        s = spec(config=None, scenario="unused", radii=(5_000.0,), ks=(3,), periods=(24,),
                 combos=(("brute_force", "-", "saving"),))
        report = run_periods(s, scenario=small)
        assert report.ok
        row = report.rows[0]
        assert row["saving_eur"] >= row["fixed_per_period_eur"] - 1e-6


def test_run_matching_rejects_unknown_algorithm(scenario):
    with pytest.raises(DomainError):
        run_matching(Context(scenario, 0), Cell("simulated_annealing", "-", "WB", 3, 100.0))
