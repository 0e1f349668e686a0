import json

import pytest

from obcs.harness import (
    ExperimentConfig,
    HarnessError,
    TrialRecord,
    derive_seed,
    emit_csv,
    load_csv,
    render_svg,
    run_experiment,
    splitmix64,
    summarize,
)
from obcs.harness import FIELD_NAMES, nearest_rank


def small_support(**kw):
    base = dict(mode="support-sweep", grid={"n": [10, 12], "k": [1, 2], "c_m": [20]}, trials=6,
                c_d=4, seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


class TestSeeds:
    def test_reference_values(self):
        # first outputs of the reference splitmix64 generator seeded with 0
        state, outs = 0, []
        for _ in range(3):
            outs.append(splitmix64(state))
            state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
        assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_derive_is_order_sensitive(self):
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert 0 <= derive_seed(-1, 5) < 2**64


class TestConfig:
    def test_trials_zero_rejected(self):
        with pytest.raises(HarnessError):
            small_support(trials=0)

    @pytest.mark.parametrize("kw", [dict(grid={}), dict(grid={"n": [], "k": [1]}), dict(mode="sweep"),
                                    dict(grid={"n": [5], "k": [1], "m2": [8]}), dict(value_models=["x"]),
                                    dict(grid={"k": [1]})])
    def test_invalid(self, kw):
        with pytest.raises(HarnessError):
            small_support(**kw)

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(HarnessError):
            ExperimentConfig.from_dict({"mode": "support-sweep", "grid": {"n": [5], "k": [1]},
                                        "trials": 1, "colour": "red"})

    def test_points_fill_defaults(self):
        cfg = ExperimentConfig(mode="approx-sweep", grid={"n": [5], "k": [1], "m2": [8, 16]}, trials=1)
        assert cfg.points() == [{"n": 5, "k": 1, "m2": 8, "c_m": 100.0, "epsilon": 0.1},
                                {"n": 5, "k": 1, "m2": 16, "c_m": 100.0, "epsilon": 0.1}]


class TestCsv:
    def test_empty_is_header_only(self, tmp_path):
        path = tmp_path / "e.csv"
        emit_csv([], path)
        assert path.read_bytes() == (",".join(FIELD_NAMES) + "\r\n").encode()
        assert load_csv(path) == []

    def test_round_trip_and_precision(self, tmp_path):
        rec = TrialRecord(mode="approx-sweep", grid_index=0, n=5, k=1, angular_error=0.1 + 0.2,
                          success=True, detail='a,"b"')
        path = tmp_path / "r.csv"
        emit_csv([rec], path)
        assert "0.30000000000000004" in path.read_text()
        assert load_csv(path) == [rec]

    def test_mixed_modes_rejected(self, tmp_path):
        recs = [TrialRecord(mode="support-sweep", grid_index=0, n=1, k=1),
                TrialRecord(mode="approx-sweep", grid_index=0, n=1, k=1)]
        with pytest.raises(HarnessError):
            emit_csv(recs, tmp_path / "x.csv")


class TestRunExperiment:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = small_support()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(cfg, a)
        run_experiment(cfg, b)
        assert a.read_bytes() == b.read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(small_support(), a)
        run_experiment(small_support(workers=2), b)
        assert a.read_bytes() == b.read_bytes()

    def test_support_sweep_exact(self):
        records = run_experiment(small_support())
        assert len(records) == 4 * 6
        assert all(r.outcome == "exact-support" and r.success for r in records)
        assert all(r.verification in ("brute-force", "pairwise-certificate") for r in records)
        assert [r.value_model for r in records[:4]] == ["unit-positive", "random-signs",
                                                       "adversarial-cancel", "condition-number"]

    def test_budget_marker_and_resume(self, tmp_path):
        full, part = tmp_path / "full.csv", tmp_path / "part.csv"
        run_experiment(small_support(), full)
        stopped = run_experiment(small_support(budget_trials=6), part)
        assert stopped[-1].outcome == "budget-exceeded"
        assert sum(r.trial is not None for r in stopped) == 6
        run_experiment(small_support(), part, resume=True)
        assert part.read_bytes() == full.read_bytes()

    def test_resume_drops_partial_point(self, tmp_path):
        full, part = tmp_path / "full.csv", tmp_path / "part.csv"
        run_experiment(small_support(), full)
        lines = full.read_bytes().split(b"\r\n")
        part.write_bytes(b"\r\n".join(lines[:10]) + b"\r\n")
        run_experiment(small_support(), part, resume=True)
        assert part.read_bytes() == full.read_bytes()

    def test_construction_failure_recorded(self):
        cfg = ExperimentConfig(mode="support-sweep", grid={"n": [2], "k": [1], "m": [1, 30]},
                               trials=2, c_d=0.01, alpha=1, max_retries=2, seed=1)
        records = run_experiment(cfg)
        assert records[0].outcome == "construction-failed" and records[0].attempts == 2
        assert [r.outcome for r in records[1:]] == ["exact-support"] * 2

    def test_verified_family_n50_k2(self):
        cfg = ExperimentConfig(mode="support-sweep", grid={"n": [50], "k": [2]}, trials=100, seed=3)
        records = run_experiment(cfg)
        assert sum(r.outcome == "exact-support" for r in records) == 100
        assert records[0].verification == "brute-force"

    def test_adversary_audit(self):
        cfg = ExperimentConfig(mode="adversary-audit", grid={"n": [6, 10], "k": [2, 3], "m": [8]}, trials=5)
        records = run_experiment(cfg)
        assert len(records) == 20 and all(r.outcome == "confusable-verified" for r in records)
        assert set(json.loads(records[0].detail)) >= {"j0", "others"}

    def test_approx_sweep(self):
        cfg = ExperimentConfig(mode="approx-sweep", grid={"n": [12], "k": [2], "c_m": [20], "m2": [64, 4096]},
                               trials=30, c_d=4, seed=2)
        summary = summarize(run_experiment(cfg))
        assert summary[1].median_error <= summary[0].median_error < 0.5


class TestSummarize:
    def test_nearest_rank_median(self):
        assert nearest_rank([0.3, 0.1, 0.2], 50) == 0.2
        assert nearest_rank([0.3, 0.1, 0.2], 95) == 0.3
        assert nearest_rank(list(range(1, 101)), 95) == 95

    def test_errors_median(self):
        recs = [TrialRecord(mode="approx-sweep", grid_index=0, n=5, k=1, trial=t, angular_error=e, success=True)
                for t, e in enumerate([0.3, 0.1, 0.2])]
        s, = summarize(recs)
        assert s.median_error == 0.2 and s.p95_error == 0.3 and s.success_rate == 1.0

    def test_all_exact(self):
        recs = [TrialRecord(mode="support-sweep", grid_index=0, n=5, k=1, m=9, trial=t, success=True)
                for t in range(100)]
        assert summarize(recs)[0].success_rate == 1.0

    def test_mixed_and_empty(self):
        with pytest.raises(HarnessError):
            summarize([])
        with pytest.raises(HarnessError):
            summarize([TrialRecord(mode="support-sweep", grid_index=0, n=1, k=1),
                       TrialRecord(mode="approx-sweep", grid_index=0, n=1, k=1)])

    def test_loaded_csv_reproduces_summary(self, tmp_path):
        records = run_experiment(small_support(), tmp_path / "s.csv")
        assert summarize(load_csv(tmp_path / "s.csv")) == summarize(records)

    def test_svg(self, tmp_path):
        svg = render_svg(summarize(run_experiment(small_support())))
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert "success rate" in svg and "<polyline" in svg or "<circle" in svg
        with pytest.raises(HarnessError):
            render_svg([])
