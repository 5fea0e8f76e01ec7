import json
import math

import numpy as np
import pandas as pd
import pytest

from app.core.errors import BPError, StudyError
from app.lab import pipeline
from app.lab.pipeline import ROW_COLUMNS, aggregate, fit_all, run_experiment
from app.lab.schema import Experiment, ExperimentConfig


def _cfg(tmp_path, experiment, n_list, **kw):
    return ExperimentConfig(experiment=experiment, n_list=n_list, out_dir=tmp_path, **kw)


class TestAggregate:
    def test_summary_and_exceedance(self):
        rows = pd.DataFrame({
            "N": [100] * 4,
            "metric": ["err"] * 4,
            "value": [0.05, 0.12, 0.2, 0.3],
        })
        summary = aggregate(rows)
        row = summary.iloc[0]
        assert row["median"] == pytest.approx(0.16)
        assert row["count"] == 4
        assert (row["exceed_alpha"], row["exceed_alpha_eps"]) == (0.75, 0.5)

    def test_edge_ratio(self):
        rows = pd.DataFrame({"N": [10] * 4, "metric": ["x_edge"] * 4, "value": [1.0, -1.0, 1.0, -1.0]})
        summary = aggregate(rows)
        ratio = summary[summary["metric"] == "l4_l2_ratio"]
        assert len(ratio) == 1
        assert ratio["median"].iloc[0] == pytest.approx(1.0)

    def test_z_part_rms(self):
        rows = pd.DataFrame({"N": [10, 10], "metric": ["z_part"] * 2, "value": [3.0, -4.0]})
        summary = aggregate(rows)
        rms = summary[summary["metric"] == "z_part_rms"]
        assert rms["median"].iloc[0] == pytest.approx(math.sqrt(12.5))
        assert rms["count"].iloc[0] == 2

    def test_fit_all_skips_zero_metrics(self):
        summary = pd.DataFrame({
            "N": [10, 20, 40] * 2,
            "metric": ["a"] * 3 + ["b"] * 3,
            "median": [1.0, 0.5, 0.25, 0.0, 0.0, 0.0],
        })
        fits = fit_all(summary)
        assert list(fits["metric"]) == ["a"]
        assert fits["slope"].iloc[0] == pytest.approx(-1.0)


class TestRunExperiment:
    def test_concentration_files(self, tmp_path):
        messages = []
        result = run_experiment(_cfg(tmp_path, "concentration", [20, 40, 80], seeds=4),
                                progress=messages.append)
        out = tmp_path / "concentration"
        assert result.out_dir == out
        for name in ("rows.csv", "replicates.csv", "summary.csv", "fits.csv", "run.json"):
            assert (out / name).exists()
        rows = pd.read_csv(out / "rows.csv")
        assert list(rows.columns) == ROW_COLUMNS
        assert len(rows) == 3 * 4 * 2
        meta = json.loads((out / "run.json").read_text())
        assert meta["failures"] == 0 and meta["replicates"] == 12
        assert set(result.fits["metric"]) == {"max_row_dev", "max_col_dev"}
        assert messages[-1] == "DONE"

    def test_deterministic_across_threads(self, tmp_path):
        first = run_experiment(_cfg(tmp_path / "one", "concentration", [10, 20, 30], seeds=5, threads=1))
        second = run_experiment(_cfg(tmp_path / "three", "concentration", [10, 20, 30], seeds=5, threads=3))
        for name in ("rows.csv", "summary.csv", "replicates.csv"):
            assert (first.out_dir / name).read_bytes() == (second.out_dir / name).read_bytes()

    def test_bp_variance(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, Experiment.bp_variance, [20, 40, 80], seeds=3, tmax=3))
        metrics = set(result.rows["metric"])
        assert {"max_var_dev", "max_var_dev_t1", "max_var_dev_t3", "mp_bp_gap"} <= metrics
        assert (result.summary["count"] == 3).all()
        assert "max_var_dev" in set(result.fits["metric"])

    def test_chaos(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "chaos", [4, 5, 6], seeds=2, tmax=2))
        rows = result.rows
        assert rows.loc[rows["metric"] == "chaos_mp_gap", "value"].max() <= 1e-10
        assert rows.loc[rows["metric"] == "split_gap", "value"].max() <= 1e-10
        assert rows.loc[rows["metric"] == "x_part_anchor_gap", "value"].max() <= 1e-10
        ratio = result.summary[result.summary["metric"] == "l4_l2_ratio"]
        assert list(ratio["N"]) == [4, 5, 6]

    def test_chaos_with_fixed_m(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "chaos", [6, 8], seeds=3, tmax=2, m=4))
        rms = result.summary[result.summary["metric"] == "z_part_rms"]
        assert list(rms["N"]) == [6, 8]
        assert (rms["median"] > 0).all()
        z = result.rows[result.rows["metric"] == "z_part"]
        assert len(z) == 6

    def test_density_records_edgeworth_ratio(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "density_gauss_gap", [6, 8], seeds=1, tmax=1,
                                     grid_points=128))
        ratio = result.rows.loc[result.rows["metric"] == "edgeworth_ratio_sup", "value"]
        assert len(ratio) == 2
        assert (ratio > 0).all() and np.isfinite(ratio).all()

    def test_edgeworth_tails(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "edgeworth_tails", [16, 32, 64], seeds=2,
                                     init="skew"))
        rows = result.rows
        assert (rows.loc[rows["metric"] == "c_fit", "value"] > 0).all()
        assert (rows.loc[rows["metric"] == "c_over_reference", "value"] > 0).all()
        cross = rows.loc[rows["metric"] == "survival_at_crossover", "value"]
        assert ((cross > 0) & (cross <= 1)).all()

    def test_edgeworth_tails_need_skewed_init(self, tmp_path):
        with pytest.raises(StudyError):
            run_experiment(_cfg(tmp_path, "edgeworth_tails", [16, 32], seeds=2, init="uniform"))

    def test_dat_output(self, tmp_path):
        run_experiment(_cfg(tmp_path, "concentration", [10, 20], seeds=2, dat=True))
        out = tmp_path / "concentration"
        assert (out / "summary.dat").read_text().startswith("# N metric")
        assert "summary.dat" in json.loads((out / "run.json").read_text())["files"]

    def test_failures_are_isolated(self, tmp_path, monkeypatch):
        def flaky(cfg, n, seed):
            if n == 20:
                raise BPError("boom")
            return [("value", 1.0 / n)], "h"

        monkeypatch.setitem(pipeline.PIPELINES, Experiment.concentration, flaky)
        result = run_experiment(_cfg(tmp_path, "concentration", [10, 20, 30], seeds=3))
        assert result.failures == 3
        assert set(result.rows["N"]) == {10, 30}
        reps = pd.read_csv(tmp_path / "concentration" / "replicates.csv")
        assert (reps.loc[reps["N"] == 20, "message"] == "boom").all()

    def test_unexpected_exception_is_isolated(self, tmp_path, monkeypatch):
        calls = []

        def crash_once(cfg, n, seed):
            calls.append(seed)
            if len(calls) == 1:
                raise RuntimeError("boom")
            return [("value", 1.0 / n)], "h"

        monkeypatch.setitem(pipeline.PIPELINES, Experiment.concentration, crash_once)
        result = run_experiment(_cfg(tmp_path, "concentration", [10, 20, 30], seeds=2))
        assert result.failures == 1
        assert len(result.rows) == 5
        reps = pd.read_csv(tmp_path / "concentration" / "replicates.csv")
        assert list(reps["status"]).count("error") == 1
        assert reps.loc[reps["status"] == "error", "message"].iloc[0] == "boom"

    def test_too_many_failures(self, tmp_path, monkeypatch):
        def broken(cfg, n, seed):
            raise BPError("boom")

        monkeypatch.setitem(pipeline.PIPELINES, Experiment.concentration, broken)
        with pytest.raises(StudyError):
            run_experiment(_cfg(tmp_path, "concentration", [10, 20], seeds=2))
        assert (tmp_path / "concentration" / "replicates.csv").exists()
        assert not (tmp_path / "concentration" / "rows.csv").exists()


def _slope(result, metric):
    fits = result.fits.set_index("metric")
    assert metric in fits.index, f"no fit for {metric}"
    return float(fits.loc[metric, "slope"])


@pytest.mark.slow
class TestScalingStudies:
    """N-scaling of the O(N^-1/2) quantities. Gaps bounded in probability are
    checked one-sided: they must shrink at least like N^-0.2."""

    def test_bp_edge_variance_and_mp_gap(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "bp_variance", [100, 200, 400, 800], seeds=10, tmax=4))
        assert -0.8 <= _slope(result, "max_var_dev") <= -0.2
        assert _slope(result, "mp_bp_gap") <= -0.2
        assert _slope(result, "max_spread_over_a") <= -0.2

    def test_amp_bp_consensus(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "bp_consensus", [200, 400, 800, 1600], seeds=8,
                                     tmax=3, delta=0.1))
        assert _slope(result, "gap_aligned") <= -0.2

    def test_shadow_consistency(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "shadow", [8, 16, 32], seeds=20, tmax=1,
                                     init="uniform"))
        assert _slope(result, "var_gap_shadow") <= -0.2
        assert _slope(result, "mean_gap_shadow") <= -0.2

    def test_density_moment_gaps(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "density_gauss_gap", [8, 16, 32], seeds=20, tmax=1,
                                     init="uniform"))
        assert _slope(result, "gap_k1_t1") <= -0.2
        assert _slope(result, "gap_k2_t1") <= -0.2
        assert _slope(result, "edgeworth_ratio_sup") < 0

    def test_z_part_rms_at_fixed_m(self, tmp_path):
        result = run_experiment(_cfg(tmp_path, "chaos", [6, 8, 10], seeds=200, tmax=2, m=4))
        assert _slope(result, "z_part_rms") <= -0.25
