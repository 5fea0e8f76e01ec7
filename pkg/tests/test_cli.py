import io
import json
from pathlib import Path

import pandas as pd
import pytest

from app.cli import main
from app.lab.gaussian_bp import TRACE_COLUMNS


def _stdout_csv(capsys) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(capsys.readouterr().out))


@pytest.fixture
def instance_file(tmp_path, capsys):
    out = tmp_path / "inst.csv"
    assert main(["gen", "--m", "3", "--n", "6", "--seed", "2", "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == str(out)
    return out


def test_schedule(capsys):
    assert main(["schedule", "--delta", "0.5", "--beta", "0.5", "--tmax", "3"]) == 0
    table = _stdout_csv(capsys)
    assert list(table.columns) == ["t", "v", "delta_t", "gamma_1"]
    assert table["v"].iloc[1] == pytest.approx(2 / 3)


def test_gen_writes_manifest(instance_file):
    assert instance_file.exists()
    assert instance_file.with_suffix(".manifest.json").exists()


def test_bp_run(instance_file, tmp_path):
    out = tmp_path / "bp.csv"
    assert main(["bp-run", "--instance", str(instance_file), "--tmax", "3", "--out", str(out)]) == 0
    table = pd.read_csv(out)
    assert list(table.columns) == TRACE_COLUMNS
    assert len(table) == 4


def test_amp_run(instance_file, capsys):
    assert main(["amp-run", "--instance", str(instance_file), "--tmax", "5", "--spectral"]) == 0
    table = _stdout_csv(capsys)
    assert list(table.columns) == ["t", "dist_to_star", "residual", "delta_t", "rnorm_est"]


def test_density_run(instance_file, capsys):
    args = ["density-run", "--instance", str(instance_file), "--tmax", "1", "--grid-points", "128"]
    assert main(args) == 0
    table = _stdout_csv(capsys)
    assert list(table.columns) == ["t", "a", "i", "mean", "var", "rho3",
                                   "gap_k1", "gap_k2", "gap_k3", "gap_k4"]
    assert len(table) == 2 * 3 * 6


def test_chaos_verify(capsys):
    assert main(["chaos-verify", "--m", "3", "--n", "5", "--t", "2", "--seed", "4"]) == 0
    table = _stdout_csv(capsys)
    assert len(table) == 3
    assert table["gap"].max() <= 1e-10
    assert table["split_gap"].max() <= 1e-10


def test_tail_check(capsys):
    assert main(["tail-check", "--n", "16", "--trials", "10000", "--lambdas", "0.5,1,2"]) == 0
    table = _stdout_csv(capsys)
    assert list(table["lambda"]) == [0.5, 1.0, 2.0]


def test_norm_check(capsys):
    assert main(["tail-check", "--norms", "--n-list", "10,20,40", "--seeds", "3"]) == 0
    table = _stdout_csv(capsys)
    assert list(table["N"]) == [10, 20, 40]


def test_study_from_config(tmp_path, capsys):
    conf = tmp_path / "study.conf"
    conf.write_text("experiment = concentration\nn_list = 10, 20, 30\nseeds = 2\n")
    assert main(["study", "--config", str(conf), "--seeds", "3", "--out", str(tmp_path)]) == 0
    out_dir = Path(capsys.readouterr().out.strip().splitlines()[-1])
    assert out_dir == tmp_path / "concentration"
    reps = pd.read_csv(out_dir / "replicates.csv")
    assert len(reps) == 9


@pytest.mark.parametrize(
    "argv",
    [
        ["schedule", "--delta", "1.5"],
        ["bp-run", "--instance", "/nonexistent/inst.csv"],
        ["study", "--experiment", "chaos", "--n-list", "30,20"],
        ["tail-check", "--trials", "10"],
    ],
)
def test_invalid_input_exits_2(argv):
    assert main(argv) == 2


def test_study_outcome_and_fixed_m(tmp_path, capsys):
    argv = ["study", "--experiment", "chaos", "--n-list", "6,8", "--seeds", "2", "--tmax", "1",
            "--outcome", "planted", "--m", "4", "--threads", "2", "--out", str(tmp_path)]
    assert main(argv) == 0
    out_dir = Path(capsys.readouterr().out.strip().splitlines()[-1])
    meta = json.loads((out_dir / "run.json").read_text())
    assert meta["config"]["outcome"] == "planted"
    assert meta["config"]["m"] == 4


def test_threads_is_a_study_flag():
    with pytest.raises(SystemExit) as exc:
        main(["schedule", "--threads", "2"])
    assert exc.value.code == 2
