from pathlib import Path

import pytest
from pydantic import ValidationError

from app.lab.schema import Experiment, ExperimentConfig, load_config, parse_flat_config

CONFIG = """
# variance study
experiment = bp_variance
n_list = 100, 200,400   # trailing comment
beta = 2.5

seeds = 10
"""


def test_parse_flat_config():
    data = parse_flat_config(CONFIG)
    assert data == {"experiment": "bp_variance", "n_list": ["100", "200", "400"],
                    "beta": "2.5", "seeds": "10"}


def test_parse_rejects_bare_words():
    with pytest.raises(ValueError, match="line 2"):
        parse_flat_config("experiment = tails\njust words\n")


def test_load_config(tmp_path):
    path = tmp_path / "study.conf"
    path.write_text(CONFIG)
    cfg = load_config(path)
    assert cfg.experiment is Experiment.bp_variance
    assert cfg.n_list == [100, 200, 400]
    assert cfg.beta == 2.5 and cfg.seeds == 10
    assert cfg.delta == 0.5


def test_overrides_win(tmp_path):
    path = tmp_path / "study.conf"
    path.write_text(CONFIG)
    cfg = load_config(path, seeds=3, out_dir=tmp_path, beta=None)
    assert cfg.seeds == 3
    assert cfg.beta == 2.5
    assert cfg.out_dir == Path(tmp_path)


def test_without_file():
    cfg = load_config(experiment="tails", n_list=[64, 128])
    assert cfg.experiment is Experiment.tails
    assert cfg.p == 3


@pytest.mark.parametrize(
    "fields",
    [
        {"n_list": []},
        {"n_list": [200, 100]},
        {"n_list": [1, 10]},
        {"n_list": [10], "delta": 1.0},
        {"n_list": [10], "init": "cauchy"},
        {"n_list": [10], "colour": "red"},
        {"n_list": [6, 8], "m": 6},
    ],
)
def test_invalid(fields):
    with pytest.raises(ValidationError):
        ExperimentConfig(experiment="chaos", **fields)


def test_frozen():
    cfg = ExperimentConfig(experiment="chaos", n_list=[8])
    with pytest.raises(ValidationError):
        cfg.seeds = 2


def test_fixed_m_from_file(tmp_path):
    path = tmp_path / "chaos.conf"
    path.write_text("experiment = chaos\nn_list = 6, 8, 10\nm = 4\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.m == 4
    assert ExperimentConfig(experiment="chaos", n_list=[6]).m is None
