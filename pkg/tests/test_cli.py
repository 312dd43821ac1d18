import json

import pytest
from click.testing import CliRunner

from src.cli import cli

QUICK = {
    "dataset": {"source": "synthetic", "synthetic": {"n_per_class": 15, "test_per_class": 10}},
    "k_values": [0.0, 0.5],
    "b_values": [0.5],
    "modes": ["untargeted"],
    "seeds": [0, 1],
    "sgd": {"learning_rate": 0.05, "batch_size": 8, "epochs": 3},
    "avg_window": 2,
    "std_window": 2,
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "quick.json"
    path.write_text(json.dumps(QUICK), encoding="utf-8")
    return path


def test_sweep_writes_results(runner, config_file, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["sweep", "--config", str(config_file), "--out", str(out), "--jobs", "1"])
    assert result.exit_code == 0, result.output
    header = (out / "sweep.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "mode,k,b,global_budget,mean_acc,std,target_distance,n_seeds"
    assert (out / "run_untargeted_0.5_0.5_1.csv").is_file()
    assert json.loads((out / "manifest.json").read_text(encoding="utf-8"))["tool"] == "flipsim"


def test_sweep_overrides(runner, config_file, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, [
        "sweep", "--config", str(config_file), "--out", str(out),
        "--k", "0.25", "--b", "1", "--seed", "4", "--mode", "targeted", "--selection-rule", "paper-literal",
    ])
    assert result.exit_code == 0, result.output
    rows = (out / "sweep.csv").read_text(encoding="utf-8").splitlines()
    assert rows[1].startswith("targeted,0.25,1,0.25,")
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["selection_rule"] == "paper_literal"
    assert manifest["seeds"] == [4]


def test_train_runs_single_cell(runner, config_file, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["train", "--config", str(config_file), "--out", str(out), "--k", "0.5"])
    assert result.exit_code == 0, result.output
    runs = sorted(p.name for p in out.glob("run_*.csv"))
    assert runs == ["run_untargeted_0.5_0.5_0.csv"]


def test_default_out_dir_from_settings(runner, config_file, isolated_settings):
    result = runner.invoke(cli, ["train", "--config", str(config_file)])
    assert result.exit_code == 0, result.output
    assert (isolated_settings.out_dir / "sweep.csv").is_file()


def test_unknown_key_is_rejected(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**QUICK, "budget": 0.5}), encoding="utf-8")
    result = runner.invoke(cli, ["sweep", "--config", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == 1
    assert "budget" in result.output
    assert not (tmp_path / "out").exists()


def test_out_of_range_override(runner, config_file, tmp_path):
    result = runner.invoke(cli, ["sweep", "--config", str(config_file), "--k", "1.5", "--out", str(tmp_path)])
    assert result.exit_code == 1


def test_missing_config(runner, tmp_path):
    result = runner.invoke(cli, ["sweep", "--config", str(tmp_path / "nope.json")])
    assert result.exit_code == 1
    assert "not found" in result.output


def test_oracle_check(runner):
    result = runner.invoke(cli, ["oracle-check", "--instances", "20", "--seed", "3"])
    assert result.exit_code == 0, result.output
    assert "Passed" in result.output


def test_make_target_twice_hits_cache(runner, config_file, isolated_settings):
    first = runner.invoke(cli, ["make-target", "--config", str(config_file)])
    assert first.exit_code == 0, first.output
    cached = list(isolated_settings.cache_dir.glob("target_*.npz"))
    assert len(cached) == 1
    second = runner.invoke(cli, ["make-target", "--config", str(config_file)])
    assert second.exit_code == 0
    assert list(isolated_settings.cache_dir.glob("target_*.npz")) == cached
