import importlib.util
from pathlib import Path

import pytest

from src.config.settings import Settings, SettingsError, get_settings
from src.errors.exceptions import DataFileNotFoundError, ValidationError
from src.models.schemas import AttackMode, SelectionRule, SgdConfig, ThreatModel
from src.utils.budget import fraction_count
from src.utils.validator import apply_overrides, build_sweep_config, load_sweep_config

REPO_ROOT = Path(__file__).resolve().parent.parent


class TestSettings:
    def test_isolated_directories(self, isolated_settings, tmp_path):
        assert isolated_settings.data_dir == tmp_path / "data"
        assert isolated_settings.jobs == 1
        assert get_settings() is isolated_settings

    def test_bad_jobs(self, monkeypatch):
        monkeypatch.setenv("FLIPSIM_JOBS", "many")
        with pytest.raises(SettingsError):
            Settings()
        monkeypatch.setenv("FLIPSIM_JOBS", "0")
        with pytest.raises(SettingsError):
            Settings()

    def test_bad_log_level(self, monkeypatch):
        monkeypatch.setenv("LOG_LEVEL", "LOUD")
        with pytest.raises(SettingsError):
            Settings()

    def test_cache_must_differ_from_out(self, monkeypatch, tmp_path):
        monkeypatch.setenv("FLIPSIM_CACHE_DIR", str(tmp_path / "results"))
        with pytest.raises(SettingsError):
            Settings()


class TestValidator:
    def test_defaults(self):
        cfg = load_sweep_config(None)
        assert cfg.seeds == [0, 1, 2, 3, 4, 5]
        assert cfg.sgd.epochs == 200
        assert cfg.selection_rule == SelectionRule.BENEFIT

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("k_values: [0.1, 0.2]\nmodes: [targeted]\nselection_rule: paper-literal\n", encoding="utf-8")
        cfg = load_sweep_config(path)
        assert cfg.k_values == [0.1, 0.2]
        assert cfg.modes == [AttackMode.TARGETED]
        assert cfg.selection_rule == SelectionRule.PAPER_LITERAL

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"seeds": [1, 2], "b_values": [0.3]}', encoding="utf-8")
        cfg = load_sweep_config(path, {"seeds": (9,), "b_values": (), "k_values": None})
        assert cfg.seeds == [9]
        assert cfg.b_values == [0.3]

    def test_apply_overrides_copies(self):
        doc = {"seeds": [1]}
        merged = apply_overrides(doc, {"seeds": (2, 3)})
        assert merged == {"seeds": [2, 3]}
        assert doc == {"seeds": [1]}

    @pytest.mark.parametrize("doc", [
        {"k_values": [1.2]},
        {"b_values": [-0.1]},
        {"k_values": []},
        {"seeds": [1, 1]},
        {"sgd": {"epochs": 5}, "avg_window": 10},
        {"dataset": {"source": "mnist", "class_filter": [3, 3]}},
        {"dataset": {"source": "mnist", "class_filter": [0, 10]}},
        {"sgd": {"learning_rate": -1.0}},
        {"unknown": 1},
    ])
    def test_rejected(self, doc):
        with pytest.raises(ValidationError):
            build_sweep_config(doc)

    def test_non_mapping_root(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ValidationError):
            load_sweep_config(path)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("k_values: [0.1\n", encoding="utf-8")
        with pytest.raises(ValidationError):
            load_sweep_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFileNotFoundError):
            load_sweep_config(tmp_path / "missing.yaml")

    def test_example_configs_are_valid(self):
        configs = sorted((REPO_ROOT / "configs").glob("*.json"))
        assert configs
        for path in configs:
            load_sweep_config(path)


class TestThreatModel:
    def test_global_budget(self):
        assert ThreatModel.build(0.5, 0.4).global_budget == pytest.approx(0.2)

    def test_targeted_needs_target(self):
        with pytest.raises(ValueError):
            ThreatModel.build(0.5, 0.5, AttackMode.TARGETED)

    def test_fraction_range(self):
        with pytest.raises(ValueError):
            ThreatModel.build(1.5, 0.5)

    def test_sgd_defaults(self):
        cfg = SgdConfig()
        assert (cfg.learning_rate, cfg.batch_size, cfg.epochs) == (0.001, 64, 200)


class TestBudget:
    @pytest.mark.parametrize("fraction,n,expected", [
        (0.0, 10, 0), (1.0, 10, 10), (0.25, 10, 2), (0.3, 10, 3), (0.5, 3, 1), (0.7, 10, 7),
        (0.29, 100, 29), (0.3 - 1e-11, 10, 2), (1e-7, 10, 0), (0.9999999999, 10, 9),
    ])
    def test_fraction_count(self, fraction, n, expected):
        assert fraction_count(fraction, n) == expected


def test_sources_are_python39_compatible():
    spec = importlib.util.spec_from_file_location("check_python39", REPO_ROOT / "scripts" / "check_python39.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    findings = module.scan_tree(REPO_ROOT)
    assert findings == [], "\n".join(f"{p}:{line}: {msg}" for p, line, msg in findings)
