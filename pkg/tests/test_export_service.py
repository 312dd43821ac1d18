import json

import pytest

from src.errors.exceptions import ResultsWriteError
from src.models.schemas import AttackMode, DatasetSpec, SgdConfig, SweepConfig, SweepRow, SyntheticSpec
from src.services.export_service import (
    MANIFEST_NAME,
    RUN_HEADER,
    SWEEP_HEADER,
    emit_results,
    fmt,
    read_sweep_csv,
    write_sweep_csv,
)
from src.services.sweep_service import run_sweep
from src.utils.validator import load_sweep_config

CFG = SweepConfig(
    dataset=DatasetSpec(synthetic=SyntheticSpec(n_per_class=20, test_per_class=10)),
    k_values=[0.0, 0.5],
    b_values=[0.5],
    modes=[AttackMode.UNTARGETED, AttackMode.TARGETED],
    seeds=[0, 1],
    sgd=SgdConfig(learning_rate=0.05, batch_size=8, epochs=4),
    avg_window=2,
    std_window=2,
)


@pytest.fixture(scope="module")
def outcome():
    return run_sweep(CFG)


class TestFormatting:
    def test_nine_significant_digits(self):
        assert fmt(1 / 3) == "0.333333333"
        assert fmt(0.5) == "0.5"
        assert fmt(12345.6789012) == "12345.6789"
        assert fmt(1e-12) == "1e-12"

    def test_missing_values_are_empty(self):
        assert fmt(None) == ""
        assert fmt(float("nan")) == ""


class TestSweepCsv:
    def test_empty_rows_give_header_only(self, tmp_path):
        path = write_sweep_csv([], tmp_path)
        assert path.read_text(encoding="utf-8") == ",".join(SWEEP_HEADER) + "\n"

    def test_values_parse_back(self, tmp_path, outcome):
        path = write_sweep_csv(outcome.rows, tmp_path)
        parsed = read_sweep_csv(path)
        assert len(parsed) == len(outcome.rows)
        for text, row in zip(parsed, outcome.rows):
            assert text["mode"] == row.mode.value
            assert float(text["mean_acc"]) == pytest.approx(row.mean_acc_last_w, abs=1e-9)
            assert float(text["std"]) == pytest.approx(row.std_across_seeds, abs=1e-9)
            assert float(text["global_budget"]) == pytest.approx(row.k * row.b, abs=1e-12)
            assert int(text["n_seeds"]) == 2
            assert (text["target_distance"] == "") == (row.mode == AttackMode.UNTARGETED)

    def test_rows_end_with_newline(self, tmp_path):
        rows = [SweepRow(mode=AttackMode.UNTARGETED, k=0.5, b=0.5, global_budget=0.25,
                         mean_acc_last_w=0.75, std_across_seeds=0.0, n_seeds=1)]
        text = write_sweep_csv(rows, tmp_path).read_bytes().decode("utf-8")
        assert text.endswith("\n") and "\r" not in text
        assert text.splitlines()[1] == "untargeted,0.5,0.5,0.25,0.75,0,,1"


class TestEmitResults:
    def test_files_written(self, tmp_path, outcome):
        written = {p.name for p in emit_results(outcome.rows, outcome.runs, tmp_path, CFG)}
        assert "sweep.csv" in written and MANIFEST_NAME in written
        assert "run_untargeted_0.5_0.5_1.csv" in written
        assert "run_targeted_0_0.5_0.csv" in written
        assert {"heatmap_targeted.csv", "heatmap_untargeted.csv",
                "untargeted_minus_targeted.csv", "std_by_k.csv"} <= written
        assert len([n for n in written if n.startswith("run_")]) == 8

    def test_run_file_contents(self, tmp_path, outcome):
        emit_results(outcome.rows, outcome.runs, tmp_path, CFG)
        lines = (tmp_path / "run_targeted_0.5_0.5_0.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(RUN_HEADER)
        assert [line.split(",")[0] for line in lines[1:]] == ["1", "2", "3", "4"]
        assert all(line.split(",")[-1] != "" for line in lines[1:])

    def test_manifest(self, tmp_path, outcome):
        emit_results(outcome.rows, outcome.runs, tmp_path, CFG, extra_manifest={"dataset_fingerprint": "x"})
        manifest = json.loads((tmp_path / MANIFEST_NAME).read_text(encoding="utf-8"))
        assert manifest["tool"] == "flipsim"
        assert manifest["seeds"] == [0, 1]
        assert manifest["grid"]["modes"] == ["untargeted", "targeted"]
        assert manifest["dataset_fingerprint"] == "x"
        assert "sweep.csv" in manifest["files"]

    def test_manifest_reproduces_sweep(self, tmp_path, outcome):
        first = tmp_path / "first"
        second = tmp_path / "second"
        emit_results(outcome.rows, outcome.runs, first, CFG)
        reloaded = load_sweep_config(first / MANIFEST_NAME)
        assert reloaded == CFG
        again = run_sweep(reloaded)
        emit_results(again.rows, again.runs, second, reloaded)
        assert (first / "sweep.csv").read_bytes() == (second / "sweep.csv").read_bytes()
        assert (first / MANIFEST_NAME).read_bytes() == (second / MANIFEST_NAME).read_bytes()

    def test_colliding_run_names_rejected(self, tmp_path, outcome):
        run = next(iter(outcome.runs.values()))
        runs = {("untargeted", 0.0, 0.5, 0): run, ("untargeted", 1e-12, 0.5, 0): run}
        with pytest.raises(ResultsWriteError, match="both map to"):
            emit_results(outcome.rows, runs, tmp_path, CFG)
        assert not (tmp_path / "sweep.csv").exists()

    def test_unwritable_directory(self, tmp_path, outcome):
        blocker = tmp_path / "file"
        blocker.write_text("not a directory")
        with pytest.raises(ResultsWriteError):
            emit_results(outcome.rows, outcome.runs, blocker / "out", CFG)
