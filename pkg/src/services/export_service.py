"""Export service: write sweep results to disk.

Files written into out_dir:
  sweep.csv                        one row per (mode, k, b) cell
  run_<mode>_<k>_<b>_<seed>.csv    per-epoch series of every run
  manifest.json                    full config, seeds and the file list
  heatmap_<mode>.csv               k × b grid of mean accuracy per mode
  untargeted_minus_targeted.csv    only when both modes were swept
  std_by_k.csv                     std across seeds at the largest b

Numbers are decimal text with 9 significant digits; files are UTF-8 with
newline-terminated rows.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from src.errors.exceptions import ResultsWriteError
from src.models.domain import RunResult
from src.models.schemas import SweepConfig, SweepRow
from src.services.sweep_service import RunKey, heatmap, mode_difference, std_by_k
from src.utils.run_id import run_file_name

logger = logging.getLogger(__name__)

SWEEP_HEADER = ["mode", "k", "b", "global_budget", "mean_acc", "std", "target_distance", "n_seeds"]
RUN_HEADER = ["epoch", "test_accuracy", "train_loss", "flips_used", "attack_objective", "target_distance"]
MANIFEST_NAME = "manifest.json"
SWEEP_NAME = "sweep.csv"


def fmt(value: Optional[float]) -> str:
    """9 significant digits; None and NaN become an empty field."""
    if value is None:
        return ""
    value = float(value)
    if np.isnan(value):
        return ""
    return format(value, ".9g")


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ResultsWriteError(
            f"Could not write {path}: {exc.strerror or exc}",
            details={"path": str(path)},
        ) from exc


def sweep_rows(rows: Sequence[SweepRow]) -> List[List[str]]:
    return [
        [
            r.mode.value, fmt(r.k), fmt(r.b), fmt(r.global_budget), fmt(r.mean_acc_last_w),
            fmt(r.std_across_seeds), fmt(r.mean_final_target_distance), str(r.n_seeds),
        ]
        for r in rows
    ]


def run_rows(run: RunResult) -> List[List[str]]:
    return [
        [
            str(rec.epoch), fmt(rec.test_accuracy), fmt(rec.train_loss), str(rec.flips_used),
            fmt(rec.attack_objective), fmt(rec.target_distance),
        ]
        for rec in run.records
    ]


def write_sweep_csv(rows: Sequence[SweepRow], out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / SWEEP_NAME
    _write_csv(path, SWEEP_HEADER, sweep_rows(rows))
    return path


def _run_name(run: RunResult) -> str:
    threat = run.threat
    return run_file_name(threat.attack.mode.value, threat.write_access_k, threat.local_budget_b, run.seed)


def write_run_csv(run: RunResult, out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / _run_name(run)
    _write_csv(path, RUN_HEADER, run_rows(run))
    return path


def _grid_rows(ks: List[float], grid: np.ndarray) -> List[List[str]]:
    return [[fmt(k)] + [fmt(v) for v in grid[i]] for i, k in enumerate(ks)]


def write_comparisons(rows: Sequence[SweepRow], out_dir: Union[str, Path]) -> List[Path]:
    out = Path(out_dir)
    written = []
    for mode in sorted({r.mode for r in rows}, key=lambda m: m.value):
        ks, bs, grid = heatmap(rows, mode)
        path = out / f"heatmap_{mode.value}.csv"
        _write_csv(path, ["k\\b"] + [fmt(b) for b in bs], _grid_rows(ks, grid))
        written.append(path)

    diff = mode_difference(rows)
    if diff is not None:
        ks, bs, grid = diff
        path = out / "untargeted_minus_targeted.csv"
        _write_csv(path, ["k\\b"] + [fmt(b) for b in bs], _grid_rows(ks, grid))
        written.append(path)

    if rows:
        path = out / "std_by_k.csv"
        _write_csv(
            path,
            ["mode", "k", "b", "std"],
            [[m.value, fmt(k), fmt(b), fmt(s)] for m, k, b, s in std_by_k(rows)],
        )
        written.append(path)
    return written


def build_manifest(
    cfg: SweepConfig,
    files: Sequence[str],
    extra: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    manifest: Dict[str, Any] = {
        "tool": "flipsim",
        "config": cfg.model_dump(mode="json"),
        "seeds": list(cfg.seeds),
        "grid": {
            "modes": [m.value for m in cfg.modes],
            "k_values": list(cfg.k_values),
            "b_values": list(cfg.b_values),
        },
        "files": sorted(files),
    }
    if extra:
        manifest.update(extra)
    return manifest


def emit_results(
    rows: Sequence[SweepRow],
    runs: Mapping[RunKey, RunResult],
    out_dir: Union[str, Path],
    cfg: SweepConfig,
    extra_manifest: Optional[Mapping[str, Any]] = None,
) -> List[Path]:
    """Write every result file for a sweep and return the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ResultsWriteError(f"Could not create {out}: {exc}", details={"path": str(out)}) from exc

    names: Dict[str, RunKey] = {}
    for key in sorted(runs):
        name = _run_name(runs[key])
        if name in names:
            raise ResultsWriteError(
                f"Runs {names[name]} and {key} both map to {name}",
                details={"file": name, "runs": [str(names[name]), str(key)]},
            )
        names[name] = key

    written = [write_sweep_csv(rows, out)]
    for key in sorted(runs):
        written.append(write_run_csv(runs[key], out))
    written.extend(write_comparisons(rows, out))

    manifest_path = out / MANIFEST_NAME
    manifest = build_manifest(cfg, [p.name for p in written], extra_manifest)
    try:
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ResultsWriteError(f"Could not write {manifest_path}: {exc}", details={"path": str(manifest_path)}) from exc
    written.append(manifest_path)

    logger.info("export.done out_dir=%s files=%d rows=%d runs=%d", out, len(written), len(rows), len(runs))
    return written


def read_sweep_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
