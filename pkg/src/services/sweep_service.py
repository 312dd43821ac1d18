"""
Sweep service: seeded grids over (mode, k, b), summary metrics and the
on-disk target-model cache.

Runs are independent, so they can go through a process pool. Every run is
keyed by (mode, k, b, seed) and assembled in grid order after the pool
drains, which makes the output independent of the job count.
"""

import logging
import zipfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors.exceptions import FlipSimError, RunFailedError, ValidationError
from src.models.domain import (
    BinaryParams,
    LabeledDataset,
    ModelParams,
    MulticlassParams,
    RunResult,
)
from src.models.schemas import AttackMode, SweepConfig, SweepRow, ThreatModel
from src.services.dataset_service import dataset_fingerprint, load_dataset
from src.services.training_service import build_remap, make_target_params, run_training
from src.utils.checksum import config_digest

logger = logging.getLogger(__name__)

RunKey = Tuple[str, float, float, int]
ProgressHook = Callable[[RunKey], None]


@dataclass(frozen=True)
class SweepOutcome:
    rows: List[SweepRow]
    runs: Dict[RunKey, RunResult]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def metric_avg_last_n(run: RunResult, n: int) -> float:
    """Mean test accuracy over the final n epochs."""
    if n < 1 or n > len(run.records):
        raise ValidationError(
            f"window {n} must lie in [1, {len(run.records)}] (epochs recorded)",
            details={"window": n, "epochs": len(run.records)},
        )
    return float(np.mean(run.accuracies[-n:]))


def metric_std_across_seeds(runs: Sequence[RunResult], n: int) -> float:
    """Population std (divide by the run count) of each run's last-n mean accuracy."""
    if len(runs) < 2:
        raise ValidationError(f"std across seeds needs at least 2 runs, got {len(runs)}")
    return float(np.std([metric_avg_last_n(run, n) for run in runs]))


def _cell_row(cfg: SweepConfig, mode: AttackMode, k: float, b: float, runs: List[RunResult]) -> SweepRow:
    if len(runs) >= 2:
        std = metric_std_across_seeds(runs, cfg.std_window)
    else:
        std = 0.0
        logger.warning("sweep.single_seed mode=%s k=%s b=%s std reported as 0", mode.value, k, b)

    distances = [run.records[-1].target_distance for run in runs]
    mean_distance = None
    if mode == AttackMode.TARGETED and all(d is not None for d in distances):
        mean_distance = float(np.mean(distances))

    return SweepRow(
        mode=mode,
        k=k,
        b=b,
        global_budget=k * b,
        mean_acc_last_w=float(np.mean([metric_avg_last_n(run, cfg.avg_window) for run in runs])),
        std_across_seeds=std,
        mean_final_target_distance=mean_distance,
        n_seeds=len(runs),
    )


# ---------------------------------------------------------------------------
# Target cache
# ---------------------------------------------------------------------------

def target_cache_key(cfg: SweepConfig, fingerprint: str) -> str:
    payload = {
        "dataset": cfg.dataset.model_dump(mode="json"),
        "fingerprint": fingerprint,
        "sgd": cfg.sgd.model_dump(mode="json"),
        "model": cfg.model,
        "remap": cfg.target_remap,
        "seed": cfg.target_seed,
    }
    return config_digest(payload)


def _save_params(path: Path, params: ModelParams) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, kind=np.array(params.kind), array=params.array)
    tmp.replace(path)


def _load_params(path: Path) -> Optional[ModelParams]:
    """Cached parameters, or None when the file cannot be read back."""
    try:
        with np.load(path) as blob:
            kind = str(blob["kind"])
            array = np.array(blob["array"])
        return BinaryParams(array) if kind == BinaryParams.kind else MulticlassParams(array)
    except (OSError, EOFError, ValueError, KeyError, AttributeError, zipfile.BadZipFile, FlipSimError) as exc:
        logger.warning("sweep.target_cache_unreadable path=%s error=%s", path, exc)
        return None


def load_or_make_target(
    cfg: SweepConfig,
    train: LabeledDataset,
    cache_dir: Optional[Union[str, Path]],
    fingerprint: Optional[str] = None,
) -> Tuple[ModelParams, str]:
    """Target parameters for targeted cells, trained once and cached as .npz."""
    key = target_cache_key(cfg, fingerprint or dataset_fingerprint(cfg.dataset))
    path = Path(cache_dir) / f"target_{key}.npz" if cache_dir is not None else None

    if path is not None and path.is_file():
        cached = _load_params(path)
        if cached is not None:
            logger.info("sweep.target_cache_hit key=%s", key[:12])
            return cached, key

    remap = build_remap(cfg.target_remap, train.num_classes)
    params = make_target_params(train, remap, cfg.sgd, cfg.target_seed, cfg.model)
    if path is not None:
        _save_params(path, params)
        logger.info("sweep.target_cached key=%s path=%s", key[:12], path)
    return params, key


# ---------------------------------------------------------------------------
# Grid execution
# ---------------------------------------------------------------------------

_WORKER_DATA: Dict[str, LabeledDataset] = {}


def _init_worker(train: LabeledDataset, test: LabeledDataset) -> None:
    _WORKER_DATA["train"] = train
    _WORKER_DATA["test"] = test


def _run_cell(threat: ThreatModel, cfg: SweepConfig, seed: int) -> RunResult:
    return run_training(_WORKER_DATA["train"], _WORKER_DATA["test"], threat, cfg.sgd, seed, cfg.model)


def _threats(cfg: SweepConfig, target: Optional[ModelParams]) -> Dict[Tuple[str, float, float], ThreatModel]:
    threats = {}
    for mode in cfg.modes:
        for k in cfg.k_values:
            for b in cfg.b_values:
                threats[(mode.value, k, b)] = ThreatModel.build(
                    k, b, mode,
                    target=target if mode == AttackMode.TARGETED else None,
                    selection_rule=cfg.selection_rule,
                    fixed_attacker_subset=cfg.fixed_attacker_subset,
                )
    return threats


def _failure(key: RunKey, exc: BaseException) -> RunFailedError:
    mode, k, b, seed = key
    return RunFailedError(
        f"run mode={mode} k={k} b={b} seed={seed} failed: {exc}",
        details={"mode": mode, "k": k, "b": b, "seed": seed, "error": type(exc).__name__},
    )


def run_sweep(
    cfg: SweepConfig,
    jobs: int = 1,
    cache_dir: Optional[Union[str, Path]] = None,
    data: Optional[Tuple[LabeledDataset, LabeledDataset]] = None,
    on_run_done: Optional[ProgressHook] = None,
) -> SweepOutcome:
    """
    Run every (mode, k, b, seed) of the grid and aggregate one row per cell.

    Rows are sorted by (mode, k, b). A failing run aborts the sweep with a
    RunFailedError naming the cell and seed.
    """
    if jobs < 1:
        raise ValidationError(f"jobs must be >= 1, got {jobs}")
    train, test = data if data is not None else load_dataset(cfg.dataset)

    target = None
    if AttackMode.TARGETED in cfg.modes:
        target, _ = load_or_make_target(cfg, train, cache_dir)

    threats = _threats(cfg, target)
    keys: List[RunKey] = [cell + (seed,) for cell in threats for seed in cfg.seeds]
    logger.info("sweep.start cells=%d runs=%d jobs=%d", len(threats), len(keys), jobs)

    runs: Dict[RunKey, RunResult] = {}
    if jobs == 1:
        _init_worker(train, test)
        for key in keys:
            try:
                runs[key] = _run_cell(threats[key[:3]], cfg, key[3])
            except Exception as exc:
                raise _failure(key, exc) from exc
            if on_run_done is not None:
                on_run_done(key)
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(train, test)) as pool:
            futures = {pool.submit(_run_cell, threats[key[:3]], cfg, key[3]): key for key in keys}
            for future in as_completed(futures):
                key = futures[future]
                try:
                    runs[key] = future.result()
                except Exception as exc:
                    for pending in futures:
                        pending.cancel()
                    raise _failure(key, exc) from exc
                if on_run_done is not None:
                    on_run_done(key)

    rows = []
    for (mode, k, b), _threat in threats.items():
        cell_runs = [runs[(mode, k, b, seed)] for seed in cfg.seeds]
        row = _cell_row(cfg, AttackMode(mode), k, b, cell_runs)
        rows.append(row)
        logger.info(
            "sweep.cell mode=%s k=%s b=%s mean_acc=%.4f std=%.4f",
            mode, k, b, row.mean_acc_last_w, row.std_across_seeds,
        )
    rows.sort(key=lambda r: r.sort_key)
    return SweepOutcome(rows=rows, runs=runs)


# ---------------------------------------------------------------------------
# Comparison tables
# ---------------------------------------------------------------------------

Grid = Tuple[List[float], List[float], np.ndarray]


def heatmap(rows: Sequence[SweepRow], mode: AttackMode) -> Grid:
    """(k values, b values, mean accuracy matrix) for one mode; missing cells are NaN."""
    selected = [r for r in rows if r.mode == mode]
    ks = sorted({r.k for r in selected})
    bs = sorted({r.b for r in selected})
    grid = np.full((len(ks), len(bs)), np.nan)
    for r in selected:
        grid[ks.index(r.k), bs.index(r.b)] = r.mean_acc_last_w
    return ks, bs, grid


def mode_difference(rows: Sequence[SweepRow]) -> Optional[Grid]:
    """Untargeted minus targeted mean accuracy on the shared (k, b) grid."""
    modes = {r.mode for r in rows}
    if modes != {AttackMode.UNTARGETED, AttackMode.TARGETED}:
        return None
    ks, bs, untargeted = heatmap(rows, AttackMode.UNTARGETED)
    ks_t, bs_t, targeted = heatmap(rows, AttackMode.TARGETED)
    if ks != ks_t or bs != bs_t:
        return None
    return ks, bs, untargeted - targeted


def std_by_k(rows: Sequence[SweepRow]) -> List[Tuple[AttackMode, float, float, float]]:
    """(mode, k, b_max, std) with b fixed at the largest swept b of each mode."""
    out = []
    for mode in sorted({r.mode for r in rows}, key=lambda m: m.value):
        selected = [r for r in rows if r.mode == mode]
        b_max = max(r.b for r in selected)
        for r in sorted((r for r in selected if r.b == b_max), key=lambda r: r.k):
            out.append((mode, r.k, b_max, r.std_across_seeds))
    return out
