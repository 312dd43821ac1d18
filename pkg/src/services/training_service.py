"""
Training service: one seeded poisoned-training run.

Per epoch t = 1..E:
  1. K ← attacker subset (resampled, or pinned to the epoch-1 draw)
  2. Δ, plan ← plan_attack on the clean training set at the current params
  3. one SGD epoch on the poisoned copy
  4. record metrics; the clean dataset is never written, so nothing has to
     be restored for epoch t+1

Mean aggregation over equally weighted workers is the same update as SGD on
the pooled batch, so no per-worker bookkeeping happens here.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.errors.exceptions import RemapError, ValidationError
from src.models.domain import FlipPlan, LabeledDataset, ModelParams, RunResult
from src.models.schemas import AttackMode, EpochRecord, SgdConfig, ThreatModel
from src.services.attack_service import apply_plan, plan_attack, poisoned_objective
from src.services.model_service import accuracy, init_params, loss, predict, sgd_epoch
from src.utils.budget import fraction_count
from src.utils.rng import child_rng

logger = logging.getLogger(__name__)

REMAPS = ("identity", "swap", "cyclic")


def sample_attacker_subset(n: int, k: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted uniform sample of floor(k·n) distinct indices from [0, n)."""
    if not 0.0 <= k <= 1.0:
        raise ValidationError(f"write access k must lie in [0, 1], got {k}")
    size = fraction_count(k, n)
    if size == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(n, size=size, replace=False)).astype(np.int64)


def _attack_enabled(threat: ThreatModel, n: int) -> bool:
    return fraction_count(threat.local_budget_b, fraction_count(threat.write_access_k, n)) > 0


def _target_distance(params: ModelParams, target: Optional[ModelParams]) -> Optional[float]:
    if target is None:
        return None
    return float(np.linalg.norm(params.array - target.array))


def run_training(
    train: LabeledDataset,
    test: LabeledDataset,
    threat: ThreatModel,
    sgd: SgdConfig,
    seed: int,
    model: str = "auto",
    init: Optional[ModelParams] = None,
) -> RunResult:
    """
    Train from zero (or `init`) for sgd.epochs epochs under `threat`.

    With k = 0, b = 0 or a budget that rounds to zero flips no attack work is
    done and the trajectory equals the honest one for the same seed.
    """
    params = init if init is not None else init_params(train.num_classes, train.dim, model)
    targeted = threat.attack.mode == AttackMode.TARGETED
    target = threat.target if targeted else None
    attacking = _attack_enabled(threat, train.n_samples)

    fixed_subset: Optional[np.ndarray] = None
    if threat.fixed_attacker_subset:
        fixed_subset = sample_attacker_subset(
            train.n_samples, threat.write_access_k, child_rng(seed, 1, "subset"),
        )

    logger.info(
        "training.start seed=%d n=%d k=%s b=%s mode=%s epochs=%d attack=%s",
        seed, train.n_samples, threat.write_access_k, threat.local_budget_b,
        threat.attack.mode.value, sgd.epochs, attacking,
    )

    records: List[EpochRecord] = []
    for epoch in range(1, sgd.epochs + 1):
        plan = FlipPlan()
        poisoned = train
        attack_obj = honest_obj = 0.0

        if attacking:
            controlled = fixed_subset if fixed_subset is not None else sample_attacker_subset(
                train.n_samples, threat.write_access_k, child_rng(seed, epoch, "subset"),
            )
            delta, plan = plan_attack(
                threat.attack, train, params, controlled, child_rng(seed, epoch, "attack"),
            )
            poisoned = apply_plan(train, plan)
            honest_obj = poisoned_objective(params, delta, train.subset(controlled))
            attack_obj = poisoned_objective(params, delta, poisoned.subset(controlled))

        params = sgd_epoch(params, poisoned, sgd, child_rng(seed, epoch, "shuffle"))

        record = EpochRecord(
            epoch=epoch,
            test_accuracy=accuracy(params, test),
            train_loss=loss(params, train),
            flips_used=plan.flips_used,
            attack_objective=attack_obj,
            honest_objective=honest_obj,
            target_distance=_target_distance(params, target),
        )
        records.append(record)
        logger.debug(
            "training.epoch seed=%d epoch=%d acc=%.4f loss=%.4f flips=%d",
            seed, epoch, record.test_accuracy, record.train_loss, record.flips_used,
        )

    logger.info("training.done seed=%d final_acc=%.4f", seed, records[-1].test_accuracy)
    return RunResult(seed=seed, threat=threat, sgd=sgd, records=tuple(records), final_params=params)


def honest_baseline(
    train: LabeledDataset,
    test: LabeledDataset,
    sgd: SgdConfig,
    seed: int,
    model: str = "auto",
) -> RunResult:
    return run_training(train, test, ThreatModel(), sgd, seed, model)


# ---------------------------------------------------------------------------
# Target models
# ---------------------------------------------------------------------------

def build_remap(name: str, num_classes: int) -> Dict[int, int]:
    """Named label maps: identity, swap (0 ↔ 1, binary only) and cyclic y ↦ (y+1) mod C."""
    if name == "identity":
        return {c: c for c in range(num_classes)}
    if name == "swap":
        if num_classes != 2:
            raise RemapError(f"swap remap needs 2 classes, got {num_classes}")
        return {0: 1, 1: 0}
    if name == "cyclic":
        return {c: (c + 1) % num_classes for c in range(num_classes)}
    if name == "auto":
        return build_remap("swap" if num_classes == 2 else "cyclic", num_classes)
    raise RemapError(f"unknown remap '{name}', expected one of {', '.join(REMAPS)} or auto")


def _remap_table(remap: Dict[int, int], num_classes: int) -> np.ndarray:
    classes = set(range(num_classes))
    if set(remap) != classes or set(remap.values()) != classes:
        raise RemapError(
            f"remap is not a bijection on [0, {num_classes})",
            details={"remap": {str(k): v for k, v in sorted(remap.items())}},
        )
    return np.array([remap[c] for c in range(num_classes)], dtype=np.int64)


def make_target_params(
    train: LabeledDataset,
    remap: Dict[int, int],
    sgd: SgdConfig,
    seed: int,
    model: str = "auto",
) -> ModelParams:
    """Final parameters of an honest model trained on the remapped labels."""
    table = _remap_table(remap, train.num_classes)
    remapped = train.with_labels(table[train.labels])
    logger.info(
        "training.target seed=%d remap=%s epochs=%d",
        seed, [int(v) for v in table], sgd.epochs,
    )
    result = honest_baseline(remapped, remapped, sgd, seed, model)
    return result.final_params


def agreement(params: ModelParams, data: LabeledDataset, labels: Sequence[int]) -> float:
    """Fraction of rows of `data` on which `params` predicts `labels`."""
    expected = np.asarray(labels, dtype=np.int64)
    return float(np.mean(predict(params, data) == expected))
