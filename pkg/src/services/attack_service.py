"""
Attack service: per-epoch label-flipping attack under a flip budget.

Flow for plan_attack:
  Step 1: Δ from the clean dataset and current parameters
            untargeted: Δ = −∇L_{D_H}(θ)
            targeted:   Δ = −(θ_target − θ)        (row-wise for W)
  Step 2: Score the controlled set K
            binary:     s_i = <Δ, x_i>
            multiclass: Z[c, n] = <x_n, Δ_c> − Σ_j softmax(W x_n)_j <x_n, Δ_j>
  Step 3: Select at most floor(b·|K|) label changes

Only label changes consume budget. An unchanged label is never part of a
plan, and neither is a change that cannot lower the objective: when a point
scores a tie between its current label and another, it keeps its label.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors.exceptions import AttackConfigError, DimensionMismatchError, ValidationError
from src.models.domain import (
    AttackDirection,
    BinaryParams,
    FlipPlan,
    LabeledDataset,
    ModelParams,
    MulticlassParams,
    ScoreTable,
)
from src.models.schemas import AttackConfig, AttackMode, SelectionRule
from src.services.model_service import check_compatible, gradient, softmax
from src.utils.budget import fraction_count

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Direction
# ---------------------------------------------------------------------------

def compute_direction(
    cfg: AttackConfig,
    honest_data: LabeledDataset,
    params: ModelParams,
) -> AttackDirection:
    """Reference direction Δ the poisoned gradient is anti-aligned with."""
    if cfg.mode == AttackMode.UNTARGETED:
        rows = -gradient(params, honest_data)
        return AttackDirection(np.atleast_2d(rows))

    target = cfg.target
    if target is None:
        raise AttackConfigError("targeted attack requires target parameters")
    if type(target) is not type(params) or target.array.shape != params.array.shape:
        raise AttackConfigError(
            f"target parameters {target.kind}{target.array.shape} are incompatible with "
            f"model parameters {params.kind}{params.array.shape}"
        )
    return AttackDirection(np.atleast_2d(params.array - target.array))


# ---------------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------------

def controlled_indices(data: LabeledDataset, controlled: Sequence[int]) -> np.ndarray:
    idx = np.asarray(controlled, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= data.n_samples):
        raise ValidationError(
            f"controlled index out of range for dataset of size {data.n_samples}",
            details={"min": int(idx.min()), "max": int(idx.max())},
        )
    if np.unique(idx).size != idx.size:
        raise ValidationError("controlled indices must be distinct")
    return idx


def _check_direction_width(delta: AttackDirection, data: LabeledDataset) -> None:
    if delta.rows.shape[1] != data.features.shape[1]:
        raise DimensionMismatchError(
            f"direction width {delta.rows.shape[1]} does not match feature width {data.features.shape[1]}"
        )


def binary_scores(
    delta: AttackDirection,
    data: LabeledDataset,
    controlled: Sequence[int],
) -> ScoreTable:
    """s_i = <Δ, x_i> for every i in K."""
    if delta.n_rows != 1:
        raise DimensionMismatchError(f"binary scoring needs a single-row direction, got {delta.n_rows} rows")
    _check_direction_width(delta, data)
    idx = controlled_indices(data, controlled)
    return ScoreTable(indices=idx, values=data.features[idx] @ delta.rows[0])


def multiclass_scores(
    params: MulticlassParams,
    deltas: AttackDirection,
    data: LabeledDataset,
    controlled: Sequence[int],
) -> ScoreTable:
    """Z[c, n]: contribution of labelling controlled point n as class c."""
    if deltas.n_rows != params.num_classes:
        raise DimensionMismatchError(
            f"multiclass scoring needs {params.num_classes} direction rows, got {deltas.n_rows}"
        )
    _check_direction_width(deltas, data)
    check_compatible(params, data)
    idx = controlled_indices(data, controlled)

    XK = data.features[idx]
    projections = XK @ deltas.rows.T                  # (|K|, C): <x_n, Δ_c>
    probs = softmax(XK @ params.weights.T)            # (|K|, C)
    baseline = np.sum(probs * projections, axis=1)    # constant in c per point
    return ScoreTable(indices=idx, values=(projections - baseline[:, None]).T)


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

def _rank_by_benefit(benefit: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Positions sorted by benefit descending, ties by lower dataset index."""
    return np.lexsort((indices, -benefit))


def _literal_rounds(
    order: np.ndarray,
    wants_change: np.ndarray,
    p: int,
) -> List[int]:
    """Walk points in `order`, p − flips at a time, until p labels changed."""
    chosen: List[int] = []
    cursor = 0
    while len(chosen) < p and cursor < order.size:
        chunk = order[cursor:cursor + (p - len(chosen))]
        cursor += chunk.size
        chosen.extend(int(pos) for pos in chunk if wants_change[pos])
    return chosen


def _plan(indices: np.ndarray, positions: Sequence[int], labels: np.ndarray, p: int) -> FlipPlan:
    assignments = tuple(sorted((int(indices[pos]), int(labels[pos])) for pos in positions))
    return FlipPlan(assignments=assignments, budget=p)


def _random_plan(
    data: LabeledDataset,
    idx: np.ndarray,
    p: int,
    rng: Optional[np.random.Generator],
) -> FlipPlan:
    if rng is None:
        raise ValidationError("selection_rule=random needs a random generator")
    if p == 0 or idx.size == 0:
        return FlipPlan(budget=p)
    positions = np.sort(rng.choice(idx.size, size=p, replace=False))
    current = data.labels[idx[positions]]
    # shift by 1..C-1 so the new label always differs
    shift = rng.integers(1, data.num_classes, size=p)
    new_labels = (current + shift) % data.num_classes
    assignments = tuple(sorted(zip(idx[positions].tolist(), new_labels.tolist())))
    return FlipPlan(assignments=assignments, budget=p)


def select_flips_binary(
    scores: ScoreTable,
    data: LabeledDataset,
    controlled: Sequence[int],
    b: float,
    rule: SelectionRule = SelectionRule.BENEFIT,
    rng: Optional[np.random.Generator] = None,
) -> FlipPlan:
    """
    Choose label flips minimising Σ s_i y_i over K.

    The desired label is 1 where s_i < 0 and 0 where s_i > 0.

      benefit:       among points whose label differs from the desired one,
                     flip the p with the largest |s_i|.
      paper_literal: take the p smallest s_i, assign desired labels, repeat
                     on the remainder while fewer than p labels changed.
      random:        p uniformly chosen points get the other label.
    """
    if data.num_classes != 2:
        raise ValidationError(f"binary selection needs a 2-class dataset, got {data.num_classes}")
    idx = controlled_indices(data, controlled)
    if scores.is_multiclass or not np.array_equal(scores.indices, idx):
        raise DimensionMismatchError("score table does not match the controlled set")
    if not 0.0 <= b <= 1.0:
        raise ValidationError(f"local budget b must lie in [0, 1], got {b}")
    p = fraction_count(b, idx.size)
    rule = SelectionRule.parse(rule)

    if rule == SelectionRule.RANDOM:
        return _random_plan(data, idx, p, rng)

    s = scores.values
    current = data.labels[idx]
    desired = np.where(s < 0, 1, np.where(s > 0, 0, current))
    wants_change = desired != current

    if rule == SelectionRule.BENEFIT:
        candidates = np.flatnonzero(wants_change)
        ranked = candidates[_rank_by_benefit(np.abs(s[candidates]), idx[candidates])]
        chosen = ranked[:p].tolist()
    else:
        order = np.lexsort((idx, s))
        chosen = _literal_rounds(order, wants_change, p)

    plan = _plan(idx, chosen, desired, p)
    logger.debug("attack.binary_plan controlled=%d budget=%d flips=%d rule=%s",
                 idx.size, p, plan.flips_used, rule.value)
    return plan


def select_flips_multiclass(
    scores: ScoreTable,
    data: LabeledDataset,
    controlled: Sequence[int],
    b: float,
    rule: SelectionRule = SelectionRule.BENEFIT,
    rng: Optional[np.random.Generator] = None,
) -> FlipPlan:
    """
    Choose relabelings minimising Σ_n Z[y_n, n] over K.

    Per point the best class is argmin_c Z[c, n] (current label if it is
    among the minimisers, otherwise the lowest such class).

      benefit:       among points whose best class differs from the label,
                     relabel the p with largest Z[y_n, n] − Z[c*, n].
      paper_literal: rank points by min_c Z[c, n] ascending and relabel the
                     p smallest, repeating while fewer than p labels changed.
      random:        p uniformly chosen points get a different random class.
    """
    idx = controlled_indices(data, controlled)
    if not scores.is_multiclass or not np.array_equal(scores.indices, idx):
        raise DimensionMismatchError("score table does not match the controlled set")
    if scores.values.shape[0] != data.num_classes:
        raise DimensionMismatchError(
            f"score table has {scores.values.shape[0]} classes, dataset has {data.num_classes}"
        )
    if not 0.0 <= b <= 1.0:
        raise ValidationError(f"local budget b must lie in [0, 1], got {b}")
    p = fraction_count(b, idx.size)
    rule = SelectionRule.parse(rule)

    if rule == SelectionRule.RANDOM:
        return _random_plan(data, idx, p, rng)

    Z = scores.values
    cols = np.arange(idx.size)
    current = data.labels[idx]
    z_min = Z.min(axis=0)
    z_current = Z[current, cols]
    best = np.where(z_current <= z_min, current, np.argmin(Z, axis=0))
    wants_change = best != current

    if rule == SelectionRule.BENEFIT:
        candidates = np.flatnonzero(wants_change)
        gain = z_current[candidates] - z_min[candidates]
        ranked = candidates[_rank_by_benefit(gain, idx[candidates])]
        chosen = ranked[:p].tolist()
    else:
        order = np.lexsort((idx, z_min))
        chosen = _literal_rounds(order, wants_change, p)

    plan = _plan(idx, chosen, best, p)
    logger.debug("attack.multiclass_plan controlled=%d budget=%d flips=%d rule=%s",
                 idx.size, p, plan.flips_used, rule.value)
    return plan


# ---------------------------------------------------------------------------
# Objective and plan application
# ---------------------------------------------------------------------------

def poisoned_objective(
    params: ModelParams,
    delta: AttackDirection,
    controlled_data: LabeledDataset,
) -> float:
    """
    <−∇L_K(θ), Δ> (Frobenius for W), with ∇L_K mean-normalised over K.

    Only the K term matters: honest labels are immutable, so the rest of the
    full-dataset gradient is the same for every candidate labelling.
    """
    check_compatible(params, controlled_data)
    _check_direction_width(delta, controlled_data)
    grad = np.atleast_2d(gradient(params, controlled_data))
    if grad.shape != delta.rows.shape:
        raise DimensionMismatchError(
            f"direction shape {delta.rows.shape} does not match gradient shape {grad.shape}"
        )
    return float(-np.sum(grad * delta.rows))


def apply_plan(data: LabeledDataset, plan: FlipPlan) -> LabeledDataset:
    """New dataset with the plan's labels; `data` itself is never modified."""
    if plan.flips_used == 0:
        return data
    labels = data.labels.copy()
    labels[plan.indices] = plan.new_labels
    return data.with_labels(labels)


def select_flips(
    params: ModelParams,
    delta: AttackDirection,
    data: LabeledDataset,
    controlled: Sequence[int],
    b: float,
    rule: SelectionRule = SelectionRule.BENEFIT,
    rng: Optional[np.random.Generator] = None,
) -> FlipPlan:
    """Dispatch to the binary or multiclass path from the parameter kind."""
    if isinstance(params, BinaryParams):
        table = binary_scores(delta, data, controlled)
        return select_flips_binary(table, data, controlled, b, rule, rng)
    table = multiclass_scores(params, delta, data, controlled)
    return select_flips_multiclass(table, data, controlled, b, rule, rng)


def plan_attack(
    cfg: AttackConfig,
    honest_data: LabeledDataset,
    params: ModelParams,
    controlled: Sequence[int],
    rng: Optional[np.random.Generator] = None,
) -> Tuple[AttackDirection, FlipPlan]:
    """Steps 1–3 for one epoch: direction, scores, flip plan."""
    delta = compute_direction(cfg, honest_data, params)
    plan = select_flips(params, delta, honest_data, controlled, cfg.local_budget_b,
                        cfg.selection_rule, rng)
    return delta, plan
