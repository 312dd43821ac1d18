"""
Oracle service: exhaustive reference for the greedy flip selection.

oracle_best_flips enumerates every labelling of the controlled set that
changes at most floor(b·|K|) labels and evaluates the poisoned objective
directly from the gradient of L_K under that labelling. It shares no
scoring code with attack_service, so agreement between the two is a real
check of the greedy rule (and of the multiclass score formula).
"""

import itertools
import logging
from typing import List, Sequence, Tuple

import numpy as np

from src.errors.exceptions import DimensionMismatchError, OracleTooLargeError
from src.models.domain import (
    AttackDirection,
    BinaryParams,
    FlipPlan,
    LabeledDataset,
    ModelParams,
    MulticlassParams,
)
from src.models.schemas import OracleCheckReport, SelectionRule
from src.services.attack_service import (
    apply_plan,
    controlled_indices,
    poisoned_objective,
    select_flips,
)
from src.services.model_service import check_compatible, sigmoid, softmax
from src.utils.budget import fraction_count

logger = logging.getLogger(__name__)

MAX_ASSIGNMENTS = 10 ** 6
TIE_TOLERANCE = 1e-12
DEFAULT_BUDGETS = (0.0, 0.25, 0.5, 1.0)


def _batched_objectives(
    params: ModelParams,
    delta: AttackDirection,
    XK: np.ndarray,
    assignments: np.ndarray,
) -> np.ndarray:
    """Objective <−∇L_K, Δ> for each row of `assignments` (M, |K|)."""
    n = XK.shape[0]
    if isinstance(params, BinaryParams):
        residual = sigmoid(XK @ params.alpha)[None, :] - assignments        # (M, |K|)
        grads = residual @ XK / n                                           # (M, d+1)
        return -(grads @ delta.rows[0])

    probs = softmax(XK @ params.weights.T)                                  # (|K|, C)
    one_hot = np.eye(params.num_classes)[assignments]                       # (M, |K|, C)
    residual = probs[None, :, :] - one_hot
    grads = np.einsum("mnc,nd->mcd", residual, XK) / n                      # (M, C, d+1)
    return -np.einsum("mcd,cd->m", grads, delta.rows)


def oracle_best_flips(
    params: ModelParams,
    delta: AttackDirection,
    data: LabeledDataset,
    controlled: Sequence[int],
    b: float,
) -> FlipPlan:
    """Minimum-objective plan by enumeration; ties go to the lexicographically smallest labelling."""
    check_compatible(params, data)
    if delta.n_rows != np.atleast_2d(params.array).shape[0]:
        raise DimensionMismatchError(
            f"direction has {delta.n_rows} rows, parameters have {np.atleast_2d(params.array).shape[0]}"
        )
    idx = controlled_indices(data, controlled)
    n_classes = data.num_classes
    total = n_classes ** idx.size
    if total > MAX_ASSIGNMENTS:
        raise OracleTooLargeError(
            f"{n_classes}^{idx.size} = {total} labellings exceeds the oracle limit {MAX_ASSIGNMENTS}",
            details={"classes": n_classes, "controlled": int(idx.size)},
        )
    p = fraction_count(b, idx.size)
    current = data.labels[idx]

    # itertools.product yields labellings in lexicographic order
    assignments = np.array(list(itertools.product(range(n_classes), repeat=idx.size)), dtype=np.int64)
    assignments = assignments.reshape(total, idx.size)
    feasible = assignments[np.sum(assignments != current[None, :], axis=1) <= p]

    values = _batched_objectives(params, delta, data.features[idx], feasible)
    best_row = feasible[int(np.flatnonzero(values <= values.min() + TIE_TOLERANCE)[0])]

    changed = np.flatnonzero(best_row != current)
    plan = FlipPlan(
        assignments=tuple((int(idx[pos]), int(best_row[pos])) for pos in changed),
        budget=p,
    )
    logger.debug("oracle.best controlled=%d feasible=%d flips=%d", idx.size, len(feasible), plan.flips_used)
    return plan


def plan_objective(
    params: ModelParams,
    delta: AttackDirection,
    data: LabeledDataset,
    controlled: Sequence[int],
    plan: FlipPlan,
) -> float:
    """Poisoned objective on K after applying `plan`."""
    return poisoned_objective(params, delta, apply_plan(data, plan).subset(controlled))


# ---------------------------------------------------------------------------
# Random instances and the oracle-check routine
# ---------------------------------------------------------------------------

def random_instance(
    rng: np.random.Generator,
    n_controlled: int,
    dim: int,
    num_classes: int,
    multiclass: bool,
    n_extra: int = 0,
) -> Tuple[ModelParams, AttackDirection, LabeledDataset, np.ndarray]:
    """Random params, direction, dataset and controlled set for oracle comparisons."""
    n = n_controlled + n_extra
    X = np.hstack([rng.normal(size=(n, dim)), np.ones((n, 1))])
    labels = rng.integers(0, num_classes, size=n)
    data = LabeledDataset(X, labels, num_classes)
    if multiclass:
        params: ModelParams = MulticlassParams(rng.normal(size=(num_classes, dim + 1)))
        delta = AttackDirection(rng.normal(size=(num_classes, dim + 1)))
    else:
        params = BinaryParams(rng.normal(size=dim + 1))
        delta = AttackDirection(rng.normal(size=(1, dim + 1)))
    controlled = np.sort(rng.choice(n, size=n_controlled, replace=False))
    return params, delta, data, controlled


def run_oracle_check(
    instances: int = 200,
    seed: int = 0,
    max_controlled_binary: int = 12,
    max_controlled_multiclass: int = 6,
    max_dim: int = 6,
    budgets: Sequence[float] = DEFAULT_BUDGETS,
    tolerance: float = 1e-9,
) -> OracleCheckReport:
    """
    Compare greedy (benefit rule) against the exhaustive oracle on random
    instances: half binary, half multiclass with C in {2, 3, 4}.
    """
    rng = np.random.default_rng(seed)
    failures: List[str] = []
    max_gap = 0.0
    n_binary = (instances + 1) // 2
    n_multi = instances - n_binary

    for i in range(instances):
        multiclass = i >= n_binary
        num_classes = int(rng.integers(2, 5)) if multiclass else 2
        limit = max_controlled_multiclass if multiclass else max_controlled_binary
        n_controlled = int(rng.integers(1, limit + 1))
        dim = int(rng.integers(1, max_dim + 1))
        params, delta, data, controlled = random_instance(
            rng, n_controlled, dim, num_classes, multiclass, n_extra=int(rng.integers(0, 4)),
        )
        for b in budgets:
            greedy = select_flips(params, delta, data, controlled, b, SelectionRule.BENEFIT)
            oracle = oracle_best_flips(params, delta, data, controlled, b)
            gap = plan_objective(params, delta, data, controlled, greedy) - \
                plan_objective(params, delta, data, controlled, oracle)
            max_gap = max(max_gap, abs(gap))
            if abs(gap) > tolerance or greedy.flips_used > greedy.budget:
                failures.append(
                    f"instance={i} kind={'multiclass' if multiclass else 'binary'} "
                    f"C={num_classes} |K|={n_controlled} b={b} gap={gap:.3e} "
                    f"flips={greedy.flips_used}/{greedy.budget}"
                )

    report = OracleCheckReport(
        instances=instances, binary_instances=n_binary, multiclass_instances=n_multi,
        max_gap=max_gap, failures=failures,
    )
    log = logger.info if report.passed else logger.error
    log("oracle.check instances=%d max_gap=%.3e failures=%d", instances, max_gap, len(failures))
    return report


