"""Numeric domain containers.

Arrays are stored read-only so a dataset or parameter object can be shared
between epochs, runs and threads without copying.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, ClassVar, Sequence, Tuple, Union

import numpy as np

from src.errors.exceptions import DimensionMismatchError, ValidationError

if TYPE_CHECKING:
    from src.models.schemas import EpochRecord, SgdConfig, ThreatModel


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Bias-augmented feature rows (last column == 1.0) with integer labels."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        features = _owned(self.features, np.float64)
        labels = _owned(self.labels, np.int64)

        if features.ndim != 2 or features.shape[1] < 1:
            raise ValidationError(f"features must be a 2-D array, got shape {features.shape}")
        if features.shape[0] < 1:
            raise ValidationError("dataset is empty")
        if labels.shape != (features.shape[0],):
            raise DimensionMismatchError(
                f"labels shape {labels.shape} does not match {features.shape[0]} feature rows"
            )
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if not np.all(np.isfinite(features)):
            raise ValidationError("features contain non-finite values")
        if not np.all(features[:, -1] == 1.0):
            raise ValidationError("last feature coordinate must be the bias constant 1.0")
        _check_label_range(labels, self.num_classes)

        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def _trusted(cls, features: np.ndarray, labels: np.ndarray, num_classes: int) -> "LabeledDataset":
        # rows already validated by the dataset they came from
        clone = object.__new__(cls)
        object.__setattr__(clone, "features", _frozen(features))
        object.__setattr__(clone, "labels", _frozen(labels))
        object.__setattr__(clone, "num_classes", num_classes)
        return clone

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        """Raw feature dimension d (without the bias coordinate)."""
        return int(self.features.shape[1]) - 1

    def with_labels(self, labels: np.ndarray) -> "LabeledDataset":
        """Same feature rows (shared, not copied) with a new label vector."""
        labels = np.array(labels, dtype=np.int64)
        if labels.shape != self.labels.shape:
            raise DimensionMismatchError(
                f"labels shape {labels.shape} does not match {self.labels.shape}"
            )
        _check_label_range(labels, self.num_classes)
        return LabeledDataset._trusted(self.features, labels, self.num_classes)

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            raise ValidationError("subset selects no rows")
        if idx.min() < 0 or idx.max() >= self.n_samples:
            raise ValidationError(f"index out of range for dataset of size {self.n_samples}")
        return LabeledDataset._trusted(self.features[idx], self.labels[idx], self.num_classes)


def _owned(values, dtype) -> np.ndarray:
    """View read-only input as-is; copy anything the caller could still mutate."""
    array = np.asarray(values, dtype=dtype)
    if array.flags.writeable:
        array = array.copy()
    return array


def _check_label_range(labels: np.ndarray, num_classes: int) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValidationError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{int(labels.min())}, {int(labels.max())}]"
        )


@dataclass(frozen=True, eq=False)
class RawImageSet:
    """Decoded image container: images (N, H, W, channels) uint8, labels (N,) uint8."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.images.ndim != 4:
            raise DimensionMismatchError(f"images must be N×H×W×C, got shape {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise DimensionMismatchError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        object.__setattr__(self, "images", _frozen(np.ascontiguousarray(self.images, dtype=np.uint8)))
        object.__setattr__(self, "labels", _frozen(np.ascontiguousarray(self.labels, dtype=np.uint8)))

    @property
    def n_samples(self) -> int:
        return int(self.images.shape[0])


# ---------------------------------------------------------------------------
# Model parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BinaryParams:
    """Binary logistic regression weights α ∈ R^{d+1}."""

    alpha: np.ndarray
    kind: ClassVar[str] = "binary"

    def __post_init__(self) -> None:
        alpha = np.array(self.alpha, dtype=np.float64)
        if alpha.ndim != 1:
            raise DimensionMismatchError(f"alpha must be a vector, got shape {alpha.shape}")
        if not np.all(np.isfinite(alpha)):
            raise ValidationError("alpha contains non-finite values")
        object.__setattr__(self, "alpha", _frozen(alpha))

    @property
    def array(self) -> np.ndarray:
        return self.alpha

    @property
    def num_classes(self) -> int:
        return 2

    @property
    def width(self) -> int:
        return int(self.alpha.shape[0])

    def replace(self, array: np.ndarray) -> "BinaryParams":
        return BinaryParams(array)


@dataclass(frozen=True, eq=False)
class MulticlassParams:
    """Multinomial logistic regression weights W ∈ R^{C×(d+1)}."""

    weights: np.ndarray
    kind: ClassVar[str] = "multiclass"

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[0] < 2:
            raise DimensionMismatchError(f"weights must be C×(d+1) with C >= 2, got {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise ValidationError("weights contain non-finite values")
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def array(self) -> np.ndarray:
        return self.weights

    @property
    def num_classes(self) -> int:
        return int(self.weights.shape[0])

    @property
    def width(self) -> int:
        return int(self.weights.shape[1])

    def replace(self, array: np.ndarray) -> "MulticlassParams":
        return MulticlassParams(array)


ModelParams = Union[BinaryParams, MulticlassParams]


# ---------------------------------------------------------------------------
# Attack artefacts
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AttackDirection:
    """Reference direction Δ: one row (binary) or C rows (multiclass)."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.atleast_2d(np.array(self.rows, dtype=np.float64))
        if rows.ndim != 2:
            raise DimensionMismatchError(f"direction must be 2-D, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValidationError("direction contains non-finite values")
        object.__setattr__(self, "rows", _frozen(rows))

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.rows)


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Scores for controlled points.

    binary:     values has shape (|K|,)  : s_i = <Δ, x_i>
    multiclass: values has shape (C, |K|): Z[c, n]
    """

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "indices", _frozen(np.array(self.indices, dtype=np.int64)))
        object.__setattr__(self, "values", _frozen(np.array(self.values, dtype=np.float64)))
        if self.values.shape[-1] != self.indices.shape[0]:
            raise DimensionMismatchError(
                f"{self.values.shape[-1]} score columns for {self.indices.shape[0]} controlled points"
            )

    @property
    def is_multiclass(self) -> bool:
        return self.values.ndim == 2


@dataclass(frozen=True)
class FlipPlan:
    """Label changes chosen for one epoch; unchanged labels are never listed."""

    assignments: Tuple[Tuple[int, int], ...] = ()
    budget: int = 0

    @property
    def flips_used(self) -> int:
        return len(self.assignments)

    @property
    def indices(self) -> np.ndarray:
        return np.array([i for i, _ in self.assignments], dtype=np.int64)

    @property
    def new_labels(self) -> np.ndarray:
        return np.array([c for _, c in self.assignments], dtype=np.int64)


# ---------------------------------------------------------------------------
# Run results
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RunResult:
    """Per-epoch series for one seeded run."""

    seed: int
    threat: "ThreatModel"
    sgd: "SgdConfig"
    records: Tuple["EpochRecord", ...]
    final_params: ModelParams

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.test_accuracy for r in self.records], dtype=np.float64)
