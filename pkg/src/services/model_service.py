"""
Model service: binary and multinomial logistic regression.

Losses and gradients use mean normalisation (1/N). Log terms are clamped at
1e-12 so a confidently wrong prediction gives a large finite loss instead of
inf. Everything here is a pure function of its arguments; the only source of
randomness is the Generator passed to sgd_epoch.
"""

import logging
import math
from typing import Union

import numpy as np

from src.errors.exceptions import DimensionMismatchError, ValidationError
from src.models.domain import BinaryParams, LabeledDataset, ModelParams, MulticlassParams
from src.models.schemas import SgdConfig

logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-12
_LOG_FLOOR = math.log(LOG_CLAMP)

ArrayLike = Union[float, np.ndarray]


# ---------------------------------------------------------------------------
# Link functions
# ---------------------------------------------------------------------------

def sigmoid(z: ArrayLike) -> ArrayLike:
    """1/(1+e^{-z}); the e^z/(1+e^z) form is used for z <= 0 so nothing overflows."""
    arr = np.asarray(z, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr > 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ez = np.exp(arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max-subtraction."""
    arr = np.asarray(logits, dtype=np.float64)
    shifted = arr - np.max(arr, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    arr = np.asarray(logits, dtype=np.float64)
    shifted = arr - np.max(arr, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# Array kernels (no validation; used per mini-batch)
# ---------------------------------------------------------------------------

def _binary_loss_arrays(alpha: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    z = X @ alpha
    # log σ(z) = -log(1 + e^{-z}),  log(1 - σ(z)) = log σ(-z)
    log_p = np.maximum(-np.logaddexp(0.0, -z), _LOG_FLOOR)
    log_q = np.maximum(-np.logaddexp(0.0, z), _LOG_FLOOR)
    return float(-np.mean(y * log_p + (1 - y) * log_q))


def _binary_gradient_arrays(alpha: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    residual = sigmoid(X @ alpha) - y
    return (residual @ X) / X.shape[0]


def _multiclass_loss_arrays(W: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    log_probs = log_softmax(X @ W.T)
    picked = np.maximum(log_probs[np.arange(X.shape[0]), y], _LOG_FLOOR)
    return float(-np.mean(picked))


def _multiclass_gradient_arrays(W: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    residual = softmax(X @ W.T)
    residual[np.arange(X.shape[0]), y] -= 1.0
    return (residual.T @ X) / X.shape[0]


def gradient_arrays(params: ModelParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the mean loss on raw arrays; same shape as params.array."""
    if isinstance(params, BinaryParams):
        return _binary_gradient_arrays(params.alpha, X, y)
    return _multiclass_gradient_arrays(params.weights, X, y)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def _check_width(params: ModelParams, data: LabeledDataset) -> None:
    if params.width != data.features.shape[1]:
        raise DimensionMismatchError(
            f"parameter width {params.width} does not match feature width {data.features.shape[1]}",
            details={"params": params.width, "features": data.features.shape[1]},
        )


def _check_binary(params: BinaryParams, data: LabeledDataset) -> None:
    if data.num_classes != 2:
        raise ValidationError(f"binary model needs a 2-class dataset, got {data.num_classes} classes")
    _check_width(params, data)


def _check_multiclass(params: MulticlassParams, data: LabeledDataset) -> None:
    if params.num_classes != data.num_classes:
        raise DimensionMismatchError(
            f"model has {params.num_classes} classes, dataset has {data.num_classes}"
        )
    _check_width(params, data)


def check_compatible(params: ModelParams, data: LabeledDataset) -> None:
    if isinstance(params, BinaryParams):
        _check_binary(params, data)
    else:
        _check_multiclass(params, data)


# ---------------------------------------------------------------------------
# Public: losses and gradients
# ---------------------------------------------------------------------------

def binary_loss(params: BinaryParams, data: LabeledDataset) -> float:
    _check_binary(params, data)
    return _binary_loss_arrays(params.alpha, data.features, data.labels)


def binary_gradient(params: BinaryParams, data: LabeledDataset) -> np.ndarray:
    _check_binary(params, data)
    return _binary_gradient_arrays(params.alpha, data.features, data.labels)


def multiclass_loss(params: MulticlassParams, data: LabeledDataset) -> float:
    _check_multiclass(params, data)
    return _multiclass_loss_arrays(params.weights, data.features, data.labels)


def multiclass_gradient(params: MulticlassParams, data: LabeledDataset) -> np.ndarray:
    _check_multiclass(params, data)
    return _multiclass_gradient_arrays(params.weights, data.features, data.labels)


def loss(params: ModelParams, data: LabeledDataset) -> float:
    if isinstance(params, BinaryParams):
        return binary_loss(params, data)
    return multiclass_loss(params, data)


def gradient(params: ModelParams, data: LabeledDataset) -> np.ndarray:
    if isinstance(params, BinaryParams):
        return binary_gradient(params, data)
    return multiclass_gradient(params, data)


# ---------------------------------------------------------------------------
# Public: initialisation, training, evaluation
# ---------------------------------------------------------------------------

def init_params(num_classes: int, dim: int, model: str = "auto") -> ModelParams:
    """
    Zero-initialised parameters for a d-dimensional (plus bias) problem.

    model="auto" picks the binary α for two classes and W otherwise;
    "multiclass" forces W even when C == 2.
    """
    if model not in {"auto", "binary", "multiclass"}:
        raise ValidationError(f"model must be auto/binary/multiclass, got '{model}'")
    if model == "binary" and num_classes != 2:
        raise ValidationError(f"binary model needs 2 classes, got {num_classes}")
    if num_classes == 2 and model != "multiclass":
        return BinaryParams(np.zeros(dim + 1))
    return MulticlassParams(np.zeros((num_classes, dim + 1)))


def sgd_epoch(
    params: ModelParams,
    data: LabeledDataset,
    cfg: SgdConfig,
    rng: np.random.Generator,
) -> ModelParams:
    """
    One full pass of mini-batch SGD.

    Indices are shuffled with `rng` and cut into batches of cfg.batch_size;
    the last batch may be short and is still used.
    """
    check_compatible(params, data)
    X, y = data.features, data.labels
    order = rng.permutation(data.n_samples)
    theta = np.array(params.array, dtype=np.float64)
    lr = cfg.learning_rate
    kernel = _binary_gradient_arrays if isinstance(params, BinaryParams) else _multiclass_gradient_arrays

    for start in range(0, data.n_samples, cfg.batch_size):
        batch = order[start:start + cfg.batch_size]
        theta -= lr * kernel(theta, X[batch], y[batch])

    return params.replace(theta)


def predict(params: ModelParams, data: LabeledDataset) -> np.ndarray:
    """Binary: 1 iff σ(αᵀx) >= 0.5. Multiclass: argmax, ties to the lowest class."""
    _check_width(params, data)
    if isinstance(params, BinaryParams):
        return (sigmoid(data.features @ params.alpha) >= 0.5).astype(np.int64)
    return np.argmax(data.features @ params.weights.T, axis=1).astype(np.int64)


def accuracy(params: ModelParams, data: LabeledDataset) -> float:
    if data.n_samples == 0:
        raise ValidationError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict(params, data) == data.labels))
