"""
Dataset service: MNIST IDX and CIFAR-10 binary loaders, class filtering,
bias augmentation and a synthetic Gaussian generator.

Both file formats are parsed bit-exactly; any malformed input raises a
DatasetFormatError subclass, never a bare struct/numpy exception.

  IDX (big-endian):   u32 magic | u32 N [| u32 H | u32 W] | u8 payload
                      images magic 0x00000803, labels magic 0x00000801
  CIFAR-10 batch:     N records of 3073 bytes = 1 label byte + 3072 pixel
                      bytes (1024 R, 1024 G, 1024 B, each 32×32 row-major)
"""

import logging
import struct
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from src.config.settings import get_settings
from src.errors.exceptions import (
    BadMagicError,
    CountMismatchError,
    DataFileNotFoundError,
    DatasetFormatError,
    EmptySelectionError,
    LabelRangeError,
    RecordLengthError,
    TruncatedPayloadError,
    ValidationError,
)
from src.models.domain import LabeledDataset, RawImageSet
from src.models.schemas import DatasetSpec
from src.utils.checksum import fingerprint_files

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CIFAR_SIDE = 32
CIFAR_CHANNELS = 3
CIFAR_PIXELS = CIFAR_SIDE * CIFAR_SIDE * CIFAR_CHANNELS
CIFAR_RECORD = 1 + CIFAR_PIXELS
CIFAR_CLASSES = 10

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}
CIFAR_FILES = {
    "train_batches": [f"data_batch_{i}.bin" for i in range(1, 6)],
    "test_batches": ["test_batch.bin"],
}

PathLike = Union[str, Path]


def _read_file(path: PathLike) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise DataFileNotFoundError(f"Dataset file not found: {p}", details={"path": str(p)})
    return p.read_bytes()


# ---------------------------------------------------------------------------
# MNIST IDX
# ---------------------------------------------------------------------------

def _idx_header(blob: bytes, expected_magic: int, n_dims: int, path: PathLike) -> Tuple[int, ...]:
    header_len = 4 * (1 + n_dims)
    if len(blob) < header_len:
        raise TruncatedPayloadError(
            f"{path}: {len(blob)} bytes is shorter than the {header_len}-byte IDX header"
        )
    magic, *dims = struct.unpack(f">{1 + n_dims}I", blob[:header_len])
    if magic != expected_magic:
        raise BadMagicError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}",
            details={"magic": magic, "expected": expected_magic},
        )
    return tuple(dims)


def _idx_payload(blob: bytes, offset: int, expected: int, path: PathLike) -> np.ndarray:
    actual = len(blob) - offset
    if actual < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {actual} bytes, header promises {expected}",
            details={"actual": actual, "expected": expected},
        )
    if actual > expected:
        raise DatasetFormatError(
            f"{path}: {actual - expected} unexpected trailing bytes after the payload",
            details={"actual": actual, "expected": expected},
        )
    return np.frombuffer(blob, dtype=np.uint8, count=expected, offset=offset)


def load_idx(images_path: PathLike, labels_path: PathLike) -> RawImageSet:
    """Parse an IDX image file (N×H×W) and its IDX label file (N)."""
    image_blob = _read_file(images_path)
    label_blob = _read_file(labels_path)

    n_images, rows, cols = _idx_header(image_blob, IDX_IMAGES_MAGIC, 3, images_path)
    (n_labels,) = _idx_header(label_blob, IDX_LABELS_MAGIC, 1, labels_path)
    if n_images != n_labels:
        raise CountMismatchError(
            f"{images_path} holds {n_images} images but {labels_path} holds {n_labels} labels",
            details={"images": n_images, "labels": n_labels},
        )

    pixels = _idx_payload(image_blob, 16, n_images * rows * cols, images_path)
    labels = _idx_payload(label_blob, 8, n_labels, labels_path)

    raw = RawImageSet(images=pixels.reshape(n_images, rows, cols, 1), labels=labels)
    logger.info("dataset.idx_loaded images=%s n=%d shape=%dx%d", images_path, n_images, rows, cols)
    return raw


# ---------------------------------------------------------------------------
# CIFAR-10 binary batches
# ---------------------------------------------------------------------------

def load_cifar10(batch_paths: Sequence[PathLike]) -> RawImageSet:
    """Concatenate CIFAR-10 binary batch files in the given order."""
    if not batch_paths:
        raise ValidationError("load_cifar10 needs at least one batch file")

    images: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    for path in batch_paths:
        blob = _read_file(path)
        if len(blob) % CIFAR_RECORD != 0:
            raise RecordLengthError(
                f"{path}: length {len(blob)} is not a multiple of the {CIFAR_RECORD}-byte record",
                details={"length": len(blob)},
            )
        records = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        batch_labels = records[:, 0]
        if batch_labels.size and batch_labels.max() >= CIFAR_CLASSES:
            bad = int(np.flatnonzero(batch_labels >= CIFAR_CLASSES)[0])
            raise LabelRangeError(
                f"{path}: record {bad} has label {int(batch_labels[bad])}, expected 0..9",
                details={"record": bad, "label": int(batch_labels[bad])},
            )
        # channel-major on disk -> N×H×W×C
        planes = records[:, 1:].reshape(-1, CIFAR_CHANNELS, CIFAR_SIDE, CIFAR_SIDE)
        images.append(planes.transpose(0, 2, 3, 1))
        labels.append(batch_labels)
        logger.debug("dataset.cifar_batch path=%s records=%d", path, records.shape[0])

    raw = RawImageSet(images=np.concatenate(images), labels=np.concatenate(labels))
    logger.info("dataset.cifar_loaded batches=%d n=%d", len(batch_paths), raw.n_samples)
    return raw


# ---------------------------------------------------------------------------
# Conversion
# ---------------------------------------------------------------------------

def to_dataset(raw: RawImageSet, spec: DatasetSpec) -> LabeledDataset:
    """
    Flatten images row-major, append the bias coordinate 1.0 and apply the
    class filter (a -> 0, b -> 1, original order preserved).
    """
    num_classes = spec.source_classes
    labels = raw.labels.astype(np.int64)
    if labels.size and labels.max() >= num_classes:
        raise LabelRangeError(
            f"label {int(labels.max())} outside [0, {num_classes}) for source {spec.source}"
        )

    keep = np.arange(raw.n_samples)
    if spec.class_filter is not None:
        a, b = spec.class_filter
        keep = np.flatnonzero((labels == a) | (labels == b))
        if keep.size == 0:
            raise EmptySelectionError(
                f"class filter ({a}, {b}) selects no samples",
                details={"class_filter": [a, b]},
            )
        labels = np.where(labels[keep] == a, 0, 1)
        num_classes = 2
    elif raw.n_samples == 0:
        raise EmptySelectionError("image set is empty")

    pixels = raw.images[keep].reshape(keep.size, -1).astype(np.float64)
    if spec.pixel_scale == "unit":
        pixels /= 255.0
    features = np.hstack([pixels, np.ones((keep.size, 1))])

    dataset = LabeledDataset(features, labels, num_classes)
    logger.info(
        "dataset.converted source=%s n=%d d=%d classes=%d scale=%s",
        spec.source, dataset.n_samples, dataset.dim, num_classes, spec.pixel_scale,
    )
    return dataset


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

def synth_gaussian(
    n_per_class: int,
    d: int,
    C: int,
    separation: float,
    rng: np.random.Generator,
) -> LabeledDataset:
    """Class c ~ N(separation · e_{c mod d}, I_d), bias-augmented, classes in blocks."""
    if n_per_class < 1:
        raise ValidationError(f"n_per_class must be >= 1, got {n_per_class}")
    if separation < 0:
        raise ValidationError(f"separation must be >= 0, got {separation}")
    if d < 1 or C < 2:
        raise ValidationError(f"need d >= 1 and C >= 2, got d={d}, C={C}")

    blocks = []
    for c in range(C):
        center = np.zeros(d)
        center[c % d] = separation
        blocks.append(rng.standard_normal((n_per_class, d)) + center)
    X = np.vstack(blocks)
    labels = np.repeat(np.arange(C), n_per_class)
    return LabeledDataset(np.hstack([X, np.ones((X.shape[0], 1))]), labels, C)


# ---------------------------------------------------------------------------
# DatasetSpec-driven loading
# ---------------------------------------------------------------------------

def _resolve(value: Union[str, List[str]], base: Path) -> Union[Path, List[Path]]:
    if isinstance(value, list):
        return [_resolve(v, base) for v in value]  # type: ignore[misc]
    p = Path(value)
    return p if p.is_absolute() else base / p


def resolve_paths(spec: DatasetSpec) -> Dict[str, Union[Path, List[Path]]]:
    """Spec paths merged over the canonical file names, relative to FLIPSIM_DATA_DIR."""
    base = get_settings().data_dir
    defaults = {"mnist": MNIST_FILES, "cifar10": CIFAR_FILES}.get(spec.source, {})
    merged: Dict[str, Union[str, List[str]]] = dict(defaults)
    merged.update(spec.paths)
    return {key: _resolve(value, base) for key, value in merged.items()}


def _flatten_paths(paths: Dict[str, Union[Path, List[Path]]]) -> List[Path]:
    flat: List[Path] = []
    for key in sorted(paths):
        value = paths[key]
        flat.extend(value if isinstance(value, list) else [value])
    return flat


def load_dataset(spec: DatasetSpec) -> Tuple[LabeledDataset, LabeledDataset]:
    """Return (train, test) datasets described by `spec`."""
    if spec.source == "synthetic":
        syn = spec.synthetic
        rng = np.random.default_rng(syn.seed)
        train = synth_gaussian(syn.n_per_class, syn.dim, syn.num_classes, syn.separation, rng)
        test = synth_gaussian(syn.test_per_class, syn.dim, syn.num_classes, syn.separation, rng)
        if spec.class_filter is not None:
            train, test = _filter_synthetic(train, spec), _filter_synthetic(test, spec)
        return train, test

    paths = resolve_paths(spec)
    if spec.source == "mnist":
        train_raw = load_idx(paths["train_images"], paths["train_labels"])
        test_raw = load_idx(paths["test_images"], paths["test_labels"])
    else:
        train_raw = load_cifar10(_as_list(paths["train_batches"]))
        test_raw = load_cifar10(_as_list(paths["test_batches"]))
    return to_dataset(train_raw, spec), to_dataset(test_raw, spec)


def dataset_fingerprint(spec: DatasetSpec) -> str:
    """Checksum over the source files (or the synthetic parameters)."""
    if spec.source == "synthetic":
        return f"synthetic:{spec.synthetic.model_dump_json()}"
    return fingerprint_files(_flatten_paths(resolve_paths(spec)))


def _as_list(value: Union[Path, List[Path]]) -> List[Path]:
    return value if isinstance(value, list) else [value]


def _filter_synthetic(data: LabeledDataset, spec: DatasetSpec) -> LabeledDataset:
    a, b = spec.class_filter  # type: ignore[misc]
    keep = np.flatnonzero((data.labels == a) | (data.labels == b))
    if keep.size == 0:
        raise EmptySelectionError(f"class filter ({a}, {b}) selects no samples")
    labels = np.where(data.labels[keep] == a, 0, 1)
    return LabeledDataset(data.features[keep], labels, 2)
