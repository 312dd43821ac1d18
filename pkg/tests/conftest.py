"""Shared fixtures: small synthetic datasets, IDX/CIFAR byte writers, isolated settings."""

import struct
from pathlib import Path
from typing import Callable, Dict, Sequence

import numpy as np
import pytest

from src.config.settings import get_settings
from src.models.domain import LabeledDataset
from src.services.dataset_service import (
    CIFAR_PIXELS,
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    MNIST_FILES,
    synth_gaussian,
)


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Point every FLIPSIM_* directory into tmp_path and rebuild the settings singleton."""
    monkeypatch.setenv("FLIPSIM_DATA_DIR", str(tmp_path / "data"))
    monkeypatch.setenv("FLIPSIM_OUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("FLIPSIM_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("FLIPSIM_JOBS", "1")
    monkeypatch.setenv("LOG_LEVEL", "INFO")
    monkeypatch.setenv("LOG_FORMAT", "text")
    get_settings.cache_clear()
    yield get_settings()
    get_settings.cache_clear()


@pytest.fixture
def binary_data() -> LabeledDataset:
    return synth_gaussian(30, 2, 2, 3.0, np.random.default_rng(0))


@pytest.fixture
def binary_test_data() -> LabeledDataset:
    return synth_gaussian(20, 2, 2, 3.0, np.random.default_rng(100))


@pytest.fixture
def multi_data() -> LabeledDataset:
    return synth_gaussian(20, 3, 3, 3.0, np.random.default_rng(1))


@pytest.fixture
def multi_test_data() -> LabeledDataset:
    return synth_gaussian(10, 3, 3, 3.0, np.random.default_rng(101))


def _idx_images(images: np.ndarray, magic: int = IDX_IMAGES_MAGIC, count: int = None) -> bytes:
    n, rows, cols = images.shape
    header = struct.pack(">IIII", magic, n if count is None else count, rows, cols)
    return header + images.astype(np.uint8).tobytes()


def _idx_labels(labels: Sequence[int], magic: int = IDX_LABELS_MAGIC, count: int = None) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    header = struct.pack(">II", magic, labels.size if count is None else count)
    return header + labels.tobytes()


@pytest.fixture
def idx_writer(tmp_path) -> Callable[..., Path]:
    """write(name, payload_bytes) -> path, plus .images/.labels encoders."""

    def write(name: str, payload: bytes) -> Path:
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
        return path

    write.images = _idx_images
    write.labels = _idx_labels
    return write


@pytest.fixture
def cifar_writer(tmp_path) -> Callable[..., Path]:
    """write(name, labels, planes) where planes has shape (N, 3, 32, 32)."""

    def write(name: str, labels: Sequence[int], planes: np.ndarray) -> Path:
        planes = np.asarray(planes, dtype=np.uint8).reshape(len(labels), CIFAR_PIXELS)
        records = np.hstack([np.asarray(labels, dtype=np.uint8)[:, None], planes])
        path = tmp_path / name
        path.write_bytes(records.tobytes())
        return path

    return write


def real_mnist_paths() -> Dict[str, str]:
    """Absolute MNIST paths under the configured FLIPSIM_DATA_DIR.

    Resolved at collection time, before the isolated settings fixture applies.
    """
    data_dir = Path(get_settings().data_dir).resolve()
    return {key: str(data_dir / name) for key, name in MNIST_FILES.items()}


def mnist_available() -> bool:
    return all(Path(p).is_file() for p in real_mnist_paths().values())
