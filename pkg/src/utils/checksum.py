"""SHA-256 digests for dataset fingerprints and config-keyed caches."""

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Union

from src.errors.exceptions import DataFileNotFoundError

CHUNK_SIZE = 1 << 20


def compute_file_checksum(file_path: Union[str, Path]) -> str:
    path = Path(file_path)
    if not path.is_file():
        raise DataFileNotFoundError(f"File not found for checksum: {path}")

    sha256 = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(CHUNK_SIZE), b""):
            sha256.update(chunk)
    return f"sha256:{sha256.hexdigest()}"


def fingerprint_files(paths: Iterable[Union[str, Path]]) -> str:
    """Order-sensitive digest over several files' checksums."""
    combined = hashlib.sha256()
    for path in paths:
        combined.update(compute_file_checksum(path).encode("ascii"))
    return f"sha256:{combined.hexdigest()}"


def config_digest(payload: Any) -> str:
    """Digest of a JSON-serialisable payload, key order independent."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
