"""
Sweep config loading and validation.

Validation layers:
  1. File existence, UTF-8, parseable JSON/YAML (JSON is read as YAML)
  2. Root must be a mapping; a results manifest is accepted and its
     "config" block is used
  3. Unknown top-level keys are rejected before pydantic sees them
  4. CLI overrides are applied on top of the file values
  5. SweepConfig validation; every pydantic error is reported at once
"""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

import pydantic
import yaml

from src.errors.exceptions import DataFileNotFoundError, ValidationError
from src.models.schemas import SweepConfig

logger = logging.getLogger(__name__)

CONFIG_KEYS = frozenset(SweepConfig.model_fields)


# ---------------------------------------------------------------------------
# File-level
# ---------------------------------------------------------------------------

def load_config_document(config_path: Union[str, Path]) -> Dict[str, Any]:
    """Read a flat JSON/YAML config file (or a manifest.json) into a dict."""
    path = Path(config_path)
    if not path.is_file():
        raise DataFileNotFoundError(f"Config file not found: {path}", details={"path": str(path)})

    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except UnicodeDecodeError as exc:
        raise ValidationError(f"Config file is not valid UTF-8: {path.name}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"Invalid JSON/YAML in {path.name}: {exc}") from exc

    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ValidationError(
            f"{path.name}: config root must be a mapping, got {type(doc).__name__}"
        )

    if doc.get("tool") == "flipsim" and isinstance(doc.get("config"), dict):
        logger.debug("validator.manifest_config path=%s", path.name)
        doc = doc["config"]

    logger.debug("validator.config_loaded path=%s keys=%s", path.name, sorted(doc))
    return doc


# ---------------------------------------------------------------------------
# Document-level
# ---------------------------------------------------------------------------

def check_unknown_keys(doc: Mapping[str, Any], source: str = "config") -> None:
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ValidationError(
            f"{source}: unknown key(s) {', '.join(unknown)}; expected a subset of {', '.join(sorted(CONFIG_KEYS))}",
            details={"unknown": unknown},
        )


def apply_overrides(doc: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Copy of `doc` with every override that is not None (or an empty tuple) applied."""
    merged = dict(doc)
    for key, value in overrides.items():
        if value is None or (isinstance(value, (tuple, list)) and not value):
            continue
        merged[key] = list(value) if isinstance(value, tuple) else value
    return merged


def _format_errors(errors: Iterable[Dict[str, Any]]) -> str:
    lines = []
    for err in errors:
        loc = ".".join(str(part) for part in err.get("loc", ())) or "<root>"
        lines.append(f"  • {loc}: {err.get('msg', 'invalid value')}")
    return "\n".join(lines)


def build_sweep_config(
    doc: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    source: str = "config",
) -> SweepConfig:
    merged = apply_overrides(doc or {}, overrides or {})
    check_unknown_keys(merged, source)
    try:
        cfg = SweepConfig.model_validate(merged)
    except pydantic.ValidationError as exc:
        raise ValidationError(
            f"{source}: invalid sweep configuration:\n{_format_errors(exc.errors())}",
            details={"errors": [str(e.get("msg")) for e in exc.errors()]},
        ) from exc
    logger.debug("validator.sweep_config_ok cells=%d seeds=%d", cfg.n_cells, len(cfg.seeds))
    return cfg


def load_sweep_config(
    config_path: Optional[Union[str, Path]],
    overrides: Optional[Mapping[str, Any]] = None,
) -> SweepConfig:
    """File (optional) + overrides -> validated SweepConfig."""
    if config_path is None:
        return build_sweep_config({}, overrides, source="defaults")
    doc = load_config_document(config_path)
    return build_sweep_config(doc, overrides, source=Path(config_path).name)
