"""Stable run identifiers used in per-run result file names."""

import logging

logger = logging.getLogger(__name__)


def format_fraction(value: float) -> str:
    """9 significant digits, as in the CSVs: 0.25 -> '0.25', 1.0 -> '1', 1e-07 -> '1e-07'."""
    return format(float(value), ".9g")


def run_id(mode: str, k: float, b: float, seed: int) -> str:
    rid = f"{mode}_{format_fraction(k)}_{format_fraction(b)}_{seed}"
    logger.debug("run_id.generated run_id=%s", rid)
    return rid


def run_file_name(mode: str, k: float, b: float, seed: int) -> str:
    return f"run_{run_id(mode, k, b, seed)}.csv"
