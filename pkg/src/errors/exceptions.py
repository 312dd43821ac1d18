"""Custom exception hierarchy."""

from typing import Optional


class FlipSimError(Exception):
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ValidationError(FlipSimError):
    pass


class DimensionMismatchError(FlipSimError):
    pass


class AttackConfigError(FlipSimError):
    """Targeted attack without a target, or with a target of the wrong shape."""


class OracleTooLargeError(FlipSimError):
    pass


class RemapError(FlipSimError):
    pass


# ── Dataset files ────────────────────────────────────────────────────────────

class DataFileNotFoundError(FlipSimError):
    pass


class DatasetFormatError(FlipSimError):
    pass


class BadMagicError(DatasetFormatError):
    pass


class TruncatedPayloadError(DatasetFormatError):
    pass


class CountMismatchError(DatasetFormatError):
    pass


class RecordLengthError(DatasetFormatError):
    pass


class LabelRangeError(DatasetFormatError):
    pass


class EmptySelectionError(FlipSimError):
    pass


# ── Runs and results ─────────────────────────────────────────────────────────

class RunFailedError(FlipSimError):
    pass


class ResultsWriteError(FlipSimError):
    pass
