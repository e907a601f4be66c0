"""Exception hierarchy shared by all pipeline stages.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
anything else from this hierarchy -> 4.
"""

from __future__ import annotations


class AttackTransferError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AttackTransferError):
    """Invalid run configuration (bad keys, bad values, missing files)."""


class DataError(AttackTransferError):
    """Problem with input data files or derived datasets."""


class SchemaError(DataError):
    """CSV layout does not match the expected flow-record schema."""


class LabelError(DataError):
    """A label string or class id is not part of the known class set."""


class UnusableColumnError(DataError):
    """A feature column contains no finite value, so it cannot be cleaned."""


class CacheError(DataError):
    """Dataset cache file is missing, corrupt, or of an unknown version."""


class InsufficientSamplesError(DataError):
    """Too few records to run the requested resampling operation."""


class EmptyClassError(DataError):
    """A required class has no records in the relevant partition."""


class TrainingDivergedError(AttackTransferError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")
