"""Exception hierarchy shared by all modules.

Every error raised by this package derives from :class:`VisionTSError` so
callers can catch the library as a whole.  The CLI maps subclasses onto
exit codes (load/ingestion failures vs. runtime domain errors).
"""

from __future__ import annotations


class VisionTSError(Exception):
    """Base class for all errors raised by this package."""


class IngestionError(VisionTSError):
    """CSV ingestion failed.  Carries 1-based row/column when cell-level."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        if row is not None:
            message = f"{message} (row {row}" + (f", column {col})" if col is not None else ")")
        super().__init__(message)
        self.row = row
        self.col = col


class SplitError(VisionTSError):
    """Train/val/test boundaries are out of range or misordered."""


class WindowError(VisionTSError):
    """A sliding window cannot be formed from the available rows."""


class SelectionError(VisionTSError):
    """Every periodicity candidate failed to evaluate."""


class SegmentError(VisionTSError):
    """Context is shorter than one period."""


class CapacityError(VisionTSError):
    """The image plan cannot express the requested forecast horizon."""


class LoadError(VisionTSError):
    """Tensor archive is missing, malformed, or inconsistent with its manifest."""


class ShapeError(VisionTSError):
    """An array does not have the shape an operation requires."""


class NumericsError(VisionTSError):
    """A non-finite value appeared during model inference."""


class MetricError(VisionTSError):
    """Metric inputs are unusable (e.g. length mismatch)."""


class BaselineError(VisionTSError):
    """A baseline forecaster received an unusable context."""


class AggregationError(VisionTSError):
    """Cross-dataset aggregation is undefined for the given inputs."""


class ConfigError(VisionTSError):
    """A run configuration value is missing or invalid."""
