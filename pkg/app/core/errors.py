"""
Error types shared by the core modules.

Each error also derives from the builtin it refines, so callers that only
care about ValueError / RuntimeError keep working.
"""

from typing import Optional


class PipelineError(Exception):
    """Base class for every failure raised by the reward/training pipeline."""


class ImageDecodeError(PipelineError, ValueError):
    """Raised when a screenshot file cannot be decoded."""


class OutOfBoundsError(PipelineError, ValueError):
    """Raised when a coordinate falls outside the image frame."""


class RecordError(PipelineError, ValueError):
    """A dataset line that could not be parsed, anchored to its line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class DimensionMismatchError(PipelineError, ValueError):
    """Raised when policy parameters and a grid disagree on shape."""


class SnapshotMismatchError(PipelineError, RuntimeError):
    """Raised when a group was not sampled under the expected old policy."""


class NonFiniteError(PipelineError, RuntimeError):
    """Training produced a NaN/inf objective or gradient."""

    def __init__(self, message: str, record: Optional[dict] = None):
        super().__init__(message)
        self.record = record or {}


class PlacementError(PipelineError, RuntimeError):
    """The synthetic generator could not place its widgets."""
