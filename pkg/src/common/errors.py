"""Exception hierarchy shared by every calibration stage."""
from __future__ import annotations

from typing import Optional


class CalibrationError(Exception):
    """Base class for all domain errors raised by this package."""


class SeriesTooShort(CalibrationError):
    """The series cannot hold a single history/future window."""


class EmptyInput(CalibrationError):
    """A required collection was empty."""


class DegenerateSeries(CalibrationError):
    """The series carries no usable variation (e.g. all channels constant)."""


class SingularDesign(CalibrationError):
    """A Gram matrix is numerically singular."""

    def __init__(self, message: str, group: Optional[int] = None) -> None:
        super().__init__(message)
        self.group = group


class ShapeMismatch(CalibrationError):
    """Array shapes do not agree with the declared model dimensions."""


class FormatError(CalibrationError):
    """A file does not conform to its declared format."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        record: Optional[int] = None,
    ) -> None:
        location = []
        if line is not None:
            location.append(f"line {line}")
        if record is not None:
            location.append(f"record {record}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.line = line
        self.record = record


class InsufficientData(CalibrationError):
    """Too few samples survived filtering to compute a statistic."""


class EmptyCandidates(CalibrationError):
    """No preceding sample passed the contextual selection filters."""


class NonFiniteUpdate(CalibrationError):
    """A gradient step produced a non-finite head entry."""


class EmptyGrid(CalibrationError):
    """A hyperparameter grid has no points."""


class ConfigError(CalibrationError):
    """An experiment configuration is invalid."""


class StageError(CalibrationError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
