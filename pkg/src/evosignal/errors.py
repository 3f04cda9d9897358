"""Exception taxonomy shared by the whole pipeline.

Three branches matter for the CLI exit codes: configuration problems,
data problems, and training failures.
"""
from __future__ import annotations


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PipelineError):
    """A configuration value is missing, unparseable, or out of range."""


class DataError(PipelineError):
    """Input data violates a contract (format, shape, or content)."""


class TrainingError(PipelineError):
    """Model training could not complete."""


class InvalidRecording(DataError):
    """A raw recording breaks its invariants (too short, non-monotone times)."""


class SignalTooShort(DataError):
    """A uniform signal is shorter than one analysis window."""


class ParseError(DataError):
    """A file could not be parsed; carries the offending location."""

    def __init__(self, message: str, line: int | None = None, column: str | int | None = None):
        loc = ""
        if line is not None:
            loc += f" (line {line}"
            loc += f", column {column})" if column is not None else ")"
        elif column is not None:
            loc += f" (column {column})"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class SchemaError(DataError):
    """A tabular file does not match the expected column schema."""


class NyquistViolation(DataError):
    """A requested synthesis frequency is at or above the Nyquist limit."""


class ShapeError(DataError):
    """An array argument has an incompatible shape or length."""


class DatasetError(DataError):
    """A feature dataset is degenerate for the requested operation."""


class StratificationError(DataError):
    """A class is too small to be split across the requested folds."""


class EvalError(DataError):
    """Evaluation was requested on an empty or incompatible test set."""


class EmptySelection(DataError):
    """An attribute mask selects no columns."""


class SpeciesViolation(PipelineError):
    """Two individuals of different species were paired for breeding."""


class GradientOverflow(TrainingError):
    """A non-finite gradient was encountered; training aborted."""


class BoostFailure(TrainingError):
    """Every boosting stage was discarded; no usable ensemble."""


class StageError(PipelineError):
    """An experiment stage failed; wraps the stage name and cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class SanitizedInputWarning(UserWarning):
    """Non-finite inputs were replaced by zeros before a computation."""
