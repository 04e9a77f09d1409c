"""
Exception hierarchy for the VulSATD pipeline.

InputError subclasses mean the user handed us something unusable (exit code 2
from the CLI); anything else escaping a command is treated as internal.
"""

from typing import Optional


class VulSatdError(Exception):
    """Base class for all pipeline errors."""


class InputError(VulSatdError, ValueError):
    """Bad input data or arguments."""


class ConfigurationError(VulSatdError, ValueError):
    """Invalid model/training/experiment configuration."""


class StatisticsError(VulSatdError, ValueError):
    """A statistic is undefined for the given data."""


class DatasetFormatError(InputError):
    """A dataset line could not be parsed into a record."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DuplicateRecordError(DatasetFormatError):
    """Two lines of one dataset share a record id."""

    def __init__(self, record_id: str, first_line: int, second_line: int):
        self.record_id = record_id
        self.first_line = first_line
        super().__init__(
            f"duplicate id {record_id!r} (first seen on line {first_line})",
            line_number=second_line,
        )


class LexerError(InputError):
    """C source could not be scanned (unterminated comment, unbalanced braces)."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")


class PatternSetError(InputError):
    """A pattern file or PatternSet violates its invariants."""


class UnlabeledRecordError(InputError):
    """An operation needing labels met a record without them."""

    def __init__(self, record_id: str, missing: str):
        self.record_id = record_id
        super().__init__(f"record {record_id!r} has no {missing} label")


class SequenceTooLongError(InputError):
    """An encoded sequence exceeds the model's maximum length."""

    def __init__(self, record_id: str, length: int, max_len: int):
        self.record_id = record_id
        super().__init__(f"record {record_id!r} has {length} tokens, model max_len is {max_len}")


class EmptySplitError(InputError):
    """A train/val/test partition came out empty."""


class MissingCellError(InputError):
    """A report delta needs an experiment cell that was not run."""
