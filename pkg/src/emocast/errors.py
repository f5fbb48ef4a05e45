"""Exception types shared across the package."""

from __future__ import annotations


class EmocastError(Exception):
    """Base class for all package errors."""


class CorpusFormatError(EmocastError):
    """A corpus file could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownLabelError(CorpusFormatError):
    """An emotion label is not a member of the active label set."""

    def __init__(self, label: str, line: int | None = None):
        self.label = label
        super().__init__(f"unknown emotion label {label!r}", line=line)


class ConfigError(EmocastError):
    """Invalid configuration or invalid flag combination."""


class TrainingDiverged(EmocastError):
    """Training produced a non-finite loss; carries the 0-based epoch index."""

    def __init__(self, epoch: int, detail: str = ""):
        self.epoch = epoch
        msg = f"non-finite loss at epoch {epoch}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)
