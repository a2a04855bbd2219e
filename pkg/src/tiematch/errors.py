"""Exception hierarchy shared by every module."""

from __future__ import annotations


class TieMatchError(Exception):
    """Base class for all package errors."""


class EmptyText(TieMatchError, ValueError):
    """Description is empty after normalization, or yields no features."""


class ZeroVector(TieMatchError, ValueError):
    """Hashed feature accumulation cancelled out to the all-zero vector."""


class DimensionMismatch(TieMatchError, ValueError):
    pass


class NormViolation(TieMatchError, ValueError):
    """A vector handed to the index is not unit length."""


class ServiceUnavailable(TieMatchError):
    pass


class MalformedResponse(TieMatchError):
    pass


class BadMagic(TieMatchError):
    pass


class UnsupportedVersion(TieMatchError):
    pass


class TruncatedFile(TieMatchError):
    pass


class ParseError(TieMatchError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class RowOutOfRange(TieMatchError, IndexError):
    pass


class NotEnoughItems(TieMatchError, ValueError):
    pass


class DegenerateLabels(TieMatchError, ValueError):
    """Labels contain a single class, so no threshold separates anything."""


class BatchItemError(TieMatchError):
    """Wraps a per-item failure with the position it occurred at."""

    def __init__(self, position: int, cause: Exception) -> None:
        super().__init__(f"item {position}: {cause}")
        self.position = position
        self.cause = cause
