"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input/usage problems (parse,
structural, validation, configuration, empty dataset) exit with 2,
numerical faults with 3, and consistency verdicts with 1.
"""

from __future__ import annotations

__all__ = [
    "PPBoundsError",
    "ParseError",
    "StructuralError",
    "ValidationError",
    "EmptyDatasetError",
    "ConfigurationError",
    "DomainError",
    "NumericalError",
    "ConsistencyError",
]


class PPBoundsError(Exception):
    """Base class for all package errors."""


class ParseError(PPBoundsError):
    """A file could not be parsed; carries the offending coordinates."""

    def __init__(self, message: str, *, row: int | None = None, column: int | None = None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class StructuralError(PPBoundsError):
    """Inputs parsed but their shapes or label sets do not line up."""


class ValidationError(PPBoundsError):
    """A domain invariant is violated (non-positive price, bad shape, ...)."""


class EmptyDatasetError(PPBoundsError):
    """Every observation was excluded or the input held none."""


class ConfigurationError(PPBoundsError):
    """A run setting is inconsistent with the data (missing base, rates, ...)."""


class DomainError(PPBoundsError):
    """An operation was called outside its mathematical domain."""


class NumericalError(PPBoundsError):
    """A numerical routine failed to converge or failed its self-checks."""


class ConsistencyError(PPBoundsError):
    """The data violate the consistency condition required by an operation."""
