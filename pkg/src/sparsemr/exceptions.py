"""Error hierarchy; the CLI maps the two branches onto exit codes 2 and 3."""

from __future__ import annotations


class SparseMRError(Exception):
    """Base class for every error raised by sparsemr."""


class DataError(SparseMRError, ValueError):
    """Input data cannot be used as given."""


class PanelParseError(DataError):
    def __init__(self, row: int, column: str, value: str) -> None:
        super().__init__(f"cannot parse {value!r} as a number at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class PanelOrderError(DataError):
    """Timestamps are not strictly increasing."""


class InsufficientDataError(DataError):
    """Too few observations for the requested estimate."""


class RefusalError(DataError):
    """A request exceeds a configured combinatorial guard."""


class NumericalError(SparseMRError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class ConditioningError(NumericalError):
    def __init__(self, message: str, smallest_eigenvalue: float | None = None) -> None:
        if smallest_eigenvalue is not None:
            message = f"{message} (smallest eigenvalue {smallest_eigenvalue:.3e})"
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class EstimationError(NumericalError):
    """Model estimation failed beyond rescue."""


class DomainError(SparseMRError, ValueError):
    """Arguments lie outside the mathematical domain of an operation."""
