"""
Exception types shared by every module of the engine.
"""


class CohortSimError(Exception):
    """Base class for engine errors."""


class DomainError(CohortSimError, ValueError):
    """Argument outside the domain of a function."""


class ShapeError(CohortSimError, ValueError):
    """Mismatched lengths or dimensions."""


class NotPSDError(DomainError):
    """Matrix is not positive semi-definite."""


class UndefinedCorrelationError(DomainError):
    """Rank correlation undefined on constant input."""


class IngestionError(CohortSimError):
    """Invalid cell met while reading a dataset."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.row = row
        self.column = column


class ConfigError(CohortSimError):
    """Invalid or incomplete configuration."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class DataError(CohortSimError):
    """Input data inconsistent with the model or catalog."""


class NumericalError(CohortSimError):
    """Numerical procedure failed to produce a usable result."""
