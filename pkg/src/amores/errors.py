"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class AmoresError(Exception):
    exit_code = 1
    code = "error"


class ValidationError(AmoresError, ValueError):
    exit_code = 2
    code = "validation"


class DomainError(ValidationError):
    code = "domain"


class NumericError(AmoresError, ArithmeticError):
    exit_code = 3
    code = "numeric"


class PrecisionError(NumericError):
    """Exact/interval evaluation could not be certified at the available precision."""

    code = "precision"


class ConditioningError(NumericError):
    code = "conditioning"

    def __init__(self, message: str, log_abs: float | None = None):
        super().__init__(message)
        self.log_abs = log_abs


class DegeneracyError(NumericError):
    code = "degeneracy"


class ResourceError(AmoresError):
    exit_code = 4
    code = "resource"


class SearchError(ResourceError):
    code = "search"


class ConstructionError(AmoresError):
    """Nested-interval construction failed (typically a nesting violation)."""

    exit_code = 5
    code = "construction"

    def __init__(self, message: str, j: int | None = None, gap=None):
        super().__init__(message)
        self.j = j
        self.gap = gap
