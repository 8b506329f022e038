"""Exception hierarchy shared across the package."""

from __future__ import annotations

__all__ = [
    "TdofError",
    "DomainError",
    "DataError",
    "NumericError",
    "NotPositiveDefiniteError",
    "QuadratureError",
    "DegenerateWeightsError",
]


class TdofError(Exception):
    """Base class for all package errors."""


class DomainError(TdofError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class DataError(TdofError, ValueError):
    """Input data violates the ingestion contract (bad CSV rows, shapes, ...)."""


class NumericError(TdofError, ArithmeticError):
    """A numerical procedure failed to reach its accuracy or stability target."""


class NotPositiveDefiniteError(NumericError):
    """Cholesky factorization met a non-positive pivot."""


class QuadratureError(NumericError):
    """Adaptive quadrature could not certify the requested tolerance.

    Carries the best available estimate so callers can decide whether to
    retry with a looser spec.
    """

    def __init__(self, message: str, value: float, est_error: float):
        super().__init__(message)
        self.value = value
        self.est_error = est_error


class DegenerateWeightsError(NumericError):
    """Importance sampling weights collapsed below the effective-sample-size guard."""
