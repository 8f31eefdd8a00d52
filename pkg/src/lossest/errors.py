"""Exception types raised across the package."""

from __future__ import annotations


class LossEstError(Exception):
    """Base class for all package errors."""


class DimensionError(LossEstError, ValueError):
    """Shapes violate a size requirement (e.g. n <= p)."""


class RankDeficient(LossEstError):
    """A design matrix (or column subset) is numerically rank deficient."""

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"design is rank deficient at column {column}")


class ZeroVariance(LossEstError, ZeroDivisionError):
    pass


class ZeroResidual(LossEstError, ZeroDivisionError):
    pass


class SingularS(LossEstError):
    """The residual cross-product matrix S cannot be inverted."""


class DegenerateInput(LossEstError):
    """Measure-zero input where a formula is undefined (e.g. ||Z|| = 0 for shrinkage)."""


class DivergenceUnavailable(LossEstError):
    pass


class NonFiniteOutput(LossEstError, FloatingPointError):
    pass


class InvalidParameter(LossEstError, ValueError):
    pass


class UnsupportedStarLaw(LossEstError):
    """The law has no Gaussian scale-mixture form, so its star law cannot be sampled."""


class ParseError(LossEstError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class ConfigError(LossEstError):
    pass


class UnderpoweredRun(UserWarning):
    """A verification run uses fewer replications than the acceptance floor."""
