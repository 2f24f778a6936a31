"""Exception hierarchy for the convex Neyman-Pearson toolkit."""

from __future__ import annotations


class ConvexNPError(Exception):
    """Base class of every error raised by :mod:`convex_np`."""


# Validation errors: bad input data, caught by the CLI as exit code 2.


class ValidationError(ConvexNPError, ValueError):
    """Input data violates a documented precondition."""


class NonPositiveWeight(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidDensity(ValidationError):
    pass


class LevelOutOfRange(ValidationError):
    pass


class InfeasibleBudget(ValidationError):
    pass


class InfeasibleSpec(ValidationError):
    pass


class DegenerateBounds(ValidationError):
    pass


class NoEmm(ValidationError):
    """The market admits arbitrage: no (closed) martingale measure exists."""


class TooLarge(ValidationError):
    pass


class InvalidParameter(ValidationError):
    """A model parameter is out of its domain (theta, penalties, prices, values)."""


class ConfigError(ValidationError):
    """A JSON config could not be parsed into a problem or market."""


# Numerical errors: the computation itself failed, exit code 3.


class NumericalError(ConvexNPError, RuntimeError):
    """A numerical routine failed to produce a certified answer."""


class NoConvergence(NumericalError):
    pass


class SaddleViolation(NumericalError):
    pass


class StructureViolation(NumericalError):
    """No threshold z reproduces the solution in Neyman-Pearson form."""


class TrivialCase(NumericalError):
    """gamma_alpha vanishes, so the representative P* is not determined."""


class InfeasibleLP(NumericalError):
    pass


class UnboundedLP(NumericalError):
    pass


__all__ = [
    "ConfigError",
    "ConvexNPError",
    "DegenerateBounds",
    "DimensionMismatch",
    "InfeasibleBudget",
    "InfeasibleLP",
    "InfeasibleSpec",
    "InvalidDensity",
    "InvalidParameter",
    "LevelOutOfRange",
    "NoConvergence",
    "NoEmm",
    "NonPositiveWeight",
    "NotNormalized",
    "NumericalError",
    "SaddleViolation",
    "StructureViolation",
    "TooLarge",
    "TrivialCase",
    "UnboundedLP",
    "ValidationError",
]
