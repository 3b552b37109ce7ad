"""Exception hierarchy.

Each class maps onto one CLI exit code: parameter and dimension problems are
configuration errors (2), integration failures are 3.
"""
from __future__ import annotations


class PdavdError(Exception):
    """Base class for all library errors."""


class DimensionError(PdavdError, ValueError):
    """Array shapes do not agree with the problem instance."""


class ParameterError(PdavdError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class NoSaddlePointError(PdavdError):
    """The KKT system has no solution (no feasible point or no multiplier)."""


class OracleError(PdavdError):
    """An iterative saddle-point solve did not reach its tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class IntegrationError(PdavdError):
    """The ODE integration stopped before reaching the final time."""

    def __init__(self, message, t_last=float("nan"), stats=None):
        super().__init__(message)
        self.t_last = t_last
        self.stats = stats or {}


class ConfigError(PdavdError, ValueError):
    """An experiment configuration cannot be parsed or refers to missing files."""
