"""Exception types shared across the package."""

from __future__ import annotations


class MjsBenchError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(MjsBenchError):
    """Array dimensions are inconsistent with the model or controller."""


class NotErgodic(MjsBenchError):
    """The Markov chain is reducible, periodic, or has no valid stationary vector."""


class CapExceeded(MjsBenchError):
    """An iterative search hit its cap before meeting its threshold."""


class NoConvergence(MjsBenchError):
    """An iterative solver hit its iteration cap.

    Carries the last iterate and residual so callers can degrade gracefully.
    """

    def __init__(self, message: str, last_iterate=None, residual: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class NotPSD(MjsBenchError):
    """A matrix required to be positive semidefinite is not."""


class InvalidDecayPair(MjsBenchError):
    """A (tau, rho) envelope is outside the valid range (tau >= 1, 0 <= rho < 1)."""


class SingularInnerSolve(MjsBenchError):
    """The inner regularized system of a Riccati update is numerically singular."""


class NotMss(MjsBenchError):
    """The closed loop is not mean-square stable, so the requested quantity diverges."""


class DegenerateRegressors(MjsBenchError):
    """A per-mode regressor matrix is rank deficient beyond tolerance."""


class ConfigError(MjsBenchError):
    """An experiment configuration failed validation."""
