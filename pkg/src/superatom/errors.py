"""Exception types shared across the package."""

from __future__ import annotations


class InvalidArgument(ValueError):
    """An input violates a documented precondition."""


class IntegrationFailure(RuntimeError):
    """The master-equation integration could not reach the final time.

    Parameters
    ----------
    message : str
        Human-readable reason.
    t_reached : float
        Last time (µs) the integrator accepted before giving up.
    """

    def __init__(self, message: str, t_reached: float = float("nan")):
        super().__init__(f"{message} (reached t = {t_reached:.6g} µs)")
        self.t_reached = t_reached


class OptimizationFailure(RuntimeError):
    """No objective evaluation in an optimization run succeeded."""
