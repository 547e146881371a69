"""Variance segmentation for zero-mean data.

The l1-regularized likelihood in the natural parameter ``eta = -1/(2 s2)``
and the least-squares fit of ``s2`` to the squared data share their
subgradient optimality conditions, because ``eta`` is increasing in ``s2``
and therefore every difference keeps its sign.  Variance segmentation is
thus mean filtering of ``y**2``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (
    DomainError,
    InputError,
    Kind,
    PiecewiseConstantSignal,
    SolverOptions,
    as_series,
    partial_sum_violations,
)
from .tvdenoise import kkt_residual_mean, lambda_max_mean, mean_objective, solve_mean


@dataclass(frozen=True)
class KktResidualEta:
    max_interior_violation: float
    total_sum_violation: float

    @property
    def worst(self) -> float:
        return max(self.max_interior_violation, self.total_sum_violation)


def lambda_max_variance(y) -> float:
    y = as_series(y, min_length=2)
    return lambda_max_mean(np.square(y))


def empirical_variance(y, floor: Optional[float] = None) -> float:
    """Mean of squares (the mean is taken to be zero), floored at ``floor``."""
    y = as_series(y)
    eps = SolverOptions(variance_floor=floor).floor_for(y)
    return max(float(np.mean(np.square(y))), eps)


def variance_objective(y, sigma2, lambda2: float) -> float:
    return mean_objective(np.square(as_series(y)), np.asarray(sigma2, dtype=float), lambda2)


def eta_objective(y, eta, lambda2: float) -> float:
    """Negative log-likelihood in ``eta`` (constants dropped) plus TV penalty."""
    y = as_series(y)
    eta = np.asarray(eta, dtype=float)
    if not np.all(eta < 0):
        raise DomainError("eta must be negative")
    smooth = np.sum(-0.5 * np.log(-eta) - eta * y**2)
    return float(smooth + lambda2 * np.sum(np.abs(np.diff(eta))))


def solve_variance(y, lambda2: float, opts: SolverOptions = SolverOptions()):
    """Piecewise-constant variance estimate of zero-mean data.

    Parameters
    ----------
    y : array_like
        Observations with known zero mean (center them beforehand).
    lambda2 : float
        TV weight on the variance sequence.
    opts : SolverOptions
        Only ``variance_floor`` and ``tolerance`` are used.

    Returns
    -------
    signal : PiecewiseConstantSignal of kind ``VARIANCE``
    report : SolverReport
        ``floor_active`` is set when some level had to be raised to the floor.
    """
    y = as_series(y)
    z = np.square(y)
    signal, report = solve_mean(z, lambda2, tolerance=opts.tolerance)
    eps = opts.floor_for(y)
    levels = signal.levels
    if np.any(levels < eps):
        levels = np.maximum(levels, eps)
        kkt = kkt_residual_mean(z, levels, lambda2).worst
        report = replace(
            report,
            floor_active=True,
            objective=mean_objective(z, levels, lambda2),
            kkt_residual=kkt,
            # the floored point solves the problem restricted to s2 >= eps
            converged=report.converged,
        )
    report.solver_name = "taut-string(y^2)"
    return PiecewiseConstantSignal(levels, Kind.VARIANCE), report


def kkt_residual_eta(y, eta, lambda2: float) -> KktResidualEta:
    """Stationarity violation of the l1-regularized likelihood in ``eta``.

    The smooth part has gradient ``-1/(2 eta_t) - y_t**2 = s2_t - y_t**2``;
    the conditions are checked in cumulative form against the signs of the
    differences of ``eta`` itself.
    """
    y = as_series(y)
    eta = np.asarray(getattr(eta, "levels", eta), dtype=float)
    if eta.shape != y.shape:
        raise InputError(f"length mismatch: {y.shape[0]} observations, {eta.shape[0]} levels")
    if not np.all(eta < 0):
        raise DomainError("eta must be negative")
    sigma2 = -0.5 / eta
    interior, total = partial_sum_violations(y**2 - sigma2, eta, float(lambda2))
    return KktResidualEta(interior, total)
