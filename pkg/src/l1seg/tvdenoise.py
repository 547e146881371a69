"""Exact l1 mean filtering (1-D total variation denoising).

Minimizes ``0.5 * sum (y_t - m_t)**2 + lam * sum |m_t - m_{t-1}|`` with
Condat's direct taut-string style algorithm: one forward pass that keeps
running lower/upper bounds on the current plateau, O(N) time and memory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import (
    InputError,
    Kind,
    PiecewiseConstantSignal,
    SolverReport,
    as_series,
    partial_sum_violations,
)


@dataclass(frozen=True)
class KktResidualMean:
    max_interior_violation: float
    total_sum_violation: float

    @property
    def worst(self) -> float:
        return max(self.max_interior_violation, self.total_sum_violation)


@numba.njit(cache=True)
def _condat(y, lam, out):
    # Flat if/elif state machine; a while-True/continue form of this loop is
    # miscompiled by numba 0.66 (wrong SSA merge of vmin).
    n = y.shape[0]
    k = 0
    k0 = 0
    kplus = 0
    kminus = 0
    umin = lam
    umax = -lam
    vmin = y[0] - lam
    vmax = y[0] + lam
    done = False
    while not done:
        if k == n - 1:
            if umin < 0.0:
                for i in range(k0, kminus + 1):
                    out[i] = vmin
                k0 = kminus + 1
                k = k0
                kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + lam - vmax
            elif umax > 0.0:
                for i in range(k0, kplus + 1):
                    out[i] = vmax
                k0 = kplus + 1
                k = k0
                kplus = k0
                vmax = y[k0]
                umax = -lam
                umin = vmax - lam - vmin
            else:
                vmin += umin / (k - k0 + 1)
                for i in range(k0, k + 1):
                    out[i] = vmin
                done = True
        else:
            umin += y[k + 1] - vmin
            umax_next = umax + y[k + 1] - vmax
            if umin < -lam:
                for i in range(k0, kminus + 1):
                    out[i] = vmin
                k0 = kminus + 1
                k = k0
                kminus = k0
                kplus = k0
                vmin = y[k0]
                vmax = vmin + 2.0 * lam
                umin = lam
                umax = -lam
            elif umax_next > lam:
                for i in range(k0, kplus + 1):
                    out[i] = vmax
                k0 = kplus + 1
                k = k0
                kminus = k0
                kplus = k0
                vmax = y[k0]
                vmin = vmax - 2.0 * lam
                umin = lam
                umax = -lam
            else:
                umax = umax_next
                k += 1
                if umin >= lam:
                    kminus = k
                    vmin += (umin - lam) / (kminus - k0 + 1)
                    umin = lam
                if umax <= -lam:
                    kplus = k
                    vmax += (umax + lam) / (kplus - k0 + 1)
                    umax = -lam


def _polish(y: np.ndarray, m: np.ndarray, lam: float, merge: float = 0.0) -> np.ndarray:
    # Recompute every plateau level from its stationarity condition:
    # L * level = sum(y over plateau) + lam * (s_right - s_left).
    # Steps of size <= merge are treated as flat.
    n = y.shape[0]
    jumps = np.flatnonzero(np.abs(np.diff(m)) > merge)
    starts = np.concatenate(([0], jumps + 1))
    ends = np.concatenate((jumps + 1, [n]))
    s = np.concatenate(([0.0], np.sign(m[jumps + 1] - m[jumps]), [0.0]))
    sums = np.add.reduceat(y, starts)
    levels = (sums + lam * (s[1:] - s[:-1])) / (ends - starts)
    return np.repeat(levels, ends - starts)


def tv_prox(v: np.ndarray, lam: float) -> np.ndarray:
    """Proximal map of ``lam * TV`` at ``v`` (no validation, no report)."""
    v = np.ascontiguousarray(v, dtype=float)
    if lam <= 0 or v.shape[0] < 2:
        return v.copy()
    out = np.empty_like(v)
    _condat(v, float(lam), out)
    return out


def mean_objective(y: np.ndarray, m: np.ndarray, lam: float) -> float:
    return 0.5 * float(np.sum((y - m) ** 2)) + lam * float(np.sum(np.abs(np.diff(m))))


def kkt_residual_mean(y, m, lambda1: float) -> KktResidualMean:
    """Quantify how far ``m`` is from satisfying the optimality conditions.

    The gradient of the data term is ``m_t - y_t``; stationarity reads
    ``sum_{t<=k} (y_t - m_t) = -lambda1 * sign(m_{k+1} - m_k)`` with the sign
    set-valued in ``[-1, 1]`` on flat steps, and ``sum_t (y_t - m_t) = 0``.
    """
    y = as_series(y)
    m = np.asarray(getattr(m, "levels", m), dtype=float)
    if m.shape != y.shape:
        raise InputError(f"length mismatch: {y.shape[0]} observations, {m.shape[0]} levels")
    interior, total = partial_sum_violations(y - m, m, float(lambda1))
    return KktResidualMean(interior, total)


def empirical_mean(y) -> float:
    return float(np.mean(as_series(y)))


def lambda_max_mean(y) -> float:
    """Smallest penalty at which the solution collapses to the empirical mean.

    ``max_k |sum_{t<=k} y_t - (k/N) sum_t y_t|`` over k = 1..N-1, evaluated as
    cumulative sums of the centered data.
    """
    y = as_series(y, min_length=2)
    c = np.cumsum(y - y.mean())[:-1]
    return float(np.max(np.abs(c)))


def solve_mean(y, lambda1: float, tolerance: float = 1e-8):
    """Solve the l1 mean filtering problem exactly.

    Parameters
    ----------
    y : array_like
        Observations, finite, length N >= 1.
    lambda1 : float
        Weight of the total variation penalty, nonnegative.
    tolerance : float
        Relative KKT tolerance used only to fill ``report.converged``;
        the residual is compared against ``tolerance * (1 + max|y|)``.

    Returns
    -------
    signal : PiecewiseConstantSignal
    report : SolverReport
    """
    y = np.ascontiguousarray(as_series(y))
    lam = float(lambda1)
    if not lam >= 0:
        raise InputError("lambda1 must be nonnegative")
    if lam == 0 or y.shape[0] == 1:
        m = y.copy()
        kkt = 0.0
    else:
        m = np.empty_like(y)
        _condat(y, lam, m)
        kkt = kkt_residual_mean(y, m, lam).worst
        # rounding-size steps carry a meaningless sign, so also try merging them
        raw = m
        merge = 1e-12 * (1.0 + float(np.max(np.abs(raw))))
        for tol in (0.0, merge):
            polished = _polish(y, raw, lam, tol)
            kkt_p = kkt_residual_mean(y, polished, lam).worst
            if kkt_p <= kkt:
                m, kkt = polished, kkt_p
    scale = 1.0 + float(np.max(np.abs(y)))
    report = SolverReport(
        objective=mean_objective(y, m, lam),
        iterations=1,
        kkt_residual=kkt,
        converged=kkt <= tolerance * scale,
        solver_name="taut-string",
    )
    return PiecewiseConstantSignal(m, Kind.MEAN), report
