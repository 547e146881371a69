"""Slow, independent solvers used to cross-check the fast paths.

Both oracles share no code with the solvers they check.
"""
from __future__ import annotations

import numba
import numpy as np

from .core import ConvergenceError, InputError, Kind, PiecewiseConstantSignal, as_series


@numba.njit(cache=True)
def _dual_pg(y, lam, gap_tol, max_iter):
    # Accelerated projected gradient on the box-constrained dual
    #   min_u 0.5 * ||y - D^T u||^2,  |u_k| <= lam,
    # step 1/4 (||D D^T|| <= 4), with gradient-based momentum restart.
    n = y.shape[0]
    eps = np.finfo(np.float64).eps
    u = np.zeros(n - 1)
    u_prev = np.zeros(n - 1)
    v = np.zeros(n - 1)
    m = np.empty(n)
    t = 1.0
    gap = np.inf
    it = 0
    while it < max_iter:
        it += 1
        # primal point at the extrapolated dual v
        m[0] = y[0] + v[0]
        for i in range(1, n - 1):
            m[i] = y[i] - v[i - 1] + v[i]
        m[n - 1] = y[n - 1] - v[n - 2]
        restart = 0.0
        for k in range(n - 1):
            u_prev[k] = u[k]
            w = v[k] + 0.25 * (m[k + 1] - m[k])
            if w > lam:
                w = lam
            elif w < -lam:
                w = -lam
            u[k] = w
            restart += (v[k] - w) * (w - u_prev[k])
        if restart > 0.0:
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        t = t_next
        for k in range(n - 1):
            assert -lam <= u[k] <= lam
            v[k] = u[k] + beta * (u[k] - u_prev[k])
        if it % 20 == 0 or it == max_iter:
            m[0] = y[0] + u[0]
            for i in range(1, n - 1):
                m[i] = y[i] - u[i - 1] + u[i]
            m[n - 1] = y[n - 1] - u[n - 2]
            gap = 0.0
            for k in range(n - 1):
                d = m[k + 1] - m[k]
                # differences at rounding level are flat steps, not jumps
                if abs(d) <= 8.0 * eps * (abs(m[k]) + abs(m[k + 1]) + lam):
                    d = 0.0
                gap += lam * abs(d) - u[k] * d
            if gap <= gap_tol:
                break
    m[0] = y[0] + u[0]
    for i in range(1, n - 1):
        m[i] = y[i] - u[i - 1] + u[i]
    m[n - 1] = y[n - 1] - u[n - 2]
    return m, u, gap, it


def oracle_tv1d_dual(y, lambda1: float, tol: float = 1e-7, max_iterations: int = 2_000_000,
                     return_dual: bool = False):
    """Solve l1 mean filtering through its dual box-constrained quadratic program.

    Iterates until the duality gap is at most ``tol**2 / 2``, which bounds the
    Euclidean distance of the returned levels to the exact minimizer by ``tol``.

    Raises
    ------
    ConvergenceError
        If ``max_iterations`` is exhausted first.
    """
    y = np.ascontiguousarray(as_series(y))
    if tol <= 0:
        raise InputError("tol must be positive")
    lam = float(lambda1)
    if lam < 0:
        raise InputError("lambda1 must be nonnegative")
    if y.shape[0] == 1 or lam == 0:
        m, u, gap, it = y.copy(), np.zeros(max(y.shape[0] - 1, 0)), 0.0, 0
    else:
        m, u, gap, it = _dual_pg(y, lam, 0.5 * tol * tol, int(max_iterations))
        if gap > 0.5 * tol * tol:
            raise ConvergenceError(
                f"dual projected gradient stopped after {it} iterations with gap {gap:.3e}"
            )
    signal = PiecewiseConstantSignal(m, Kind.MEAN)
    if return_dual:
        return signal, u
    return signal


def l1_tv_objective(z: np.ndarray, x: np.ndarray, lam: float) -> float:
    return float(np.sum(np.abs(z - x)) + lam * np.sum(np.abs(np.diff(x))))


@numba.njit(cache=True)
def _prox_subgradient(z, lam, x0, step0, iters):
    # x <- prox_{a_k |. - z|}(x - a_k * g_tv(x)),  a_k = step0 / sqrt(k + 1)
    n = z.shape[0]
    x = x0.copy()
    best = x0.copy()
    g = np.empty(n)
    best_obj = np.inf
    for k in range(iters):
        obj = 0.0
        for i in range(n):
            obj += abs(z[i] - x[i])
        for i in range(n - 1):
            obj += lam * abs(x[i + 1] - x[i])
        if obj < best_obj:
            best_obj = obj
            best[:] = x
        for i in range(n):
            g[i] = 0.0
        for i in range(n - 1):
            s = np.sign(x[i + 1] - x[i])
            g[i] -= lam * s
            g[i + 1] += lam * s
        a = step0 / np.sqrt(k + 1.0)
        for i in range(n):
            w = x[i] - a * g[i] - z[i]
            if w > a:
                w -= a
            elif w < -a:
                w += a
            else:
                w = 0.0
            x[i] = z[i] + w
    return best, best_obj


def oracle_l1_tv(z, lambda2: float, tol: float = 1e-4, restarts: int = 10,
                 iterations: int = 200_000, seed: int = 0) -> np.ndarray:
    """Robust l1 fit with a TV penalty, ``sum |z_t - x_t| + lam * sum |x_{t+1} - x_t|``.

    Proximal-subgradient descent with diminishing steps, best of ``restarts``
    random starts.  Only meant as an upper bound on the optimal objective for
    short sequences (N <= 64).  ``tol`` sets the initial step scale.
    """
    z = np.ascontiguousarray(as_series(z))
    n = z.shape[0]
    if n > 64:
        raise InputError(f"oracle_l1_tv is limited to N <= 64 (got {n})")
    lam = float(lambda2)
    if lam < 0:
        raise InputError("lambda2 must be nonnegative")
    if lam == 0 or n == 1 or np.all(z == z[0]):
        return z.copy()
    rng = np.random.default_rng(seed)
    spread = float(np.ptp(z)) or 1.0
    best, best_obj = z.copy(), l1_tv_objective(z, z, lam)
    starts = [z.copy(), np.full(n, np.median(z))]
    starts += [rng.uniform(z.min(), z.max(), n) for _ in range(max(restarts - 2, 0))]
    for x0 in starts[:restarts]:
        x, obj = _prox_subgradient(z, lam, x0, max(spread, tol) / max(1.0, lam), iterations)
        if obj < best_obj:
            best, best_obj = x, obj
    return best
