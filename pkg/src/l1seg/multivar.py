"""Covariance matrix fitting with a Frobenius total-variation penalty.

    minimize  sum_t ||y_t y_t^T - S_t||_F + lambda2 * sum_t ||S_{t+1} - S_t||_F
    over      S_t positive semidefinite

The data term is the unsquared Frobenius norm, so this is a robust fit (at
n = 1 it is an l1 fit to the squared data, not least squares).  Solved by
consensus ADMM over three blocks: block shrinkage toward the outer products,
the group fused prox of the TV term (inner accelerated dual projection), and
eigenvalue clipping onto the PSD cone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .core import InputError, SolverOptions, SolverReport, as_series

INNER_TOL = 1e-9
INNER_MAX_ITER = 5000


@dataclass(frozen=True)
class CovSequence:
    matrices: np.ndarray  # (N, n, n)

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise InputError(f"expected an (N, n, n) stack, got {mats.shape}")
        if not np.allclose(mats, mats.transpose(0, 2, 1), rtol=0, atol=1e-12 * (1 + np.abs(mats).max())):
            raise InputError("matrices must be symmetric")
        object.__setattr__(self, "matrices", mats)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def __len__(self) -> int:
        return self.matrices.shape[0]


def psd_project(S, eps: float = 0.0) -> np.ndarray:
    """Symmetrize and clip eigenvalues from below at ``eps``.

    Accepts a single matrix or a stack of shape ``(..., n, n)``.
    """
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    w, V = np.linalg.eigh(S)
    if np.all(w >= eps):
        return S
    out = (V * np.maximum(w, eps)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def outer_products(Y) -> np.ndarray:
    Y = as_series(Y, multivariate=True)
    return np.einsum("ti,tj->tij", Y, Y)


def cov_fit_objective(S, mats, lambda2: float) -> float:
    S = np.asarray(S, dtype=float)
    mats = np.asarray(getattr(mats, "matrices", mats), dtype=float)
    n_t = mats.shape[0]
    fit = np.linalg.norm((S - mats).reshape(n_t, -1), axis=1).sum()
    tv = np.linalg.norm(np.diff(S, axis=0).reshape(n_t - 1, -1), axis=1).sum() if n_t > 1 else 0.0
    return float(fit + lambda2 * tv)


@numba.njit(cache=True)
def _group_tv_prox(V, kappa, W, tol, max_iter):
    # min_X 0.5 ||X - V||^2 + kappa * sum_k ||X[k+1] - X[k]||
    # dual: X = V - D^T W, ||W[k]|| <= kappa; accelerated projected gradient, step 1/4.
    n, d = V.shape
    X = np.empty_like(V)
    Wp = W.copy()
    Z = W.copy()
    t = 1.0
    gap = np.inf
    it = 0
    while it < max_iter:
        it += 1
        for j in range(d):
            X[0, j] = V[0, j] + Z[0, j]
            for i in range(1, n - 1):
                X[i, j] = V[i, j] - Z[i - 1, j] + Z[i, j]
            X[n - 1, j] = V[n - 1, j] - Z[n - 2, j]
        restart = 0.0
        for k in range(n - 1):
            nrm = 0.0
            for j in range(d):
                Wp[k, j] = W[k, j]
                w = Z[k, j] + 0.25 * (X[k + 1, j] - X[k, j])
                W[k, j] = w
                nrm += w * w
            nrm = np.sqrt(nrm)
            if nrm > kappa:
                for j in range(d):
                    W[k, j] *= kappa / nrm
            for j in range(d):
                restart += (Z[k, j] - W[k, j]) * (W[k, j] - Wp[k, j])
        if restart > 0.0:
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        t = t_next
        for k in range(n - 1):
            for j in range(d):
                Z[k, j] = W[k, j] + beta * (W[k, j] - Wp[k, j])
        if it % 10 == 0 or it == max_iter:
            for j in range(d):
                X[0, j] = V[0, j] + W[0, j]
                for i in range(1, n - 1):
                    X[i, j] = V[i, j] - W[i - 1, j] + W[i, j]
                X[n - 1, j] = V[n - 1, j] - W[n - 2, j]
            gap = 0.0
            for k in range(n - 1):
                nrm = 0.0
                inner = 0.0
                for j in range(d):
                    dk = X[k + 1, j] - X[k, j]
                    nrm += dk * dk
                    inner += W[k, j] * dk
                gap += kappa * np.sqrt(nrm) - inner
            if gap <= tol:
                break
    for j in range(d):
        X[0, j] = V[0, j] + W[0, j]
        for i in range(1, n - 1):
            X[i, j] = V[i, j] - W[i - 1, j] + W[i, j]
        X[n - 1, j] = V[n - 1, j] - W[n - 2, j]
    return X, gap, it


def group_tv_prox(V, kappa: float, W0: Optional[np.ndarray] = None,
                  tol: float = INNER_TOL, max_iter: int = INNER_MAX_ITER):
    """Proximal map of ``kappa * sum ||X[k+1] - X[k]||`` for rows of ``V``.

    Returns ``(X, W)`` where ``W`` is the final dual, reusable as a warm start.
    """
    V = np.ascontiguousarray(V, dtype=float)
    if kappa <= 0 or V.shape[0] < 2:
        return V.copy(), np.zeros((max(V.shape[0] - 1, 0), V.shape[1]))
    W = np.zeros((V.shape[0] - 1, V.shape[1])) if W0 is None else np.array(W0, dtype=float)
    X, _, _ = _group_tv_prox(V, float(kappa), W, float(tol), int(max_iter))
    return X, W


def _shrink_toward(V, C, kappa):
    # prox of kappa * ||X - C|| applied row-wise
    D = V - C
    nrm = np.linalg.norm(D, axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(nrm > kappa, 1.0 - kappa / nrm, 0.0)
    return C + f * D


def solve_cov_fit(Y, lambda2: float, opts: SolverOptions = SolverOptions(),
                  eps: Optional[float] = None):
    """Fit a piecewise-constant covariance sequence to vector observations.

    Parameters
    ----------
    Y : array_like, shape (N, n)
    lambda2 : float
        Weight of the Frobenius TV penalty.
    opts : SolverOptions
        ``tolerance`` (relative primal/dual ADMM residual), ``max_iterations``
        and ``penalty_parameter`` are used.
    eps : float, optional
        Eigenvalue floor; defaults to ``1e-10 * (1 + max ||y_t||^2)``.

    Returns
    -------
    CovSequence, SolverReport
    """
    Y = as_series(Y, min_length=2, multivariate=True)
    lam = float(lambda2)
    if lam < 0:
        raise InputError("lambda2 must be nonnegative")
    n_t, n = Y.shape
    if eps is None:
        eps = 1e-10 * (1.0 + float(np.max(np.sum(Y**2, axis=1))))
    S = outer_products(Y).reshape(n_t, n * n)
    if lam == 0:
        out = psd_project(S.reshape(n_t, n, n), eps)
        report = SolverReport(cov_fit_objective(out, S.reshape(n_t, n, n), 0.0), 0, 0.0, True, "exact")
        return CovSequence(out), report

    # scale to unit typical magnitude so rho = 1 is sensible
    scale = float(np.mean(np.linalg.norm(S, axis=1))) or 1.0
    Ss = S / scale
    rho = opts.penalty_parameter
    consensus = psd_project(np.broadcast_to(Ss.mean(axis=0), (n_t, n * n)).reshape(n_t, n, n),
                            eps / scale).reshape(n_t, n * n)
    base = cov_fit_objective(consensus.reshape(n_t, n, n) * scale, S.reshape(n_t, n, n), lam)

    z = consensus.copy()
    x = [z.copy(), z.copy(), z.copy()]
    u = [np.zeros_like(z) for _ in range(3)]
    W = None
    tol = opts.tolerance
    converged = False
    it = 0
    r = s = np.inf
    while it < opts.max_iterations:
        it += 1
        x[0] = _shrink_toward(z - u[0], Ss, 1.0 / rho)
        x[1], W = group_tv_prox(z - u[1], lam / rho, W)
        x[2] = psd_project((z - u[2]).reshape(n_t, n, n), eps / scale).reshape(n_t, n * n)
        z_prev = z
        z = (x[0] + x[1] + x[2] + u[0] + u[1] + u[2]) / 3.0
        for i in range(3):
            u[i] += x[i] - z
        if it % 10:
            continue
        r = np.sqrt(sum(np.sum((xi - z) ** 2) for xi in x))
        s = rho * np.sqrt(3.0) * np.linalg.norm(z - z_prev)
        ref_p = max(np.linalg.norm(z), max(np.linalg.norm(xi) for xi in x))
        ref_d = rho * np.sqrt(sum(np.sum(ui**2) for ui in u))
        root = np.sqrt(3 * z.size)
        if r <= tol * (root + ref_p) and s <= tol * (root + ref_d):
            converged = True
            break
    out = psd_project(z.reshape(n_t, n, n), eps / scale) * scale
    obj = cov_fit_objective(out, S.reshape(n_t, n, n), lam)
    if obj > base:
        out = consensus.reshape(n_t, n, n) * scale
        obj = base
    report = SolverReport(
        objective=obj,
        iterations=it,
        kkt_residual=float(max(r, s)),
        converged=converged,
        solver_name="consensus-admm",
        extra={"rho": rho, "residual_units": "scaled"},
    )
    return CovSequence(out), report
