"""Shared value types and moment/canonical parameter conversions."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np


class InputError(ValueError):
    """Malformed or non-finite input data."""


class DomainError(ValueError):
    """A parameter lies outside the domain of the requested map."""


class DegenerateProblemError(ValueError):
    """The likelihood has no interior minimizer for the given data and penalties."""


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations before meeting its tolerance."""

    def __init__(self, message: str, report: "SolverReport | None" = None):
        super().__init__(message)
        self.report = report


class Kind(str, enum.Enum):
    MEAN = "mean"
    VARIANCE = "variance"
    CANONICAL_MU = "canonical_mu"
    CANONICAL_ETA = "canonical_eta"


def as_series(y, *, min_length: int = 1, multivariate: bool = False) -> np.ndarray:
    """Validate observations and return them as a float array.

    Scalar series come back 1-D of shape ``(N,)``; with ``multivariate=True``
    a 2-D ``(N, n)`` array is returned (a 1-D input is read as ``n = 1``).
    """
    try:
        arr = np.asarray(y, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"observations are not numeric: {exc}") from exc
    if multivariate:
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise InputError(f"expected an (N, n) array of vectors, got shape {arr.shape}")
    elif arr.ndim != 1:
        raise InputError(f"expected a 1-D series, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise InputError(f"need at least {min_length} samples, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr.reshape(arr.shape[0], -1)).any(axis=1))[0])
        raise InputError(f"non-finite observation at index {bad}")
    return arr


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray

    def __post_init__(self):
        arr = as_series(self.values, multivariate=np.ndim(self.values) == 2)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]


@dataclass(frozen=True)
class PiecewiseConstantSignal:
    levels: np.ndarray
    kind: Kind = Kind.MEAN

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        if levels.ndim != 1:
            raise InputError("levels must be 1-D")
        kind = Kind(self.kind)
        if kind is Kind.VARIANCE and not np.all(levels > 0):
            raise DomainError("variance levels must be positive")
        if kind is Kind.CANONICAL_ETA and not np.all(levels < 0):
            raise DomainError("canonical eta levels must be negative")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "kind", kind)

    def __len__(self) -> int:
        return self.levels.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.levels if dtype is None else self.levels.astype(dtype)


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        if not (self.lambda1 >= 0 and self.lambda2 >= 0):
            raise InputError("penalty weights must be nonnegative")


@dataclass(frozen=True)
class Segmentation:
    """Changepoints ``k`` (1-based) mark a level change between samples k and k+1."""

    n: int
    changepoints: Tuple[int, ...]
    segment_levels: Tuple[float, ...]

    def __post_init__(self):
        cps = tuple(int(k) for k in self.changepoints)
        if any(not 1 <= k < self.n for k in cps) or any(a >= b for a, b in zip(cps, cps[1:])):
            raise InputError(f"changepoints must be strictly increasing in [1, {self.n - 1}]")
        if len(self.segment_levels) != len(cps) + 1:
            raise InputError("need exactly one level per segment")
        object.__setattr__(self, "changepoints", cps)
        object.__setattr__(self, "segment_levels", tuple(float(v) for v in self.segment_levels))

    @property
    def segment_bounds(self) -> list[tuple[int, int]]:
        """Inclusive 1-based ``(start, end)`` pairs."""
        starts = (0,) + self.changepoints
        ends = self.changepoints + (self.n,)
        return [(s + 1, e) for s, e in zip(starts, ends)]

    def slices(self) -> list[slice]:
        return [slice(s - 1, e) for s, e in self.segment_bounds]

    def to_levels(self) -> np.ndarray:
        out = np.empty(self.n)
        for sl, v in zip(self.slices(), self.segment_levels):
            out[sl] = v
        return out


@dataclass
class SolverReport:
    objective: float
    iterations: int
    kkt_residual: float
    converged: bool
    solver_name: str
    floor_active: bool = False
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by the iterative solvers.

    ``variance_floor=None`` means ``1e-12 * max(max y**2, 1)`` computed from the data.
    ``eta_bounds`` pins the admissible interval for canonical eta in the joint
    solver; supplying it also permits zero penalties there.
    """

    tolerance: float = 1e-8
    max_iterations: int = 10_000
    variance_floor: Optional[float] = None
    penalty_parameter: float = 1.0
    adaptive_penalty: bool = False
    eta_bounds: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations <= 0 or self.penalty_parameter <= 0:
            raise InputError("tolerance, max_iterations and penalty_parameter must be positive")
        if self.variance_floor is not None and self.variance_floor <= 0:
            raise InputError("variance_floor must be positive")
        if self.eta_bounds is not None:
            lo, hi = self.eta_bounds
            if not lo < hi < 0:
                raise InputError("eta_bounds must satisfy lo < hi < 0")

    def floor_for(self, y: np.ndarray) -> float:
        if self.variance_floor is not None:
            return self.variance_floor
        return 1e-12 * max(float(np.max(np.square(y), initial=0.0)), 1.0)


def to_canonical(m, sigma2):
    """Map (mean, variance) to the Gaussian natural parameters ``(m/s2, -1/(2 s2))``.

    Works elementwise on arrays as well as scalars.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    if not np.all(sigma2 > 0):
        raise DomainError("variance must be positive")
    mu = np.asarray(m, dtype=float) / sigma2
    eta = -0.5 / sigma2
    if mu.ndim == 0:
        return float(mu), float(eta)
    return mu, eta


def from_canonical(mu, eta):
    eta = np.asarray(eta, dtype=float)
    if not np.all(eta < 0):
        raise DomainError("canonical eta must be negative")
    sigma2 = -0.5 / eta
    m = np.asarray(mu, dtype=float) * sigma2
    if m.ndim == 0:
        return float(m), float(sigma2)
    return m, sigma2


def partial_sum_violations(residual: np.ndarray, x: np.ndarray, lam: float) -> tuple[float, float]:
    """Violation of the chain-TV stationarity conditions in partial-sum form.

    For ``min f(x) + lam * sum |x[k+1] - x[k]|`` with ``residual = -grad f(x)``,
    optimality is ``cumsum(residual)[k] = -lam * sign(x[k+1] - x[k])`` for
    k < N (any value in ``[-lam, lam]`` where the difference is zero) and a
    vanishing total sum.  Returns ``(max interior violation, |total sum|)``.
    """
    c = np.cumsum(residual)
    if x.shape[0] < 2:
        return 0.0, float(abs(c[-1]))
    inner = c[:-1]
    d = np.diff(x)
    s = np.sign(d)
    viol = np.where(s == 0, np.maximum(np.abs(inner) - lam, 0.0), np.abs(inner + lam * s))
    return float(np.max(viol)), float(abs(c[-1]))
