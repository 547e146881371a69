"""Turn per-sample level estimates into explicit segments."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .core import InputError, Kind, Segmentation, SolverOptions, as_series


def default_delta(levels) -> float:
    levels = np.asarray(getattr(levels, "levels", levels), dtype=float)
    if levels.size == 0:
        return 0.0
    # epsilon tracks the level scale so rounding noise on a constant fit stays below delta
    eps = np.sqrt(np.finfo(float).eps) * (1.0 + float(np.max(np.abs(levels))))
    return 1e-6 * (float(np.ptp(levels)) + eps)


def extract_changepoints(levels, delta: Optional[float] = None) -> Segmentation:
    """Place a changepoint after sample k wherever consecutive levels differ by more than ``delta``."""
    lv = np.asarray(getattr(levels, "levels", levels), dtype=float)
    if delta is None:
        delta = default_delta(lv)
    if delta < 0:
        raise InputError("delta must be nonnegative")
    n = lv.shape[0]
    cps = np.flatnonzero(np.abs(np.diff(lv)) > delta) + 1
    bounds = np.concatenate(([0], cps, [n]))
    seg_levels = [float(np.mean(lv[a:b])) for a, b in zip(bounds[:-1], bounds[1:])]
    return Segmentation(n, tuple(int(k) for k in cps), tuple(seg_levels))


def refit_segments(y, seg: Segmentation, mode: Kind | str = Kind.MEAN,
                   floor: Optional[float] = None) -> Segmentation:
    """Replace shrunken segment levels by raw per-segment statistics.

    ``mode="mean"`` uses segment means of ``y``; ``mode="variance"`` uses
    segment means of ``y**2`` floored at the variance floor.
    """
    y = as_series(y)
    if y.shape[0] != seg.n:
        raise InputError(f"segmentation covers {seg.n} samples, series has {y.shape[0]}")
    mode = Kind(mode)
    if mode is Kind.MEAN:
        vals = [float(np.mean(y[sl])) for sl in seg.slices()]
    elif mode is Kind.VARIANCE:
        eps = SolverOptions(variance_floor=floor).floor_for(y)
        vals = [max(float(np.mean(y[sl] ** 2)), eps) for sl in seg.slices()]
    else:
        raise InputError(f"refit mode must be mean or variance, got {mode.value}")
    return Segmentation(seg.n, seg.changepoints, tuple(vals))
