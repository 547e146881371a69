"""Deterministic synthetic scenarios.

All draws use numpy's ``PCG64`` bit generator seeded with the given 64-bit
integer and ``Generator.standard_normal`` (ziggurat method), so a
``(scenario, seed)`` pair always yields the same samples for a given numpy
major version.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Scenario:
    name: str
    mean: np.ndarray            # (N,) or (N, n)
    variance: np.ndarray        # (N,) scalar variances, or (N, n, n) covariances
    changepoints: tuple

    @property
    def n(self) -> int:
        return self.mean.shape[0]


def _blocks(values, length):
    return np.repeat(np.asarray(values, dtype=float), length)


def _paper4() -> Scenario:
    # variances 2, 1, 3, 1 on t in (0,250], (250,500], (500,750], (750,1000]
    return Scenario("paper4", np.zeros(1000), _blocks([2, 1, 3, 1], 250), (250, 500, 750))


def _mean_steps() -> Scenario:
    return Scenario("mean-steps", _blocks([0, 2, -1, 1], 100), np.ones(400), (100, 200, 300))


def _joint_steps() -> Scenario:
    return Scenario("joint-steps", _blocks([0, 2, 2, -1], 150), _blocks([1, 1, 4, 0.5], 150),
                    (150, 300, 450))


def _cov_steps() -> Scenario:
    a = np.eye(3)
    b = np.array([[2.0, 0.8, 0.0], [0.8, 1.0, 0.3], [0.0, 0.3, 0.5]])
    covs = np.concatenate([np.repeat(a[None], 100, axis=0), np.repeat(b[None], 100, axis=0)])
    return Scenario("cov-steps", np.zeros((200, 3)), covs, (100,))


SCENARIOS = {
    "paper4": _paper4,
    "mean-steps": _mean_steps,
    "joint-steps": _joint_steps,
    "cov-steps": _cov_steps,
}


def scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None


def generate(name: str, seed: int, sc: Optional[Scenario] = None) -> np.ndarray:
    """Draw one realization of scenario ``name``."""
    sc = sc or scenario(name)
    rng = np.random.Generator(np.random.PCG64(seed))
    if sc.variance.ndim == 1:
        return sc.mean + np.sqrt(sc.variance) * rng.standard_normal(sc.n)
    n = sc.mean.shape[1]
    chol = np.linalg.cholesky(sc.variance)
    return sc.mean + np.einsum("tij,tj->ti", chol, rng.standard_normal((sc.n, n)))


def emit_scenario_doc(name: str, seed: int) -> dict:
    sc = scenario(name)
    return {"scenario": name, "seed": seed, "n": sc.n, "generator": "numpy PCG64 + standard_normal",
            "changepoints": list(sc.changepoints), "mean": sc.mean, "variance": sc.variance}
