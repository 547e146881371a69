"""End-to-end acceptance checks.

Each ``check_*`` function returns ``(passed, detail)``.  Under pytest every
check becomes a test marked ``acceptance`` and its verdict is printed in the
terminal summary; ``python3 tests/test_acceptance.py`` runs them directly.
"""
import time

import numpy as np
import pytest

from l1seg.core import Hyperparams, SolverOptions
from l1seg.joint import find_constancy_threshold, neg_log_likelihood, nll_gradient, solve_joint
from l1seg.multivar import outer_products, solve_cov_fit
from l1seg.reference import l1_tv_objective, oracle_l1_tv, oracle_tv1d_dual
from l1seg.segmenter import extract_changepoints, refit_segments
from l1seg.synth import generate, scenario
from l1seg.tvdenoise import kkt_residual_mean, lambda_max_mean, solve_mean
from l1seg.variance import kkt_residual_eta, lambda_max_variance, solve_variance

SEED = 20111106
RESULTS = {}


def _series(rng, n):
    return rng.standard_normal(n) * rng.uniform(0.1, 10.0) + rng.uniform(-5, 5)


def check_lambda_max_mean():
    rng = np.random.default_rng(SEED)
    data = [rng.standard_normal(int(rng.integers(50, 501))) for _ in range(200)]
    solve_mean(data[0], 1.0)
    bad, t0 = [], time.perf_counter()
    for i, y in enumerate(data):
        lmax = lambda_max_mean(y)
        above = solve_mean(y, (1 + 1e-9) * lmax)[0].levels
        below = solve_mean(y, 0.99 * lmax)[0].levels
        if np.max(np.abs(above - y.mean())) > 1e-6 or np.ptp(below) == 0:
            bad.append(i)
    elapsed = time.perf_counter() - t0
    return not bad and elapsed < 5.0, f"{200 - len(bad)}/200 series, {elapsed:.2f}s"


def check_kkt_mean():
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for _ in range(200):
        y = _series(rng, int(rng.integers(2, 501)))
        lam = rng.choice([0.01, 0.1, 0.5, 1.0, 2.0]) * lambda_max_mean(y)
        m = solve_mean(y, lam)[0]
        worst = max(worst, kkt_residual_mean(y, m, lam).worst / (1 + np.max(np.abs(y))))
    return worst <= 1e-8, f"max scaled residual {worst:.2e}"


def check_oracle_mean():
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for i in range(100):
        y = rng.standard_normal(int(rng.integers(2, 201)))
        lam = (0.1, 1.0, 10.0)[i % 3] * lambda_max_mean(y) / 2
        fast = solve_mean(y, lam)[0].levels
        slow = oracle_tv1d_dual(y, lam).levels
        worst = max(worst, float(np.max(np.abs(fast - slow))))
    return worst <= 1e-6, f"max sup-norm gap {worst:.2e}"


def check_canonical_variance():
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 301))
        y = rng.standard_normal(n) * rng.uniform(0.1, 5.0)
        lam = rng.uniform(0.01, 1.2) * lambda_max_variance(y)
        s = solve_variance(y, lam)[0]
        eta = -0.5 / s.levels
        worst = max(worst, kkt_residual_eta(y, eta, lam).worst / (1 + np.max(y**2)))
    return worst <= 1e-6, f"max scaled residual {worst:.2e}"


def paper4_trial(seed, grid_rel, sc):
    """True when some grid value recovers the four-block variance profile."""
    y = generate("paper4", seed, sc)
    lmax = lambda_max_variance(y)
    for r in grid_rel:
        s = solve_variance(y, r * lmax)[0]
        seg = extract_changepoints(s)
        if len(seg.changepoints) != 3:
            continue
        if any(abs(c - t) > 30 for c, t in zip(seg.changepoints, (250, 500, 750))):
            continue
        refit = refit_segments(y, seg, "variance")
        if all(abs(v - t) <= 0.5 for v, t in zip(refit.segment_levels, (2, 1, 3, 1))):
            return True
    return False


def check_paper4():
    sc = scenario("paper4")
    grid = np.geomspace(0.01, 1.0, 20)
    paper4_trial(0, grid[:1], sc)
    t0 = time.perf_counter()
    hits = sum(paper4_trial(seed, grid, sc) for seed in range(50))
    elapsed = time.perf_counter() - t0
    rate = hits / 50
    return rate >= 0.8 and elapsed < 60.0, f"pass rate {rate:.0%} ({hits}/50), {elapsed:.2f}s"


def check_joint():
    rng = np.random.default_rng(SEED + 4)
    y = rng.normal(0.7, 1.3, 80)
    t1 = find_constancy_threshold(y, "mu", other=1e6)
    t2 = find_constancy_threshold(y, "eta", other=1e6)
    est, _ = solve_joint(y, Hyperparams(1.1 * t1, 1.1 * t2))
    m, s2 = y.mean(), y.var()
    err = max(np.max(np.abs(est.mu.levels - m / s2)), np.max(np.abs(est.eta.levels + 0.5 / s2)))

    grad_err = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 20))
        yy = rng.standard_normal(n) * 2
        mu = rng.standard_normal(n)
        eta = -rng.uniform(0.1, 3.0, n)
        d_mu, d_eta = rng.standard_normal(n), rng.standard_normal(n)
        h = 1e-6 * min(1.0, np.min(-eta))
        fd = (neg_log_likelihood(mu + h * d_mu, eta + h * d_eta, yy)
              - neg_log_likelihood(mu - h * d_mu, eta - h * d_eta, yy)) / (2 * h)
        g_mu, g_eta = nll_gradient(mu, eta, yy)
        an = g_mu @ d_mu + g_eta @ d_eta
        grad_err = max(grad_err, abs(fd - an) / max(abs(an), 1.0))
    ok = err <= 1e-4 and grad_err <= 1e-5
    return ok, f"thresholds ({t1:.4g}, {t2:.4g}), pair error {err:.2e}, gradient error {grad_err:.2e}"


def check_cov():
    rng = np.random.default_rng(SEED + 5)
    gap = -np.inf
    for _ in range(20):
        n = int(rng.integers(4, 31))
        y = rng.standard_normal((n, 1)) * np.repeat(rng.uniform(0.5, 3.0, 2), [n // 2, n - n // 2])[:, None]
        lam = rng.uniform(0.1, 3.0)
        _, rep = solve_cov_fit(y, lam)
        z = outer_products(y)[:, 0, 0]
        oracle = l1_tv_objective(oracle_l1_tv(z, lam), z, lam)
        gap = max(gap, rep.objective - oracle)
    Y = rng.standard_normal((50, 3))
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    A = solve_cov_fit(Y, 1.0)[0].matrices
    B = solve_cov_fit(Y @ Q.T, 1.0)[0].matrices
    eq = float(np.max(np.abs(B - Q @ A @ Q.T)))
    return gap <= 1e-4 and eq <= 1e-6, f"worst objective excess {gap:.2e}, equivariance error {eq:.2e}"


def check_performance():
    rng = np.random.default_rng(SEED + 6)
    y = np.repeat(rng.standard_normal(1000), 1000) + rng.standard_normal(10**6)
    solve_mean(y[:1000], 1.0)
    lam = 0.05 * lambda_max_mean(y)
    t0 = time.perf_counter()
    solve_mean(y, lam)
    elapsed = time.perf_counter() - t0
    return elapsed < 1.0, f"N=1e6 in {elapsed:.3f}s"


CRITERIA = [
    ("1 constancy threshold (mean)", check_lambda_max_mean),
    ("2 KKT certificate (mean)", check_kkt_mean),
    ("3 oracle agreement (mean)", check_oracle_mean),
    ("4 canonical optimality (variance)", check_canonical_variance),
    ("5 four-block variance recovery", check_paper4),
    ("6 joint solver sanity", check_joint),
    ("7 multivariate reduction", check_cov),
    ("8 performance floor", check_performance),
]


@pytest.mark.acceptance
@pytest.mark.parametrize("name,check", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(name, check):
    ok, detail = check()
    RESULTS[name] = (ok, detail)
    assert ok, detail


if __name__ == "__main__":
    for name, check in CRITERIA:
        ok, detail = check()
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
