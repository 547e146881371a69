import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20111106)


def random_series(rng, n_lo=2, n_hi=200):
    n = int(rng.integers(n_lo, n_hi + 1))
    return rng.standard_normal(n) * rng.uniform(0.1, 10.0) + rng.uniform(-5, 5)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import CRITERIA, RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, _ in CRITERIA:
        if name in RESULTS:
            ok, detail = RESULTS[name]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
