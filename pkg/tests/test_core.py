import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l1seg.core import (
    DomainError,
    Hyperparams,
    InputError,
    Kind,
    PiecewiseConstantSignal,
    Segmentation,
    SolverOptions,
    TimeSeries,
    from_canonical,
    to_canonical,
)

positive = st.floats(1e-6, 1e6, allow_nan=False)
reals = st.floats(-1e6, 1e6, allow_nan=False)


def test_to_canonical_examples():
    assert to_canonical(0, 1) == (0.0, -0.5)
    assert to_canonical(2, 2) == (1.0, -0.25)


def test_from_canonical_examples():
    assert from_canonical(0, -0.5) == (0.0, 1.0)
    assert from_canonical(1, -0.25) == (2.0, 2.0)


@pytest.mark.parametrize("s2", [0.0, -1.0])
def test_to_canonical_rejects_nonpositive_variance(s2):
    with pytest.raises(DomainError):
        to_canonical(1.0, s2)


@pytest.mark.parametrize("eta", [0.0, 0.3])
def test_from_canonical_rejects_nonnegative_eta(eta):
    with pytest.raises(DomainError):
        from_canonical(1.0, eta)


@given(reals, positive)
def test_round_trip(m, s2):
    m2, s22 = from_canonical(*to_canonical(m, s2))
    assert math.isclose(m2, m, rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(s22, s2, rel_tol=1e-12)


def test_round_trip_vectorized(rng):
    m = rng.normal(size=100)
    s2 = rng.uniform(0.01, 10, 100)
    mb, sb = from_canonical(*to_canonical(m, s2))
    np.testing.assert_allclose(mb, m, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(sb, s2, rtol=1e-14)


@given(positive, positive)
def test_eta_difference_keeps_sign_of_variance_difference(a, b):
    _, ea = to_canonical(0.0, a)
    _, eb = to_canonical(0.0, b)
    assert np.sign(eb - ea) == np.sign(b - a)


def test_signal_kind_invariants():
    PiecewiseConstantSignal([1.0, 2.0], Kind.VARIANCE)
    with pytest.raises(DomainError):
        PiecewiseConstantSignal([1.0, 0.0], Kind.VARIANCE)
    with pytest.raises(DomainError):
        PiecewiseConstantSignal([-1.0, 0.0], Kind.CANONICAL_ETA)


def test_time_series_validation():
    assert len(TimeSeries([1.0, 2.0])) == 2
    assert TimeSeries(np.ones((4, 3))).dim == 3
    with pytest.raises(InputError):
        TimeSeries([1.0, np.nan])
    with pytest.raises(InputError):
        TimeSeries([])


def test_hyperparams_nonnegative():
    with pytest.raises(InputError):
        Hyperparams(-1.0, 0.0)


def test_segmentation_partitions_the_index_range():
    seg = Segmentation(10, (3, 7), (0.0, 1.0, 2.0))
    assert seg.segment_bounds == [(1, 3), (4, 7), (8, 10)]
    assert sum(e - s + 1 for s, e in seg.segment_bounds) == 10
    with pytest.raises(InputError):
        Segmentation(10, (7, 3), (0.0, 1.0, 2.0))
    with pytest.raises(InputError):
        Segmentation(10, (3,), (0.0,))


def test_solver_options_defaults():
    opts = SolverOptions()
    assert opts.tolerance == 1e-8 and opts.max_iterations == 10_000 and opts.penalty_parameter == 1.0
    assert opts.floor_for(np.array([0.0, 3.0])) == pytest.approx(9e-12)
    assert opts.floor_for(np.zeros(3)) == pytest.approx(1e-12)
    with pytest.raises(InputError):
        SolverOptions(tolerance=0)
