import numpy as np
import pytest
from hypothesis import given, strategies as st

from anticonc.concentration import (concentration_curve, convolved_mode,
                                    empirical_concentration, exact_gaussian_abs_concentration)
from anticonc.errors import TooFewSamples

ERF_HALF_OVER_SQRT2 = 0.38292492254802620727  # erf(0.5 / sqrt 2)

dyadic = st.integers(-2 ** 10, 2 ** 10).map(lambda k: k / 64.0)


def test_tenths_window():
    x = np.arange(10) / 10.0
    est = empirical_concentration(x, 0.25, min_samples=1)
    assert est.q == pytest.approx(0.3)
    assert est.t_star == 0.0


def test_closed_window_counts_both_edges():
    est = empirical_concentration(np.array([0.0, 0.5, 1.0, 3.0]), 1.0, min_samples=1)
    assert est.q == 0.75


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        empirical_concentration(np.zeros(10), 0.1)


def test_exact_abs_gaussian():
    assert exact_gaussian_abs_concentration(1.0, 0.5) == pytest.approx(ERF_HALF_OVER_SQRT2, rel=1e-14)
    assert exact_gaussian_abs_concentration(2.0, 1.0) == exact_gaussian_abs_concentration(1.0, 0.5)


def test_convolved_mode_of_uniform_sample():
    x = np.linspace(0, 1, 10_001)
    assert convolved_mode(x, 0.1) == pytest.approx(1.0, rel=2e-3)


@given(xs=st.lists(dyadic, min_size=1, max_size=60), e1=st.integers(1, 64), e2=st.integers(1, 64))
def test_monotone_and_subadditive(xs, e1, e2):
    x = np.array(xs)
    a, b = e1 / 64.0, e2 / 64.0
    q = lambda e: empirical_concentration(x, e, min_samples=1).q
    assert q(a) <= q(a + b)
    assert q(a + b) <= q(a) + q(b) + 1e-12


@given(xs=st.lists(dyadic, min_size=1, max_size=60), shift=dyadic,
       scale=st.sampled_from([0.5, 2.0, 4.0]), e=st.integers(1, 64))
def test_shift_and_scale_invariance(xs, shift, scale, e):
    x = np.array(xs)
    eps = e / 64.0
    base = empirical_concentration(x, eps, min_samples=1).q
    assert empirical_concentration(x + shift, eps, min_samples=1).q == base
    assert empirical_concentration(scale * x, scale * eps, min_samples=1).q == base


def test_curve_matches_single_calls():
    x = np.random.default_rng(0).standard_normal(2000)
    rows = concentration_curve(x, [0.05, 0.2, 1.0])
    assert [r.q for r in rows] == [empirical_concentration(x, e).q for e in (0.05, 0.2, 1.0)]
