import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from anticonc.bounds import (MEAN_RATIO_KNEE, covering_tail_bound, deng_refined_upper,
                             deng_sigma_bar, equicorrelated_var_sandwich, erf_sandwich_check,
                             max_abs_q_bounds, mode_q_bounds, order_stat_q_bounds,
                             s_concave_var_mode_window, var_lower_bound, var_upper_bound)
from anticonc.errors import BadRho, NonpositiveSd, RhoCoverAtOne, SOutOfRange, UnsortedInput

# 30-digit mpmath values
REF = {
    "order_lo": 0.02885549284123806209, "order_hi": 0.34626591409485674508,
    "abs_hi_01": 0.099958359356928685985, "abs_hi_1": 0.9607689228305228009,
    "mode_lo": 0.083045479853739968828, "mode_hi": 8.4852813742385702928,
    "deng_n1": 2.3533936216582083831, "var_lo_pi": 0.0018165138060709205466,
    "tail_t9": 0.29872241020718365788,}

pos = st.floats(1e-3, 1e3)


def test_order_stat_values():
    lo, hi = order_stat_q_bounds(1.0, 0.1)
    assert lo == pytest.approx(REF["order_lo"], rel=1e-14)
    assert hi == pytest.approx(REF["order_hi"], rel=1e-14)


def test_zero_variance_gives_degenerate_lower():
    lo, hi = order_stat_q_bounds(0.0, 0.3)
    assert lo == pytest.approx(1.0, rel=1e-15)


def test_max_abs_values():
    assert max_abs_q_bounds(1.0, 0.1).upper == pytest.approx(REF["abs_hi_01"], rel=1e-14)
    assert max_abs_q_bounds(1.0, 1.0).upper == pytest.approx(REF["abs_hi_1"], rel=1e-14)


def test_mode_form_values():
    lo, hi = mode_q_bounds(1.0, 1.0)
    assert lo == pytest.approx(REF["mode_lo"], rel=1e-14)
    assert hi == pytest.approx(REF["mode_hi"], rel=1e-14)


def test_deng_single_coordinate():
    assert deng_sigma_bar([1.0]) == pytest.approx(1.0)
    assert deng_refined_upper([1.0], 0.1).upper == pytest.approx(REF["deng_n1"], rel=1e-14)
    with pytest.raises(UnsortedInput):
        deng_sigma_bar([2.0, 1.0])
    with pytest.raises(NonpositiveSd):
        deng_sigma_bar([0.0, 1.0])


def test_variance_bounds_values():
    assert var_lower_bound(1.0, 0.0) == pytest.approx(1 / 225, rel=1e-15)
    assert var_lower_bound(1.0, 1 / math.sqrt(math.pi)) == pytest.approx(REF["var_lo_pi"], rel=1e-14)
    assert var_upper_bound(1.0, 0.5, MEAN_RATIO_KNEE) == 4.0
    assert var_upper_bound(1.0, 0.0, 10.0) == 4.0  # second term 63.96 is larger
    assert var_upper_bound(1.0, 0.01, 40.0) == pytest.approx(3.76968106520056121411, rel=1e-13)
    with pytest.raises(BadRho):
        var_upper_bound(1.0, 1.5, 1.0)


def test_covering_tail():
    K, tail = covering_tail_bound(0.0, 1.0, math.exp(-2.0), 1.0, 9.0)
    assert K == pytest.approx(9.0)
    assert tail == pytest.approx(REF["tail_t9"], rel=1e-14)
    with pytest.raises(RhoCoverAtOne):
        covering_tail_bound(0.0, 1.0, 1.0, 1.0, 1.0)


def test_window_constant():
    w = s_concave_var_mode_window(-1 / 6)
    assert w.lower == pytest.approx(1 / 12)
    assert w.upper == pytest.approx(125 / 12, rel=1e-14)
    assert s_concave_var_mode_window(0.0).upper == pytest.approx(4.0)
    with pytest.raises(SOutOfRange):
        s_concave_var_mode_window(-0.4)


def test_erf_sandwich_grid():
    a = np.linspace(0.0, 20.0, 10_000)
    assert np.all(erf_sandwich_check(a))
    assert erf_sandwich_check(1.0) and erf_sandwich_check(10.0)


def test_equicorrelated_sandwich():
    b = equicorrelated_var_sandwich(16, 0.25, 1.0)
    assert b.lower == 0.25
    assert b.upper == pytest.approx(1 / math.log(16) + 0.25)


@given(var=pos, eps=pos)
def test_sandwich_ratios_are_constant(var, eps):
    lo, hi = order_stat_q_bounds(var, eps)
    assert hi / lo == pytest.approx(12.0, rel=1e-12)
    alo, ahi = max_abs_q_bounds(var, eps)
    assert ahi / alo == pytest.approx(math.sqrt(12.0), rel=1e-12)
    assert alo == lo and ahi <= hi


@given(var=pos, e1=pos, e2=pos)
def test_bounds_monotone(var, e1, e2):
    assume(e1 < e2)
    assert order_stat_q_bounds(var, e1).upper <= order_stat_q_bounds(var, e2).upper
    assert order_stat_q_bounds(var, e1).lower <= order_stat_q_bounds(var * 0.5, e1).lower


@given(sds=st.lists(st.floats(0.01, 100.0), min_size=1, max_size=50))
def test_sigma_bar_at_least_smallest_sd(sds):
    s = sorted(sds)
    assert deng_sigma_bar(s) >= s[0] * (1 - 1e-12)


@given(M=pos, eps=pos)
def test_mode_form_ratio(M, eps):
    lo, hi = mode_q_bounds(M, eps)
    assert 12.0 * (1 - 1e-12) <= hi / lo <= 144.0 * (1 + 1e-12)
