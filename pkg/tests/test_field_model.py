import numpy as np
import pytest
from hypothesis import given, strategies as st

from anticonc.errors import AllDegenerate, DimensionMismatch, NotPSD, NotSymmetric, RhoOutOfRange
from anticonc.field_model import (augment_for_abs, equicorrelated_spec, random_spec,
                                  reduce_degenerate, validate_spec)


def test_cholesky_of_unit_correlation_half():
    s = validate_spec([0, 0], [[1, 0.5], [0.5, 1]])
    np.testing.assert_allclose(s.chol, [[1, 0], [0.5, np.sqrt(0.75)]], atol=1e-15)
    assert s.rank == 2 and s.full_rank


def test_rejects_bad_input():
    with pytest.raises(DimensionMismatch):
        validate_spec([0, 0, 0], np.eye(2))
    with pytest.raises(NotSymmetric):
        validate_spec([0, 0], [[1, 0.3], [0.2, 1]])
    with pytest.raises(NotPSD):
        validate_spec([0, 0], [[1, 2], [2, 1]])
    with pytest.raises(RhoOutOfRange):
        equicorrelated_spec(3, -0.6)


def test_singular_factor_reproduces_sigma():
    sigma = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
    s = validate_spec(np.zeros(3), sigma)
    assert s.rank == 2
    np.testing.assert_allclose(s.chol @ s.chol.T, sigma, atol=1e-12)


def test_reduce_drops_constants_and_duplicates():
    sigma = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    rep = reduce_degenerate(validate_spec(np.zeros(3), sigma))
    assert rep.kept == [0]
    assert [i for i, _ in rep.dropped] == [1, 2]
    assert rep.nondegenerate


def test_perfect_correlation_with_other_scale_is_kept():
    sigma = np.array([[1.0, 2.0], [2.0, 4.0]])
    rep = reduce_degenerate(validate_spec(np.zeros(2), sigma))
    assert rep.kept == [0, 1]
    assert rep.unresolved == [(0, 1)]


def test_all_zero_variance_raises():
    with pytest.raises(AllDegenerate):
        reduce_degenerate(validate_spec([1.0, 2.0], np.zeros((2, 2))))


def test_augment_for_abs_block_structure():
    s = equicorrelated_spec(2, 0.3)
    a = augment_for_abs(s)
    assert a.n == 4 and a.rank == 2
    np.testing.assert_allclose(a.sigma[:2, 2:], -s.sigma)


@given(n=st.integers(1, 7), seed=st.integers(0, 2 ** 32 - 1))
def test_random_spec_factor_reconstructs(n, seed):
    s = random_spec(np.random.default_rng(seed), n)
    np.testing.assert_allclose(s.chol @ s.chol.T, s.sigma, rtol=0, atol=1e-10 * s.sigma.max())
    np.testing.assert_allclose(np.diag(s.correlation()), 1.0)


@given(n=st.integers(2, 6), seed=st.integers(0, 2 ** 32 - 1))
def test_reduce_is_idempotent(n, seed):
    s = random_spec(np.random.default_rng(seed), n)
    once = reduce_degenerate(s).reduced
    twice = reduce_degenerate(once).reduced
    np.testing.assert_array_equal(once.sigma, twice.sigma)
    np.testing.assert_array_equal(once.mu, twice.mu)
