import numpy as np
import pytest
from hypothesis import given, strategies as st

from anticonc.errors import CombinatorialBudgetExceeded, DegenerateSpec, KOutOfRange
from anticonc.field_model import equicorrelated_spec, validate_spec
from anticonc.gaussian_num import cdf, pdf
from anticonc.order_density import (DensityGrid, check_s_concavity, convolve_box, density_grid,
                                    density_iid_closed_form, density_order_statistic,
                                    mode_of_grid)

# mpmath references
THREE_IID_MAX_AT_1 = 0.51384490382930433127      # 3 Phi(1)^2 phi(1)
FOLDED_AT_HALF = 0.70413065352859895555          # 2 phi(1/2)
BIV_MAX_RHO_HALF_AT_07 = 0.41026858295529426463  # 2 phi(z) Phi(z sqrt((1-r)/(1+r)))
BIV_MIN_RHO_HALF_AT_M03 = 0.43383236619346435997
TWO_IID_MAX_MODE = (0.48689341405235644751, 0.50605446898918076324)


def test_single_coordinate_is_normal_pdf():
    f, fe = density_order_statistic(validate_spec([0.0], [[1.0]]), 1, 0.0)
    assert f == pytest.approx(0.39894228040143267794, rel=1e-14)


def test_iid_closed_form_and_general_agree():
    spec = validate_spec(np.zeros(3), np.eye(3))
    assert density_iid_closed_form(3, 3, 0.0, 1.0, 1.0) == pytest.approx(THREE_IID_MAX_AT_1, rel=1e-13)
    f, fe = density_order_statistic(spec, 3, 1.0)
    assert abs(f - THREE_IID_MAX_AT_1) <= 4 * fe + 1e-12


def test_bivariate_correlated_max_and_min():
    spec = equicorrelated_spec(2, 0.5)
    f, fe = density_order_statistic(spec, 2, 0.7)
    assert abs(f - BIV_MAX_RHO_HALF_AT_07) <= 4 * fe + 1e-12
    f, fe = density_order_statistic(spec, 1, -0.3)
    assert abs(f - BIV_MIN_RHO_HALF_AT_M03) <= 4 * fe + 1e-12


def test_folded_normal_grid():
    g = density_grid(validate_spec([0.0], [[1.0]]), 1, (0.0, 8.0, 65), abs_variant=True)
    assert g.f[4] == pytest.approx(FOLDED_AT_HALF, rel=1e-12)
    M, z = mode_of_grid(g)
    assert z == 0.0 and M == pytest.approx(2 * 0.39894228040143267794, rel=1e-12)


def test_mode_of_two_iid_max():
    g = density_grid(validate_spec(np.zeros(2), np.eye(2)), 2, (-8.0, 8.0, 1601))
    M, z = mode_of_grid(g)
    assert M == pytest.approx(TWO_IID_MAX_MODE[0], rel=1e-6)
    assert z == pytest.approx(TWO_IID_MAX_MODE[1], abs=1e-3)


def test_normalization_and_marginal_sum():
    spec = validate_spec([0.3, -0.2, 0.0], [[1.0, 0.4, -0.2], [0.4, 2.0, 0.3], [-0.2, 0.3, 0.5]])
    grid = (-10.0, 10.0, 321)
    gs = [density_grid(spec, k, grid, budget=1024) for k in (1, 2, 3)]
    for g in gs:
        assert abs(g.integral() - 1.0) <= 1e-3 + g.integral_err()
    z = gs[0].z
    marg = sum(pdf((z - spec.mu[i]) / spec.sds[i]) / spec.sds[i] for i in range(3))
    total = sum(g.f for g in gs)
    err = sum(g.fe for g in gs)
    assert np.all(np.abs(total - marg) <= 4 * err)


def test_guards():
    with pytest.raises(KOutOfRange):
        density_order_statistic(equicorrelated_spec(2, 0.1), 3, 0.0)
    with pytest.raises(DegenerateSpec):
        density_order_statistic(validate_spec([0, 0], [[1, 1], [1, 1]]), 2, 0.0)
    with pytest.raises(CombinatorialBudgetExceeded):
        density_order_statistic(equicorrelated_spec(30, 0.1), 15, 0.0)


def _grid(z, f):
    return DensityGrid(z, f, np.full_like(f, 1e-15))


def test_s_concavity_examples():
    z = np.linspace(-8, 8, 641)
    bimodal = 0.5 * pdf(z + 3) + 0.5 * pdf(z - 3)
    assert not check_s_concavity(_grid(z, bimodal), -1 / 6)[0]
    two_max = density_iid_closed_form(2, 2, 0.0, 1.0, z)
    assert check_s_concavity(_grid(z, two_max), -1 / 6)[0]


def test_unequal_scale_max_is_not_s_concave():
    # max of independent N(0,1) and N(0,10^2)
    z = np.linspace(-40, 40, 1281)
    f = pdf(z) * cdf(z / 10) + pdf(z / 10) / 10 * cdf(z)
    ok, worst = check_s_concavity(_grid(z, f), -1 / 6)
    assert not ok and worst > 0.04


def test_convolve_box_preserves_mass_and_adds_variance():
    z = np.linspace(-8, 8, 257)
    g = _grid(z, pdf(z))
    gc = convolve_box(g, 0.5)
    assert gc.integral() == pytest.approx(1.0, abs=1e-6)
    m, v = gc.moments()
    assert m == pytest.approx(0.25, abs=1e-6)
    # the discrete window adds O(h^2) variance
    assert v == pytest.approx(1.0 + 0.25 / 12, abs=g.step ** 2)


@given(eps=st.sampled_from([0.125, 0.3, 0.5, 1.0, 1.7]))
def test_convolution_variance_identity(eps):
    z = np.linspace(-9, 9, 577)
    f = density_iid_closed_form(3, 2, 0.0, 1.0, z)
    g = _grid(z, f)
    _, v0 = g.moments()
    _, v1 = convolve_box(g, eps).moments()
    assert v1 == pytest.approx(v0 + eps * eps / 12, abs=g.step ** 2)


def test_csv_round_trip(tmp_path):
    z = np.linspace(-1, 1, 17)
    g = DensityGrid(z, pdf(z), np.full(17, 1e-9))
    path = tmp_path / "g.csv"
    g.to_csv(path, header_lines=["k=1"])
    back = DensityGrid.from_csv(path)
    np.testing.assert_array_equal(back.f, g.f)
    np.testing.assert_array_equal(back.z, g.z)


def test_s_concavity_with_exact_zero_errors_and_tiny_tails():
    # f**(s-1) overflows where f is tiny; a zero error must not turn into nan
    z = np.linspace(-60, 60, 1921)
    f = pdf(z) * cdf(z / 10) + pdf(z / 10) / 10 * cdf(z)
    ok, worst = check_s_concavity(DensityGrid(z, f, np.zeros_like(f)), -1 / 6)
    assert not ok and np.isfinite(worst)
