import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from exradon.fields import Gaussian
from exradon.geometry import Line
from exradon.laplace import (CONSISTENT_WITH_ZERO, INDETERMINATE, NONZERO, OutsideStripError, gaussian_profile,
                             moment_vanishing_test, moments_1d, odd_exp, one_sided_exp, series_tail_bounds, partial_sum,
                             profile_from_field, series_vs_transform, stieltjes_control, two_sided_exp,
                             two_sided_laplace, zero_profile)


def test_two_sided_exp_closed_form():
    val, err = two_sided_laplace(two_sided_exp(), 0.5)
    assert abs(val - 8 / 3) < 1e-12 and err < 1e-10


def test_gaussian_profile_small_s_is_mass():
    val, _ = two_sided_laplace(gaussian_profile(), 1e-6)
    assert abs(val - math.sqrt(math.pi)) < 1e-10


def test_outside_strip_rejected():
    with pytest.raises(OutsideStripError):
        two_sided_laplace(two_sided_exp(), 1.0)
    with pytest.raises(OutsideStripError):
        series_vs_transform(two_sided_exp(), 1.2, 4)


def test_two_sided_exp_moments():
    m = moments_1d(two_sided_exp(), 6)
    expected = [2 * math.factorial(n) if n % 2 == 0 else 0.0 for n in range(7)]
    np.testing.assert_allclose(m.values, expected, atol=1e-10, rtol=1e-12)
    assert math.isclose(m.values[4], 48.0, rel_tol=1e-12)


def test_odd_profile_even_moments_vanish():
    m = moments_1d(odd_exp(), 8)
    assert np.all(np.abs(m.values[::2]) <= 1e-12 * np.maximum(m.abs_moments[::2], 1))
    # Odd moments of x e^{-|x|}: 2 (n+1)!
    np.testing.assert_allclose(m.values[1::2], [2 * math.factorial(n + 1) for n in range(1, 9, 2)], rtol=1e-11)


def test_stieltjes_moments_vanish_but_profile_is_not_zero():
    prof = stieltjes_control()
    m = moments_1d(prof, 8)
    assert np.all(np.abs(m.values) <= 1e-10 * m.abs_moments)
    assert np.max(np.abs(prof.func(np.linspace(0, 50, 101)))) > 0.1


def test_stieltjes_moment_oracle_is_zero():
    # m_n = 4 Im[Gamma(4n + 4) / (1 - i)^(4n + 4)] and (1 - i)^(4n + 4) is real.
    for n in range(9):
        z = special.gamma(4 * n + 4) / (1 - 1j) ** (4 * n + 4)
        assert abs(z.imag) <= 1e-12 * abs(z)


def test_partial_sum_closed_form():
    m = moments_1d(two_sided_exp(), 10).values
    s10 = partial_sum(m, 0.5, 10)
    assert abs(s10 - sum(2 * 0.5**n for n in range(0, 11, 2))) < 1e-12
    rep = series_vs_transform(two_sided_exp(), 0.5, 10)
    assert rep["satisfied"]
    assert abs(rep["L_quadrature"] - 8 / 3) < 1e-12


def test_near_edge_bound():
    rep = series_vs_transform(two_sided_exp(), 0.9, 6)
    neg = (1 / 1.0) * (1 / (1 - 0.9) - sum(0.9**n for n in range(7)))
    assert math.isclose(rep["bound_neg_axis"], neg, rel_tol=1e-12)
    assert math.isfinite(rep["bound_neg_axis"]) and rep["satisfied"]


def test_bounds_match_their_defining_sums():
    neg, pos = series_tail_bounds(2.0, 1.5, 0.6, 5)
    r = 0.6 / 1.5
    assert math.isclose(neg, (2.0 / 1.5) * (1 / (1 - r) - sum(r**n for n in range(6))), rel_tol=1e-12)
    assert math.isclose(pos, r**6 / 1.5, rel_tol=1e-14)


def test_zero_profile():
    rep = series_vs_transform(zero_profile(), 0.5, 6)
    assert rep["L_quadrature"] == 0.0 and rep["S_N"] == 0.0 and rep["satisfied"]
    assert moment_vanishing_test(zero_profile())["verdict"] == CONSISTENT_WITH_ZERO


def test_verdicts():
    assert moment_vanishing_test(two_sided_exp())["verdict"] == NONZERO
    assert moment_vanishing_test(stieltjes_control(), n_max=8)["verdict"] == INDETERMINATE


def test_profile_from_field_line():
    prof = profile_from_field(Gaussian(), Line.at(0.0, 0.0))
    m = moments_1d(prof, 2)
    np.testing.assert_allclose(m.values, [math.sqrt(math.pi), 0.0, math.sqrt(math.pi) / 2], atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(0.02, 0.98), st.integers(1, 12))
def test_series_within_bounds_random(mu_pos, mu_neg, frac, N):
    prof = one_sided_exp(mu_pos, mu_neg)
    s = frac * prof.mu
    rep = series_vs_transform(prof, s, N)
    assert rep["satisfied"]
    exact = 1 / (mu_pos + s) + 1 / (mu_neg - s)
    assert abs(rep["L_quadrature"] - exact) <= 1e-8 * exact


@pytest.mark.parametrize("s", [0.96875, 0.995])
def test_near_strip_edge_uses_log_form(s):
    # The window reaches |x| ~ 1e3, where exp(-|x|) underflows while exp(-sx) overflows.
    val, err = two_sided_laplace(two_sided_exp(), s)
    assert abs(val - 2 / (1 - s * s)) <= 1e-12 * val and err < 1e-10 * val


def test_odd_profile_laplace_closed_form():
    val, _ = two_sided_laplace(odd_exp(), 0.3)
    assert math.isclose(val, 1 / 1.3**2 - 1 / 0.7**2, rel_tol=1e-12)
