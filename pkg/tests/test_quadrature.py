import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from exradon.quadrature import DivergentIntegralError, Envelope, integrate, seed_breaks, tail_bound, truncation_radius


def test_polynomial_exact():
    r = integrate(lambda x: x**5 - 3 * x**2 + 1, [-1.0, 2.0])
    assert r.converged
    assert math.isclose(float(r.value), 2**6 / 6 - 1 / 6 - (8 + 1) + 3, rel_tol=1e-14)


def test_gaussian_integral():
    r = integrate(lambda x: np.exp(-x * x), seed_breaks(-12, 12))
    assert abs(float(r.value) - math.sqrt(math.pi)) < 1e-13
    assert float(r.error) < 1e-11


def test_vector_integrand_shares_panels():
    r = integrate(lambda x: np.stack([np.exp(-x * x), x * x * np.exp(-x * x)]), seed_breaks(-12, 12))
    np.testing.assert_allclose(r.value, [math.sqrt(math.pi), math.sqrt(math.pi) / 2], rtol=1e-13)


def test_kink_resolved_with_breakpoint():
    r = integrate(lambda x: np.abs(x - 0.3), [-1.0, 0.3, 1.0])
    assert math.isclose(float(r.value), (1.3**2 + 0.7**2) / 2, rel_tol=1e-14)


def test_cancelling_integrand_terminates():
    # Integral of an odd function: the estimate sits at the noise floor.
    r = integrate(lambda x: np.sin(x) * np.exp(-x * x), seed_breaks(-10, 10))
    assert r.converged and abs(float(r.value)) < 1e-15


def test_abs_value_approximates_modulus_integral():
    # A magnitude scale for noise floors, not a certified integral of |f|.
    r = integrate(lambda x: np.sin(x), [0.0, 2 * math.pi])
    assert math.isclose(float(r.abs_value), 4.0, rel_tol=0.05)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-2, 2), st.floats(0.1, 4.0))
def test_matches_scipy_on_shifted_gaussians(a, c, w):
    f = lambda x: np.exp(-a * (x - c) ** 2) * np.cos(w * x)  # noqa: E731
    ours = float(integrate(f, seed_breaks(-30, 30)).value)
    ref, _ = sp_integrate.quad(lambda x: float(f(np.array(x))), -30, 30, points=[c], epsabs=1e-13, limit=400)
    assert abs(ours - ref) < 1e-11


def test_seed_breaks_within_interval():
    b = seed_breaks(-3.0, 100.0, 1.0, extra=[5.5, 200.0])
    assert b[0] == -3.0 and b[-1] == 100.0 and 0.0 in b and 5.5 in b and 200.0 not in b
    assert np.all(np.diff(b) > 0)


def test_seed_panels_are_capped():
    b = seed_breaks(-10.0, 5000.0, 1.0)
    assert np.max(np.diff(b)) <= 16.0 + 1e-9 and b[0] == -10.0 and b[-1] == 5000.0


def test_seed_panels_follow_width_hook():
    width = lambda u: 1.0 + 0.1 * abs(u)  # noqa: E731
    b = seed_breaks(-10.0, 5000.0, 1.0, width=width)
    gaps = np.diff(b)
    assert np.all(gaps <= np.minimum(width(b[:-1]), width(b[1:])) * (1 + 1e-12))
    assert len(b) < 200


@pytest.mark.parametrize("rate,beta,k,kappa,R", [
    (1.0, 1.0, 0, 0.0, 2.0), (1.0, 1.0, 3, 0.5, 4.0), (1.0, 2.0, 0, 0.0, 0.5), (2.0, 2.0, 4, 1.0, 1.0),
    (1.0, 0.5, 0, 0.0, 1.0), (1.0, 0.3, 2, -0.2, 3.0),
])
def test_tail_bound_dominates_exact_tail(rate, beta, k, kappa, R):
    env = Envelope(0.0, rate, beta)
    exact, _ = sp_integrate.quad(lambda t: t**k * math.exp(kappa * t - rate * t**beta), R, math.inf,
                                 epsabs=0, epsrel=1e-10, limit=400)
    bound = tail_bound(env, R, k, kappa)
    assert exact <= bound * (1 + 1e-8)
    if beta >= 1.0:
        # The tangent bound is sharp to a modest factor; stretched tails drop e^{kappa t} and may be loose.
        assert bound <= 20 * exact


def test_tail_bound_with_shift_before_start():
    env = Envelope(0.0, 1.0, 1.0, shift=5.0)
    exact = 5.0 + 1.0  # int_0^5 1 dt + int_5^inf e^{-(t-5)} dt
    assert tail_bound(env, 0.0) >= exact - 1e-12


def test_vanishing_envelope_has_zero_tail():
    assert tail_bound(Envelope.vanishing(2.0), 0.0, 5, 3.0) == 0.0


def test_truncation_radius_meets_target():
    env = Envelope(0.0, 1.0, 2.0)
    R, b = truncation_radius(env, 1e-14)
    assert b <= 1e-14 and R < 10


def test_divergent_weight_detected():
    with pytest.raises(DivergentIntegralError):
        truncation_radius(Envelope(0.0, 0.5, 1.0), 1e-12, kappa=0.6)
    with pytest.raises(DivergentIntegralError):
        truncation_radius(Envelope(0.0, 1.0, 0.5), 1e-12, kappa=0.1)
    with pytest.raises(DivergentIntegralError):
        truncation_radius(None, 1e-12)
