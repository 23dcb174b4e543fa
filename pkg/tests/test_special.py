import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from hetnet_feedback.special import (
    EULER_GAMMA,
    ConvergenceError,
    Jet,
    d_func,
    d_func_jet,
    d_func_taylor,
    digamma,
    gauss_2f1,
    gauss_legendre,
    harmonic,
    integrate_semi_infinite,
)


def d_beta4(x):
    # closed form of D(x, 4)
    return math.sqrt(x) * math.atan(math.sqrt(x))


class TestGauss2F1:
    @pytest.mark.parametrize("x, expected", [
        (0.0, 1.0),
        (-1.0, math.pi / 4),
        (-4.0, math.atan(2.0) / 2.0),
    ])
    def test_arctan_identity_points(self, x, expected):
        assert gauss_2f1(1.0, 0.5, 1.5, x) == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize("z", [0.01, 0.3, 0.9, 1.7, 5.0, 40.0, 1e3, 1e5])
    def test_arctan_identity_grid(self, z):
        assert gauss_2f1(1.0, 0.5, 1.5, -z * z) == pytest.approx(math.atan(z) / z, rel=1e-10)

    def test_rejects_nonpositive_integer_c(self):
        with pytest.raises(ValueError):
            gauss_2f1(1.0, 0.5, -2.0, -0.3)

    def test_agrees_with_scipy(self):
        from scipy.special import hyp2f1
        for a, b, c, x in [(1, 0.25, 1.25, -0.4), (3, 0.7, 2.3, -12.0), (2.5, 1.5, 3.5, -300.0)]:
            assert gauss_2f1(a, b, c, x) == pytest.approx(hyp2f1(a, b, c, x), rel=1e-10)

    def test_never_returns_nan(self):
        # large parameters drive the series hard; failure must be loud
        try:
            v = gauss_2f1(40.0, 39.5, 40.5, -1e6)
        except ConvergenceError:
            return
        assert np.isfinite(v)


class TestDFunc:
    def test_zero(self):
        assert d_func(0.0, 4.0) == 0.0

    @pytest.mark.parametrize("x", [1.0, 4.0])
    def test_beta4_examples(self, x):
        assert d_func(x, 4.0) == pytest.approx(d_beta4(x), rel=1e-10)

    def test_beta4_closed_form_grid(self):
        xs = np.linspace(0.0, 100.0, 401)
        got = d_func(xs, 4.0)
        want = np.sqrt(xs) * np.arctan(np.sqrt(xs))
        assert np.all(np.abs(got - want) <= 1e-9 * (1 + np.abs(want)))

    def test_rejects_small_exponent(self):
        with pytest.raises(ValueError):
            d_func(1.0, 2.0)

    def test_rejects_negative_argument(self):
        with pytest.raises(ValueError):
            d_func(-0.1, 4.0)

    def test_matches_integral_definition(self):
        from scipy import integrate
        for x, y in [(0.3, 3.0), (2.0, 3.5), (7.0, 6.0)]:
            lo = x ** (-2.0 / y)
            val, _ = integrate.quad(lambda t: 1.0 / (1.0 + t ** (y / 2.0)), lo, np.inf)
            assert d_func(x, y) == pytest.approx(x ** (2.0 / y) * val, rel=1e-8)

    def test_monotone_on_grid(self):
        xs = np.linspace(0.0, 50.0, 101)
        ys = [2.5, 3.0, 4.0, 5.5]
        table = np.array([d_func(xs, y) for y in ys])
        assert np.all(np.diff(table, axis=1) >= -1e-12)
        assert np.all(np.diff(table, axis=0) <= 1e-12)


class TestJet:
    def test_order_zero_is_scalar_arithmetic(self):
        a, b = Jet([2.0]), Jet([5.0])
        assert (a * b).value == 10.0
        assert (a + b).value == 7.0
        assert (a / b).value == pytest.approx(0.4)
        assert d_func_jet(Jet.variable(0.0, 0), 4.0).value == 0.0

    def test_d_func_first_derivative(self):
        j = d_func_jet(Jet.variable(1.0, 1), 4.0)
        assert j.value == pytest.approx(math.pi / 4, rel=1e-10)
        assert j.derivatives()[1] == pytest.approx(math.pi / 8 + 0.25, rel=1e-10)

    @pytest.mark.parametrize("x0", [0.3, 1.0, 4.0, 60.0])
    def test_d_func_taylor_high_order(self, x0):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 30
        coeffs = d_func_taylor(x0, 4.0, 7)
        for j in range(8):
            ref = float(mpmath.diff(lambda x: mpmath.sqrt(x) * mpmath.atan(mpmath.sqrt(x)), x0, j))
            assert coeffs[j] * math.factorial(j) == pytest.approx(ref, rel=1e-9, abs=1e-14)

    @pytest.mark.parametrize("x0, y", [(0.5, 3.0), (2.0, 6.0)])
    def test_d_func_taylor_other_exponents(self, x0, y):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 30

        def d(x):
            return 2 * x / (y - 2) * mpmath.hyp2f1(1, 1 - 2 / mpmath.mpf(y), 2 - 2 / mpmath.mpf(y), -x)

        coeffs = d_func_taylor(x0, y, 5)
        for j in range(6):
            assert coeffs[j] * math.factorial(j) == pytest.approx(float(mpmath.diff(d, x0, j)), rel=1e-9)

    def test_equal_order_closure(self):
        a = Jet.variable(0.7, 3)
        b = Jet.constant(2.0, 3)
        for r in (a + b, a * b, a.reciprocal(), a / b, d_func_jet(a, 3.0)):
            assert r.order == 3
            assert len(r.coeffs) == 4

    def test_composition_matches_richardson(self):
        def f(s):
            return 1.0 / (1.0 + d_beta4(2.0 * s)) * (s + 3.0)

        s0 = 0.8
        s = Jet.variable(s0, 5)
        jet = (s + 3.0) / (1.0 + d_func_jet(2.0 * s, 4.0))
        for j, deriv in enumerate(_richardson_derivatives(f, s0, 0.05, 5)):
            assert jet.derivatives()[j] == pytest.approx(deriv, rel=1e-6, abs=1e-9)

    def test_batched_coefficients(self):
        s = Jet.variable(np.array([0.5, 1.0, 2.0]), 2)
        out = d_func_jet(s, 4.0)
        for i, x0 in enumerate([0.5, 1.0, 2.0]):
            np.testing.assert_allclose(out.coeffs[:, i], d_func_taylor(x0, 4.0, 2), rtol=1e-12)


def _richardson_derivatives(f, x0, h, order):
    """Derivatives 0..order by central differences with two-step Richardson extrapolation."""
    from math import comb

    def central(step, m):
        if m == 0:
            return f(x0)
        return sum((-1) ** i * comb(m, i) * f(x0 + (m / 2 - i) * step) for i in range(m + 1)) / step ** m

    out = []
    for m in range(order + 1):
        d1, d2, d3 = central(h, m), central(h / 2, m), central(h / 4, m)
        r1, r2 = (4 * d2 - d1) / 3, (4 * d3 - d2) / 3
        out.append((16 * r2 - r1) / 15)
    return out


class TestDigammaHarmonic:
    @pytest.mark.parametrize("x, expected", [
        (1.0, -EULER_GAMMA),
        (8.0, 363.0 / 140.0 - EULER_GAMMA),
        (2.0, 1.0 - EULER_GAMMA),
    ])
    def test_values(self, x, expected):
        assert digamma(x) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("x", [0.5, 1.0, 3.25, 10.0])
    def test_recurrence(self, x):
        assert digamma(x + 1) - digamma(x) == pytest.approx(1.0 / x, abs=1e-12)

    def test_against_scipy(self):
        from scipy.special import psi
        for x in [0.01, 0.3, 1.7, 6.0, 25.0, 1e4]:
            assert digamma(x) == pytest.approx(psi(x), rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            digamma(0.0)

    @pytest.mark.parametrize("n, expected", [(1, 1.0), (3, 11.0 / 6.0), (7, 363.0 / 140.0)])
    def test_harmonic(self, n, expected):
        assert harmonic(n) == pytest.approx(expected, rel=1e-15)

    @given(st.integers(min_value=1, max_value=500))
    def test_harmonic_digamma_link(self, n):
        assert harmonic(n - 1) - EULER_GAMMA == pytest.approx(digamma(n), rel=1e-12, abs=1e-12)


class TestQuadrature:
    def test_exponential(self):
        assert integrate_semi_infinite(lambda z: math.exp(-z)).value == pytest.approx(1.0, abs=1e-8)

    def test_rational(self):
        assert integrate_semi_infinite(lambda z: 1.0 / (1.0 + z) ** 2).value == pytest.approx(1.0, abs=1e-8)

    def test_against_trapezoid_oracle(self):
        def f(z):
            return 1.0 / ((1.0 + z) * (1.0 + d_func(z, 4.0)))

        got = integrate_semi_infinite(f).value
        # trapezoid on [0, 1] plus the tail mapped by z = t^-2 (smooth at t = 0), 10^6 points
        t = np.linspace(0.0, 1.0, 500_001)
        head = trapezoid(1.0 / ((1.0 + t) * (1.0 + d_func(t, 4.0))), t)
        tt = t[1:]
        z = tt ** -2.0
        g = 2.0 * tt ** -3.0 / ((1.0 + z) * (1.0 + d_func(z, 4.0)))
        tail = trapezoid(np.concatenate([[2.0 / (math.pi / 2.0)], g]), t)
        assert got == pytest.approx(head + tail, abs=1e-6)

    def test_divergent_integral_is_reported(self):
        with pytest.raises(ConvergenceError) as info:
            integrate_semi_infinite(lambda z: 1.0 / (1.0 + z), limit=50)
        assert info.value.partial is not None

    def test_gauss_legendre_exact_for_polynomials(self):
        x, w = gauss_legendre(6, 0.0, 2.0)
        assert np.dot(w, x ** 11) == pytest.approx(2.0 ** 12 / 12, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0.0, 1e4), y=st.floats(2.05, 8.0))
def test_d_func_nonnegative_and_finite(x, y):
    v = d_func(x, y)
    assert np.isfinite(v) and v >= 0.0


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0.0, 200.0), dx=st.floats(1e-3, 10.0), y=st.floats(2.1, 7.0))
def test_d_func_nondecreasing(x, dx, y):
    assert d_func(x + dx, y) >= d_func(x, y) - 1e-12 * (1 + d_func(x, y))
