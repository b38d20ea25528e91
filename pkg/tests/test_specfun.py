import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from riseval import specfun
from riseval.quadrature import QuadratureSpec, integrate_semi_infinite

EULER = 0.5772156649015329
# regression constant, mpmath hyp2f1 at 30 digits
F21_AT_MINUS_100 = float(mp.hyp2f1(4, -2 / 2.8, 1 - 2 / 2.8, -100))


def k0_quad(x):
    top = math.acosh(max(750.0 / x, 1.0))
    val, _ = integrate.quad(lambda t: math.exp(-x * math.cosh(t)), 0, top, epsabs=0, epsrel=1e-13, limit=200)
    return val


def e1_quad(z):
    val, _ = integrate.quad(lambda t: math.exp(-z * t) / t, 1, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return val


class TestBessel:
    def test_k0_at_one(self):
        np.testing.assert_allclose(specfun.bessel_k0(1.0), k0_quad(1.0), rtol=1e-12)
        np.testing.assert_allclose(specfun.bessel_k0(1.0), 0.42102443824070834, rtol=1e-13)

    def test_k0_grid_against_scipy(self):
        x = np.logspace(-6, np.log10(680), 400)
        np.testing.assert_allclose(specfun.bessel_k0(x), special.k0(x), rtol=1e-10)

    def test_k1_grid_against_scipy(self):
        x = np.logspace(-6, np.log10(680), 400)
        np.testing.assert_allclose(specfun.bessel_k1(x), special.k1(x), rtol=1e-10)

    @pytest.mark.parametrize("x", [0.05, 0.7, 2.0, 2.01, 9.0, 40.0])
    def test_k0_integral_representation(self, x):
        np.testing.assert_allclose(specfun.bessel_k0(x), k0_quad(x), rtol=1e-11)

    def test_log_singularity(self):
        x = 1e-9
        assert specfun.bessel_k0(x) / (-math.log(x / 2) - EULER) == pytest.approx(1.0, abs=1e-12)

    def test_underflow(self):
        assert specfun.bessel_k0(700.0) < 1e-300
        assert specfun.bessel_k0(800.0) == 0.0

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            specfun.bessel_k0(bad)

    @pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
    def test_moment_identity(self, a):
        res = integrate_semi_infinite(lambda x: x * specfun.bessel_k0(np.minimum(a * x, 700.0)), 0.0,
                                      QuadratureSpec(rel_tol=1e-11, abs_tol=1e-15))
        np.testing.assert_allclose(res.value, 1 / a**2, rtol=1e-8)

    def test_shape_preserved(self):
        x = np.array([[0.5, 1.0], [2.0, 5.0]])
        assert specfun.bessel_k0(x).shape == (2, 2)
        assert isinstance(specfun.bessel_k1(1.5), float)


class TestExpIntegral:
    def test_e1_at_one(self):
        np.testing.assert_allclose(specfun.exp_integral_e1(1.0), e1_quad(1.0), rtol=1e-11)
        np.testing.assert_allclose(specfun.exp_integral_e1(1.0), 0.21938393439552029, rtol=1e-12)

    def test_grid_against_scipy(self):
        z = np.logspace(-8, np.log10(600), 300)
        np.testing.assert_allclose(specfun.exp_integral_e1(z), special.exp1(z), rtol=1e-11)

    def test_small_z_singularity(self):
        z = 1e-12
        assert specfun.exp_integral_e1(z) / (-EULER - math.log(z)) == pytest.approx(1.0, abs=1e-12)

    def test_large_z_asymptotic(self):
        z = 50.0
        asym = math.exp(-z) / z * sum((-1) ** k * math.factorial(k) / z**k for k in range(6))
        np.testing.assert_allclose(specfun.exp_integral_e1(z), asym, rtol=1e-6)


class TestWhittaker:
    def test_at_one(self):
        oracle = math.exp(0.5) * e1_quad(1.0)
        np.testing.assert_allclose(specfun.whittaker_w_mhalf_zero(1.0), oracle, rtol=1e-9)
        assert specfun.whittaker_w_mhalf_zero(1.0) == pytest.approx(0.3617030, abs=1e-6)

    @pytest.mark.parametrize("z", [0.01, 0.1, 1.0, 10.0])
    def test_identity_against_mpmath(self, z):
        np.testing.assert_allclose(specfun.whittaker_w_mhalf_zero(z), float(mp.whitw(-0.5, 0, z)), rtol=1e-9)

    @pytest.mark.parametrize("z", [0.1, 1.0, 10.0])
    def test_identity_both_sides(self, z):
        rhs = math.exp(z / 2) * math.sqrt(z) * e1_quad(z)
        np.testing.assert_allclose(specfun.whittaker_w_mhalf_zero(z), rhs, rtol=1e-9)

    def test_decay(self):
        assert specfun.whittaker_w_mhalf_zero(100.0) < 1e-12


class TestLogGamma:
    def test_examples(self):
        assert specfun.log_gamma(1.0) == 0.0
        np.testing.assert_allclose(specfun.log_gamma(3.5), math.log(2.5 * 1.5 * 0.5 * math.sqrt(math.pi)),
                                   rtol=1e-14)

    @pytest.mark.parametrize("n", range(1, 21))
    def test_factorials(self, n):
        np.testing.assert_allclose(specfun.log_gamma(n + 1.0), math.log(math.factorial(n)), rtol=1e-13, atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_recurrence(self, x):
        lhs = specfun.log_gamma(x + 1.0)
        rhs = specfun.log_gamma(x) + math.log(x)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_domain(self):
        with pytest.raises(ValueError):
            specfun.log_gamma(0.0)


class TestHypergeometric:
    def test_zero_argument(self):
        assert specfun.gauss_2f1_negz(4, -0.7, 0.3, 0.0) == 1.0

    def test_quarter_pi_identity(self):
        np.testing.assert_allclose(specfun.gauss_2f1_negz(1, -0.5, 0.5, -1.0), 1 + math.pi / 4, rtol=1e-9)

    def test_regression_constant(self):
        np.testing.assert_allclose(specfun.gauss_2f1_negz(4, -2 / 2.8, 1 - 2 / 2.8, -100.0), F21_AT_MINUS_100,
                                   rtol=1e-9)

    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("alpha", [2.2, 2.8, 3.5, 4.0])
    def test_against_mpmath_wide_range(self, m, alpha):
        b, c = -2 / alpha, 1 - 2 / alpha
        z = -np.logspace(-6, 12, 25)
        ref = np.array([float(mp.hyp2f1(m, b, c, zi)) for zi in z])
        np.testing.assert_allclose(specfun.gauss_2f1_negz(m, b, c, z), ref, rtol=1e-9)

    def test_pfaff_vs_direct_series(self):
        z = np.linspace(-0.5, 0.0, 41)
        for a, b, c in [(4, -2 / 2.8, 1 - 2 / 2.8), (1, -0.5, 0.5), (2.5, 1.3, 3.1)]:
            np.testing.assert_allclose(specfun.gauss_2f1_negz(a, b, c, z), specfun.gauss_2f1_series(a, b, c, z),
                                       rtol=1e-9)

    def test_error_estimate_variant(self):
        res = specfun.gauss_2f1_negz(4, -2 / 2.8, 1 - 2 / 2.8, -1e6, return_error=True)
        assert isinstance(res, specfun.SpecFunResult)
        assert np.isfinite(res.est_abs_error) and res.est_abs_error >= 0
        assert abs(res.value - float(mp.hyp2f1(4, -2 / 2.8, 1 - 2 / 2.8, -1e6))) <= max(res.est_abs_error, 1e-9 * abs(res.value))

    @pytest.mark.parametrize("c", [0.0, -1.0, -3.0])
    def test_rejects_nonpositive_integer_c(self, c):
        with pytest.raises(ValueError):
            specfun.gauss_2f1_negz(1.0, 0.5, c, -0.5)

    def test_rejects_positive_z(self):
        with pytest.raises(ValueError):
            specfun.gauss_2f1_negz(1.0, 0.5, 1.5, 0.1)
