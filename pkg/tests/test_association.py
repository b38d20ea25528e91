import math

import numpy as np
import pytest
from scipy import integrate

import oracles
from riseval.association import (BranchError, DensityKind, DistanceDensity, assoc_prob_closed_double,
                                 assoc_prob_closed_equal, assoc_prob_los, los_mass_integral, pdf_nearest_los_bs,
                                 pdf_product_distance, phi, phi_inv, prob_los_exists, survival_nearest_los_bs,
                                 survival_product_distance)
from riseval.config import SystemParams, derive

BASE = SystemParams()
BETA = 1 / 141.4
CR = derive(BASE).c_r_mean


def double_params(ratio, c_lr=1.0, lb=1e-5):
    """alpha_L = 2 alpha_R with c_LR fixed through C_L."""
    return SystemParams(alpha_l=5.6, alpha_r=2.8, c_l=CR * c_lr**5.6, lambda_b=lb, lambda_r=ratio * lb)


def equal_params(lr, c_lr=1.0):
    return SystemParams(alpha_l=2.8, alpha_r=2.8, c_l=CR * c_lr**2.8, lambda_r=lr)


class TestLosExists:
    def test_default(self):
        expected = 1 - math.exp(-2 * math.pi * 1e-5 * 141.4**2)
        np.testing.assert_allclose(prob_los_exists(BASE), expected, rtol=1e-14)
        assert prob_los_exists(BASE) == pytest.approx(0.7152824, abs=1e-7)

    def test_limits(self):
        assert prob_los_exists(BASE.replace(beta_blockage=1e3)) < 1e-10
        assert prob_los_exists(BASE.replace(lambda_b=1.0)) == 1.0


class TestNearestLos:
    def test_mass_is_p_l(self):
        val, _ = integrate.quad(lambda x: pdf_nearest_los_bs(x, BASE), 0, np.inf, epsrel=1e-11, limit=200)
        np.testing.assert_allclose(val, prob_los_exists(BASE), rtol=1e-9)

    def test_zero_at_origin(self):
        assert pdf_nearest_los_bs(0.0, BASE) == 0.0

    def test_no_blockage_is_rayleigh(self):
        x = np.linspace(1, 800, 50)
        ray = 2 * math.pi * BASE.lambda_b * x * np.exp(-math.pi * BASE.lambda_b * x * x)
        np.testing.assert_allclose(pdf_nearest_los_bs(x, BASE, los_always=True), ray, rtol=1e-13)

    def test_closed_inner_integral(self):
        for x in [1e-3, 0.5, 30.0, 500.0, 5000.0]:
            ref, _ = integrate.quad(lambda r: r * math.exp(-BETA * r), 0, x, epsabs=0, epsrel=1e-13)
            np.testing.assert_allclose(los_mass_integral(x, BETA), ref, rtol=1e-12)

    def test_survival_oracle(self):
        for x in [10.0, 100.0, 1000.0]:
            np.testing.assert_allclose(survival_nearest_los_bs(x, BASE), oracles.nearest_los_survival(x, 1e-5, BETA),
                                       rtol=1e-12)


class TestProductDistance:
    def test_mass(self):
        d = DistanceDensity(DensityKind.PRODUCT_BS_RIS_UE, BASE)
        a = 2 * math.pi * math.sqrt(BASE.lambda_b * BASE.lambda_r)
        val, _ = integrate.quad(d.pdf, 0, 800 / a, epsrel=1e-11, limit=400, points=[0.1 / a, 1 / a, 10 / a])
        np.testing.assert_allclose(val, 1.0, rtol=1e-9)

    def test_against_scipy_density(self):
        z = np.logspace(1, 6, 40)
        np.testing.assert_allclose(pdf_product_distance(z, BASE), oracles.product_pdf(z, 1e-5, 5e-5), rtol=1e-10)

    @pytest.mark.parametrize("z", [10.0, 1e3, 3e4, 2e5])
    def test_closed_survival_matches_quadrature(self, z):
        np.testing.assert_allclose(survival_product_distance(z, BASE), oracles.product_survival_quad(z, 1e-5, 5e-5),
                                   rtol=1e-8)

    def test_survival_at_zero(self):
        assert survival_product_distance(0.0, BASE) == 1.0

    def test_superlinear_blowup_near_zero(self):
        z = np.array([1e-2, 1e-4, 1e-6])
        ratio = pdf_product_distance(z, BASE) / z
        assert np.all(np.diff(ratio) > 0)

    def test_masses(self):
        assert DistanceDensity(DensityKind.NEAREST_LOS_BS, BASE).mass() == pytest.approx(0.7152824, abs=1e-7)
        assert DistanceDensity(DensityKind.NEAREST_RIS, BASE).mass() == 1.0

    def test_phi_round_trip(self):
        x = np.logspace(0, 8, 30)
        np.testing.assert_allclose(phi_inv(phi(x, BASE), BASE), x, rtol=1e-12)


class TestGeneralIntegral:
    def test_defaults_frozen(self):
        rep = assoc_prob_los(BASE)
        # frozen from the scipy oracle
        np.testing.assert_allclose(rep.a_l, 0.715276853806882, rtol=1e-10)
        ref = oracles.assoc_los(1e-5, 5e-5, BETA, 1.0, CR, 2.0, 2.8)
        np.testing.assert_allclose(rep.a_l, ref, rtol=1e-9)

    def test_report_invariants(self):
        rep = assoc_prob_los(BASE)
        assert rep.a_l + rep.a_r == 1.0
        assert rep.a_l < rep.upper_bound_pl
        assert rep.a_r > rep.lower_bound_pn

    @pytest.mark.parametrize("lb_km, lr_km", [(5, 50), (20, 400), (10, 200), (1, 1000)])
    def test_against_oracle_grid(self, lb_km, lr_km):
        p = BASE.replace(lambda_b=lb_km * 1e-6, lambda_r=lr_km * 1e-6, c_l=1e-3)
        ref = oracles.assoc_los(p.lambda_b, p.lambda_r, BETA, p.c_l, CR, 2.0, 2.8)
        np.testing.assert_allclose(assoc_prob_los(p).a_l, ref, atol=1e-9)

    def test_many_ris_drives_to_zero(self):
        p = BASE.replace(c_l=CR, alpha_l=2.8)
        a = [assoc_prob_los(p.replace(lambda_r=lr)).a_l for lr in [1e-2, 1.0, 1e2, 1e4]]
        assert np.all(np.diff(a) < 0)
        assert a[-1] < 1e-4

    def test_monotone_in_lambda_r_and_length(self):
        p = BASE.replace(c_l=1e-3)
        a = [assoc_prob_los(p.replace(lambda_r=lr)).a_l for lr in np.logspace(-6, -3, 8)]
        assert np.all(np.diff(a) <= 0)
        b = [assoc_prob_los(p.replace(ris_half_length_l=L)).a_l for L in [0.5, 1, 2, 5, 10]]
        assert np.all(np.diff(b) <= 0)

    def test_bounds_over_grid(self):
        # strictness is checked where the RIS tier is above double rounding of P_L
        rng = np.random.default_rng(11)
        for _ in range(15):
            p = BASE.replace(lambda_b=10 ** rng.uniform(-5.5, -4), lambda_r=10 ** rng.uniform(-6, -3),
                             c_l=10 ** rng.uniform(-5, -2))
            rep = assoc_prob_los(p)
            pn = math.exp(-2 * math.pi * p.lambda_b / p.beta_blockage**2)
            assert rep.a_l < prob_los_exists(p)
            assert rep.a_r > pn

    def test_weak_bound_everywhere(self):
        for lb in [1e-7, 1e-6, 1e-5]:
            rep = assoc_prob_los(BASE.replace(lambda_b=lb, c_l=1.0))
            assert rep.a_l <= rep.upper_bound_pl and rep.a_r >= rep.lower_bound_pn


class TestClosedForms:
    def test_double_example(self):
        expected = 1 - (0.4 / 0.6) * ((1 / math.sqrt(0.6)) * math.log(1 / (2 * math.sqrt(0.1)) + math.sqrt(1 / 0.4 - 1)) - 1)
        np.testing.assert_allclose(assoc_prob_closed_double(double_params(0.1)), expected, rtol=1e-13)
        assert expected == pytest.approx(0.7787047329, abs=1e-10)

    @pytest.mark.parametrize("ratio", np.linspace(0.01, 0.24, 10))
    def test_double_matches_integral(self, ratio):
        p = double_params(ratio)
        assert abs(assoc_prob_closed_double(p) - assoc_prob_los(p, los_always=True).a_l) < 1e-6

    def test_double_matches_oracle(self):
        p = double_params(0.1)
        ref = oracles.assoc_los(p.lambda_b, p.lambda_r, BETA, p.c_l, CR, 5.6, 2.8, los_always=True)
        np.testing.assert_allclose(assoc_prob_closed_double(p), ref, atol=1e-9)

    def test_double_small_ratio(self):
        assert assoc_prob_closed_double(double_params(1e-9)) > 1 - 1e-6

    def test_double_branch_error(self):
        with pytest.raises(BranchError):
            assoc_prob_closed_double(double_params(0.3))

    def test_double_scale_invariance(self):
        a = assoc_prob_closed_double(double_params(0.1, lb=1e-5))
        b = assoc_prob_closed_double(double_params(0.1, lb=2e-5))
        assert a == pytest.approx(b, rel=1e-14)

    def test_equal_example(self):
        p = equal_params(1e-5)
        assert abs(assoc_prob_closed_equal(p) - assoc_prob_los(p, los_always=True).a_l) < 1e-6
        np.testing.assert_allclose(assoc_prob_closed_equal(p), 0.99969239664, atol=1e-10)

    @pytest.mark.parametrize("lr", np.logspace(-7, -2, 10))
    def test_equal_matches_integral(self, lr):
        p = equal_params(lr)
        assert abs(assoc_prob_closed_equal(p) - assoc_prob_los(p, los_always=True).a_l) < 1e-6

    def test_equal_limits_and_monotone(self):
        assert assoc_prob_closed_equal(equal_params(1e-14)) > 1 - 1e-6
        assert assoc_prob_closed_equal(equal_params(1e-3, 2.0)) > assoc_prob_closed_equal(equal_params(1e-3, 1.0))

    def test_wrong_exponents_rejected(self):
        with pytest.raises(ValueError):
            assoc_prob_closed_double(BASE)
        with pytest.raises(ValueError):
            assoc_prob_closed_equal(BASE)
