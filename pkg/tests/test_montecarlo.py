import math

import numpy as np
import pytest

from riseval import kernels
from riseval.association import assoc_prob_los
from riseval.channel import LinkKind
from riseval.config import SystemParams
from riseval.coverage import (PathLossCase, RisGeometry, ThresholdSet, conditional_coverage, laplace_los,
                              sinr_coverage)
from riseval.montecarlo import (AssocProb, ConditionalAt, EmptyEstimateError, LaplaceAt, MCConfig, Scheme,
                                SinrCoverage, _chunk_rng, _draw_chunk, _load_cdf, associate, covered,
                                distance_samples, estimate, evaluate_sinr, sample_realization, simulate,
                                sinr_coverage_from)

P = SystemParams()


def db(x):
    return 10 ** (x / 10)


class TestConfig:
    def test_default_radius(self):
        assert MCConfig().radius(P) == pytest.approx(1414.0)

    def test_radius_floor_enforced(self):
        with pytest.raises(ValueError):
            MCConfig(region_radius=500.0).radius(P)

    def test_empty(self):
        with pytest.raises(EmptyEstimateError):
            estimate(MCConfig(n_realizations=0), P, AssocProb())
        with pytest.raises(EmptyEstimateError):
            simulate(MCConfig(n_realizations=0), P)


class TestSampling:
    def test_poisson_count(self):
        d = _draw_chunk(_chunk_rng(1, 0), 20000, P, 5000.0, False, _load_cdf(P))
        expected = 1e-5 * math.pi * 5000.0**2
        assert expected == pytest.approx(785.398, abs=1e-3)
        assert abs(d["counts"].mean() - expected) < 4 * math.sqrt(expected / 20000)

    def test_los_fraction_at_blockage_length(self):
        d = _draw_chunk(_chunk_rng(2, 0), 20000, P, 1414.0, False, _load_cdf(P))
        r = np.hypot(d["bs_x"], d["bs_y"])
        band = (r > 136.0) & (r < 147.0)
        frac = d["los"][band].mean()
        assert abs(frac - math.exp(-1)) < 4 * math.sqrt(0.25 / band.sum())

    def test_seed_determinism(self):
        cfg = MCConfig(n_realizations=3000, seed=9, chunk_size=1000)
        a, b = simulate(cfg, P), simulate(cfg, P)
        np.testing.assert_array_equal(a.signal, b.signal)
        np.testing.assert_array_equal(a.interference, b.interference)
        c = simulate(cfg.replace(seed=10), P)
        assert not np.array_equal(a.signal, c.signal)

    def test_prefix_stability(self):
        a = simulate(MCConfig(n_realizations=2500, chunk_size=1000), P)
        b = simulate(MCConfig(n_realizations=1200, chunk_size=1000), P)
        np.testing.assert_array_equal(a.tier[:1200], b.tier)

    def test_backends_agree(self):
        cfg = MCConfig(n_realizations=3000, chunk_size=1500)
        a = simulate(cfg, P, backend="numba")
        b = simulate(cfg, P, backend="numpy")
        np.testing.assert_array_equal(a.tier, b.tier)
        np.testing.assert_allclose(a.interference, b.interference, rtol=1e-12, atol=1e-300)

    def test_distance_samples_consistent(self):
        cfg = MCConfig(n_realizations=2000, chunk_size=1000)
        d = distance_samples(cfg, P)
        assert np.all(d["d_bs"] <= d["d0_los"])
        assert np.all(d["d_br"] > 0) and np.all(d["d_ru"] > 0)


class TestSingleRealization:
    def test_matches_batch(self):
        cfg = MCConfig(n_realizations=300, chunk_size=100, seed=4)
        batch = simulate(cfg, P)
        names = {kernels.TIER_LOS: "los", kernels.TIER_RIS: "ris", kernels.TIER_NONE: "none"}
        for i in (0, 57, 101, 299):
            real = sample_realization(cfg, P, i)
            assert associate(real, P).tier == names[int(batch.tier[i])]
            assert real.load == batch.load[i]

    def test_sinr_outcome(self):
        cfg = MCConfig(n_realizations=100, chunk_size=100, seed=4)
        batch = simulate(cfg, P)
        hit = covered(batch, P, P.tau_t, P.tau_c)
        th = ThresholdSet.from_params(P)
        for i in range(20):
            out = evaluate_sinr(sample_realization(cfg, P, i), P, th)
            assert (out.sic_ok and out.sinr_t > th.tau_t) == bool(hit[i])

    def test_los_serving_index(self):
        cfg = MCConfig(n_realizations=50, chunk_size=50, seed=8)
        for i in range(10):
            real = sample_realization(cfg, P, i)
            choice = associate(real, P)
            if choice.tier == "los":
                r = np.hypot(real.bs_xy[:, 0], real.bs_xy[:, 1])
                assert r[choice.bs_index] == r[real.los].min()


class TestEstimates:
    def test_laplace_zero(self):
        res = estimate(MCConfig(n_realizations=10), P, LaplaceAt(0.0, LinkKind.DIRECT_LOS))
        assert res.estimate == 1.0 and res.stderr == 0.0

    def test_laplace_los(self):
        s = 1e4
        res = estimate(MCConfig(n_realizations=40000), P, LaplaceAt(s, LinkKind.DIRECT_LOS, d_min=50.0))
        ref = laplace_los(s, 50.0, P)
        assert abs(res.estimate - ref) < max(0.02 * ref, 4 * res.stderr)

    def test_assoc_against_analysis(self):
        res = estimate(MCConfig(n_realizations=200000), P.replace(c_l=1e-3), AssocProb())
        ref = assoc_prob_los(P.replace(c_l=1e-3)).a_l
        assert abs(res.estimate - ref) < 4 * res.stderr

    def test_region_doubling(self):
        p = P.replace(c_l=1e-3)
        a = estimate(MCConfig(n_realizations=100000, seed=1), p, AssocProb())
        b = estimate(MCConfig(n_realizations=100000, seed=2, region_radius=2828.0), p, AssocProb())
        assert abs(a.estimate - b.estimate) < 4 * math.hypot(a.stderr, b.stderr)

    def test_conditional_los_defaults(self):
        res = estimate(MCConfig(n_realizations=50000), P, ConditionalAt(LinkKind.DIRECT_LOS, 50.0))
        ref = conditional_coverage(LinkKind.DIRECT_LOS, PathLossCase.SMALL, 50.0, None, P)
        assert abs(res.estimate - ref) < 0.02

    def test_conditional_los_rayleigh_high_snr(self):
        p = P.replace(m_l=1).with_snr_db(20)
        res = estimate(MCConfig(n_realizations=50000), p, ConditionalAt(LinkKind.DIRECT_LOS, 50.0))
        ref = conditional_coverage(LinkKind.DIRECT_LOS, PathLossCase.SMALL, 50.0, None, p)
        assert abs(res.estimate - ref) < 0.02

    def test_conditional_ris_without_exclusion(self):
        p = P.replace(m_l=1, m_r=1)
        th = ThresholdSet(1e-5, 1e-5)
        g = RisGeometry(158.0, 70.0)
        res = estimate(MCConfig(n_realizations=50000), p, ConditionalAt(LinkKind.RIS_REFLECTED, g, th,
                                                                        exclusion=False))
        case = PathLossCase.SMALL if 0.0127 * (158 * 70) ** -2.8 >= 50.0**-2 else PathLossCase.LARGE
        ref = conditional_coverage(LinkKind.RIS_REFLECTED, case, g, th, p)
        assert abs(res.estimate - ref) < 0.02

    @pytest.mark.parametrize("snr_db", [0, 20])
    def test_rayleigh_total_coverage(self, snr_db):
        p = P.replace(m_l=1, m_r=1).with_snr_db(snr_db)
        res = estimate(MCConfig(n_realizations=50000), p, SinrCoverage())
        ref = sinr_coverage(None, p, method="reduced").total
        assert abs(res.estimate - ref) < max(0.01, 4 * res.stderr)

    def test_oma_threshold_rule(self):
        cfg = MCConfig(n_realizations=5000, scheme=Scheme.OMA_RIS)
        s = simulate(cfg, P)
        x = s.signal / (s.interference + 1e-11)
        hit = covered(s, P, 0.5, 100.0)
        np.testing.assert_array_equal(hit, (s.tier != kernels.TIER_NONE) & (x > 0.5))

    def test_schemes_share_geometry(self):
        cfg = MCConfig(n_realizations=4000)
        ris = simulate(cfg, P)
        macro = simulate(cfg.replace(scheme=Scheme.NOMA_MACRO), P)
        np.testing.assert_array_equal(ris.load, macro.load)
        los = ris.tier == kernels.TIER_LOS
        np.testing.assert_array_equal(macro.signal[los], ris.signal[los])

    def test_coverage_from_samples_reuse(self):
        s = simulate(MCConfig(n_realizations=5000), P)
        lo = sinr_coverage_from(s, P, ThresholdSet(db(-10), db(-10))).estimate
        hi = sinr_coverage_from(s, P, ThresholdSet(db(10), db(10))).estimate
        assert lo >= hi
