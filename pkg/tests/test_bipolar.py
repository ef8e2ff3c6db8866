import itertools
import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from fsa_aoi.utils import bipolar
from fsa_aoi.utils.models import BipolarConfig, InfiniteAoI, ProtocolParams, is_infinite


def interference_free_mean(p):
    f, eta = p.frame_size, p.eta
    return f / eta + (f * f - 1) * eta / (12.0 * f) + (1 - f) / 2.0


class TestContention:

    def test_contention_formula(self, fig4_bipolar):
        delta = fig4_bipolar.delta
        expected = 1e-2 * math.pi * 100.0 * math.pi * delta / math.sin(math.pi * delta)
        assert bipolar.contention(fig4_bipolar).c == pytest.approx(expected, rel=1e-12)

    def test_no_interferers(self, empty_bipolar):
        assert bipolar.contention(empty_bipolar).c == 0.0

    def test_single_interferer_at_link_distance(self, fig4_bipolar):
        p = ProtocolParams(0.6, 2)
        mu = bipolar.cond_success_prob_bipolar([10.0], p, fig4_bipolar)
        assert mu.mu == pytest.approx(1 - p.beta / 2)

    def test_no_interferer_distances(self, fig4_bipolar, fsa_protocol):
        assert bipolar.cond_success_prob_bipolar([], fsa_protocol, fig4_bipolar).mu == 1.0

    def test_rejects_zero_distance(self, fig4_bipolar, fsa_protocol):
        with pytest.raises(ValueError):
            bipolar.cond_success_prob_bipolar([0.0, 5.0], fsa_protocol, fig4_bipolar)

    @pytest.mark.parametrize("field, values", [
        ("lam", [1e-3, 5e-3, 1e-2, 2e-2]),
        ("theta", [0.5, 1.0, 2.0, 10.0]),
        ("r", [5.0, 10.0, 15.0, 20.0]),
    ])
    def test_mean_mu_decreases_with_topology(self, fig4_bipolar, fsa_protocol, field, values):
        mus = [bipolar.mean_mu(replace(fig4_bipolar, **{field: v}), fsa_protocol) for v in values]
        assert all(b < a for a, b in zip(mus, mus[1:]))

    def test_mean_mu_decreases_with_activity(self, fig4_bipolar):
        mus = [bipolar.mean_mu(fig4_bipolar, ProtocolParams(eta, 1)) for eta in (0.1, 0.3, 0.5, 0.8, 1.0)]
        assert all(b < a for a, b in zip(mus, mus[1:]))

    def test_mean_mu_below_mean_inv_mu(self, fig4_bipolar, fsa_protocol):
        assert bipolar.mean_mu(fig4_bipolar, fsa_protocol) * bipolar.mean_inv_mu(fig4_bipolar, fsa_protocol) >= 1.0


class TestAverageAoI:

    @pytest.mark.parametrize("eta, frame", [(0.5, 1), (0.8, 3), (1.0, 5)])
    def test_interference_free(self, empty_bipolar, eta, frame):
        p = ProtocolParams(eta, frame)
        assert bipolar.avg_aoi_bipolar(empty_bipolar, p) == pytest.approx(interference_free_mean(p))

    def test_every_slot_every_frame(self, fig4_bipolar, empty_bipolar):
        p = ProtocolParams(1.0, 1)
        assert isinstance(bipolar.avg_aoi_bipolar(fig4_bipolar, p), InfiniteAoI)
        assert bipolar.avg_aoi_bipolar(empty_bipolar, p) == pytest.approx(1.0)

    @pytest.mark.parametrize("eta", [0.2, 0.6, 1.0])
    @pytest.mark.parametrize("frame", [2, 3, 7])
    def test_decomposes_into_sa_plus_q1(self, fig4_bipolar, eta, frame):
        p = ProtocolParams(eta, frame)
        fsa = bipolar.avg_aoi_bipolar(fig4_bipolar, p)
        sa = bipolar.avg_aoi_sa(fig4_bipolar, p.beta)
        assert fsa == pytest.approx(sa + bipolar.q1(fig4_bipolar, p), rel=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 1e-3, 1e-2])
    @pytest.mark.parametrize("frame", [1, 2, 4, 9])
    @pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
    def test_lower_bound(self, lam, frame, eta):
        cfg = BipolarConfig(lam, 10.0, 3.5, 1.0)
        value = bipolar.avg_aoi_bipolar(cfg, ProtocolParams(eta, frame))
        assert is_infinite(value) or value >= bipolar.aoi_lower_bound(frame) - 1e-12

    def test_lower_bound_at_sa(self):
        assert bipolar.aoi_lower_bound(1) == 0.0

    def test_lower_bound_over_parameter_grid(self):
        grid = itertools.product(
            [0.0, 1e-4, 1e-3, 1e-2, 3e-2],       # lam
            [5.0, 10.0, 15.0, 20.0],             # r
            [2.5, 3.0, 3.5, 5.0],                # alpha
            [0.5, 1.0, 2.0, 10.0],               # theta
            [0.05, 0.1, 0.3, 0.5, 0.8, 1.0],     # eta
            [1, 2, 3, 5, 9, 20],                 # F
        )
        checked = 0
        for lam, r, alpha, theta, eta, frame in grid:
            value = bipolar.avg_aoi_bipolar(BipolarConfig(lam, r, alpha, theta), ProtocolParams(eta, frame))
            assert is_infinite(value) or value >= bipolar.aoi_lower_bound(frame) - 1e-9
            checked += 1
        assert checked >= 10_000

    def test_sa_has_interior_optimal_rate(self, fig4_bipolar):
        etas = np.arange(0.05, 0.951, 0.05)
        values = [float(bipolar.avg_aoi_sa(fig4_bipolar, eta)) for eta in etas]
        best = int(np.argmin(values))
        assert 0 < best < len(etas) - 1

    def test_large_frame_decreases_in_rate(self, fig4_bipolar):
        etas = np.arange(0.1, 0.801, 0.05)
        values = [bipolar.avg_aoi_bipolar(fig4_bipolar, ProtocolParams(eta, 7)) for eta in etas]
        assert all(b <= a for a, b in zip(values, values[1:]))
        assert values[0] > bipolar.avg_aoi_bipolar(fig4_bipolar, ProtocolParams(1.0, 7))


class TestSecondMoment:

    @pytest.mark.parametrize("beta", [0.1, 0.3, 0.5, 0.8])
    def test_series_matches_closed_form(self, fig4_bipolar, beta):
        p = ProtocolParams(beta, 1)
        assert bipolar.mean_inv_mu_sq(fig4_bipolar, p) == pytest.approx(
            bipolar.mean_inv_mu_sq_closed(fig4_bipolar, p), rel=1e-9)

    def test_interference_free_variance(self, empty_bipolar):
        assert bipolar.var_aoi_bipolar(empty_bipolar, ProtocolParams(0.5, 1)) == pytest.approx(2.0)

    @pytest.mark.parametrize("eta", [0.3, 0.9])
    @pytest.mark.parametrize("frame", [2, 4])
    def test_decomposes_into_sa_plus_q2(self, fig4_bipolar, eta, frame):
        p = ProtocolParams(eta, frame)
        var = bipolar.var_aoi_bipolar(fig4_bipolar, p)
        sa = bipolar.var_aoi_sa(fig4_bipolar, p.beta)
        assert var == pytest.approx(sa + bipolar.q2_bipolar(fig4_bipolar, p), rel=1e-9)

    def test_variance_boundary(self, fig4_bipolar):
        assert isinstance(bipolar.var_aoi_bipolar(fig4_bipolar, ProtocolParams(1.0, 1)), InfiniteAoI)

    @pytest.mark.parametrize("frame", [1, 2, 5])
    def test_assembly_gap(self, fig4_bipolar, frame, caplog):
        p = ProtocolParams(0.7, frame)
        with caplog.at_level(logging.WARNING, logger="fsa_aoi.utils.bipolar"):
            gap = bipolar.variance_assembly_gap(fig4_bipolar, p)
        assert gap == pytest.approx((frame - 1) / 2.0, abs=1e-8)
        assert ("disagree" in caplog.text) == (frame > 1)


class TestConversions:

    def test_scheme_a(self):
        p = bipolar.conversion_scheme_a(0.25)
        assert (p.eta, p.frame_size) == (0.5, 2)

    def test_scheme_a_range(self):
        with pytest.raises(ValueError):
            bipolar.conversion_scheme_a(0.6)

    def test_scheme_b(self):
        p = bipolar.conversion_scheme_b(0.25)
        assert (p.eta, p.frame_size) == (1.0, 4)

    def test_scheme_b_needs_integer_reciprocal(self):
        with pytest.raises(ValueError):
            bipolar.conversion_scheme_b(0.3)

    def test_scheme_a_always_gains(self):
        rng = np.random.default_rng(7)
        for lam, eta_sa in zip(rng.uniform(0, 0.05, 200), rng.uniform(0.01, 0.5, 200)):
            cfg = BipolarConfig(float(lam), 10.0, 3.5, 1.0)
            assert bipolar.q1(cfg, bipolar.conversion_scheme_a(float(eta_sa))) < 0

    @pytest.mark.parametrize("frame", range(2, 21))
    def test_scheme_b_always_gains(self, fig4_bipolar, frame):
        p = bipolar.conversion_scheme_b(1.0 / frame)
        assert bipolar.q1(fig4_bipolar, p) < 0


class TestOptimalFrame:

    @pytest.mark.parametrize("lam, r", [
        (0.02, 10.0), (0.02, 15.0), (0.01, 10.0), (0.01, 15.0), (0.005, 10.0), (5e-5, 10.0),
    ])
    def test_matches_exhaustive_search(self, lam, r):
        cfg = BipolarConfig(lam, r, 3.5, 1.0)
        values = {f: bipolar.avg_aoi_bipolar(cfg, ProtocolParams(0.8, f)) for f in range(1, 101)}
        exhaustive = min(values, key=lambda f: (float(values[f]), f))
        assert bipolar.optimal_frame(cfg, 0.8) == exhaustive

    def test_sparse_network_prefers_sa(self):
        assert bipolar.optimal_frame(BipolarConfig(5e-5, 10.0, 3.5, 1.0), 0.8) == 1

    def test_y_rejects_small_frames(self, fig4_bipolar):
        with pytest.raises(ValueError):
            bipolar.y_of_f(fig4_bipolar, 0.8, 0.5)

    def test_y_diverges_at_full_load(self, fig4_bipolar):
        assert bipolar.y_of_f(fig4_bipolar, 1.0, 1.0) == -math.inf

    @pytest.mark.parametrize("lam, r", [(0.02, 10.0), (0.02, 15.0), (0.01, 10.0), (0.01, 15.0)])
    def test_y_is_non_decreasing(self, lam, r):
        cfg = BipolarConfig(lam, r, 3.5, 1.0)
        ys = [bipolar.y_of_f(cfg, 0.8, f) for f in np.arange(1.0, 50.001, 0.25)]
        assert all(b >= a - 1e-9 * abs(a) for a, b in zip(ys, ys[1:]))


class TestThroughputAndPower:

    def test_interference_free_throughput(self, empty_bipolar):
        p = ProtocolParams(0.6, 3)
        assert bipolar.spatial_throughput(empty_bipolar, p) == pytest.approx(0.2 * math.log(2.0))

    def test_throughput_peaks_at_inverse_contention(self, fig4_bipolar):
        c = bipolar.contention(fig4_bipolar).c
        peak = bipolar.spatial_throughput(fig4_bipolar, ProtocolParams(1.0 / c, 1))
        for beta in (1.0 / c - 0.02, 1.0 / c + 0.02):
            assert bipolar.spatial_throughput(fig4_bipolar, ProtocolParams(beta, 1)) < peak

    def test_sparse_throughput_peaks_at_full_activity(self):
        cfg = BipolarConfig(1e-4, 10.0, 3.5, 1.0)
        assert bipolar.contention(cfg).c < 1.0
        etas = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
        values = [bipolar.spatial_throughput(cfg, ProtocolParams(eta, 1)) for eta in etas]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_tx_power(self):
        assert bipolar.tx_power(ProtocolParams(0.6, 3), 2.0) == pytest.approx(0.4)
