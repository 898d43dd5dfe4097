"""Channel/delay modeling and the minimum-bandwidth closed form, checked
against a bisection oracle on the rate equation and against mpmath."""

import math

import mpmath
import numpy as np
import pytest

from fedteddi.wireless import (
    ChannelRealization,
    ComputeProfile,
    InfeasibleClientError,
    LinkBudget,
    RadioProfile,
    compute_delay_cdf,
    dbm_to_watts,
    lambert_w,
    min_bandwidth,
    path_gain,
    path_loss_db,
    round_delay,
    sample_compute_delay,
    shannon_rate,
)

from .oracles import bisect_min_bandwidth, ks_statistic


class TestPathGain:
    def test_one_km_reference(self):
        profile = RadioProfile(distance_km=1.0, shadow_sigma_db=0.0)
        assert path_loss_db(1.0) == pytest.approx(128.1)
        assert path_gain(profile, 0).gain == pytest.approx(10 ** (-12.81))

    def test_hundred_meters(self):
        assert path_loss_db(0.1) == pytest.approx(128.1 - 37.6)

    def test_deterministic_per_seed(self):
        profile = RadioProfile(distance_km=0.2, shadow_sigma_db=8.0)
        assert path_gain(profile, 42).gain == path_gain(profile, 42).gain
        assert path_gain(profile, 42).gain != path_gain(profile, 43).gain

    def test_shadowing_spread_matches_sigma(self):
        profile = RadioProfile(distance_km=0.2, shadow_sigma_db=8.0)
        gains_db = np.array(
            [-10 * math.log10(path_gain(profile, s).gain) for s in range(4000)]
        )
        assert gains_db.std() == pytest.approx(8.0, rel=0.05)


class TestComputeDelay:
    PROFILE = ComputeProfile(min_time_per_sample_s=0.5e-3, rate_samples_per_s=2000.0)

    def test_support_lower_edge(self):
        # a*tau*b is a hard minimum
        for seed in range(200):
            d = sample_compute_delay(self.PROFILE, 1, 32, seed)
            assert d >= 0.5e-3 * 32

    def test_mean_matches_shift_plus_tail(self):
        draws = sample_compute_delay(self.PROFILE, 1, 32, 7, size=100_000)
        # shift 16 ms plus mean tail tau*b/mu = 16 ms
        assert draws.mean() == pytest.approx(0.032, rel=0.01)

    def test_ks_against_closed_form_cdf(self):
        draws = sample_compute_delay(self.PROFILE, 2, 16, 11, size=100_000)
        stat = ks_statistic(draws, lambda t: compute_delay_cdf(self.PROFILE, 2, 16, t))
        assert stat < 0.01

    def test_vector_head_matches_scalar(self):
        one = sample_compute_delay(self.PROFILE, 3, 8, 99)
        vec = sample_compute_delay(self.PROFILE, 3, 8, 99, size=5)
        assert one == vec[0]


class TestShannonRate:
    def test_unit_snr_gives_rate_equal_bandwidth(self):
        # choose gain so P*gain/(B*N0) = 1  ->  log2(2) = 1
        b = 1e6
        profile = RadioProfile(tx_power_dbm=23.0, noise_psd_dbm_hz=-174.0)
        gain = b * dbm_to_watts(-174.0) / dbm_to_watts(23.0)
        assert shannon_rate(b, profile, ChannelRealization(gain)) == pytest.approx(b)

    def test_strictly_concave_in_bandwidth(self):
        rng = np.random.default_rng(5)
        profile = RadioProfile()
        for _ in range(100):
            gain = 10 ** rng.uniform(-13, -8)
            b = 10 ** rng.uniform(4, 7)
            r1 = shannon_rate(b, profile, ChannelRealization(gain))
            r2 = shannon_rate(2 * b, profile, ChannelRealization(gain))
            assert r1 < r2 < 2 * r1

    def test_against_high_precision_oracle(self):
        b, gain = 1e6, 1e-12
        profile = RadioProfile(tx_power_dbm=23.0, noise_psd_dbm_hz=-174.0)
        got = shannon_rate(b, profile, ChannelRealization(gain))
        with mpmath.workdps(50):
            p = mpmath.mpf(10) ** (mpmath.mpf("23") / 10) * mpmath.mpf("1e-3")
            n0 = mpmath.mpf(10) ** (mpmath.mpf("-174") / 10) * mpmath.mpf("1e-3")
            snr = p * mpmath.mpf(gain) / (mpmath.mpf(b) * n0)
            expected = mpmath.mpf(b) * mpmath.log(1 + snr) / mpmath.log(2)
            assert abs(got - float(expected)) / float(expected) < 1e-9


class TestLambertW:
    def test_identity_on_both_branches(self):
        for z in [-1 / math.e + 1e-12, -0.3, -0.1, -1e-6, 0.5, 3.0, 1e4]:
            w = lambert_w(z, branch=0)
            assert w * math.exp(w) == pytest.approx(z, rel=1e-10, abs=1e-12)
        for z in [-1 / math.e + 1e-12, -0.35, -0.2, -0.05, -1e-4]:
            w = lambert_w(z, branch=-1)
            assert w * math.exp(w) == pytest.approx(z, rel=1e-10)

    def test_against_mpmath(self):
        zs = np.concatenate([
            -np.logspace(-6, np.log10(1 / math.e - 1e-9), 40),
            np.logspace(-6, 3, 20),
        ])
        for z in zs:
            got = lambert_w(float(z), branch=0)
            ref = float(mpmath.lambertw(float(z), 0).real)
            assert got == pytest.approx(ref, rel=1e-10, abs=1e-12)
        for z in -np.logspace(-6, np.log10(1 / math.e - 1e-9), 40):
            got = lambert_w(float(z), branch=-1)
            ref = float(mpmath.lambertw(float(z), -1).real)
            assert got == pytest.approx(ref, rel=1e-10)

    def test_branch_point(self):
        assert lambert_w(-1 / math.e, 0) == -1.0
        assert lambert_w(-1 / math.e, -1) == -1.0

    def test_out_of_domain(self):
        with pytest.raises(ValueError):
            lambert_w(-1.0, 0)
        with pytest.raises(ValueError):
            lambert_w(0.5, -1)


def random_link(rng):
    profile = RadioProfile(
        tx_power_dbm=float(rng.uniform(10, 30)),
        distance_km=float(rng.uniform(0.02, 0.25)),
        shadow_sigma_db=0.0,
    )
    channel = ChannelRealization(gain=10 ** float(rng.uniform(-13, -8)))
    budget = LinkBudget(
        model_bits=float(rng.uniform(1e5, 5e7)),
        deadline_s=float(rng.uniform(0.2, 2.0)),
        total_bandwidth_hz=20e6,
    )
    remaining = float(rng.uniform(0.05, budget.deadline_s))
    return profile, channel, budget, remaining


class TestMinBandwidth:
    def test_self_consistency(self):
        rng = np.random.default_rng(21)
        checked = 0
        while checked < 200:
            profile, channel, budget, remaining = random_link(rng)
            b = min_bandwidth(remaining, profile, channel, budget)
            if not math.isfinite(b):
                continue
            upload = budget.model_bits / shannon_rate(b, profile, channel)
            assert upload == pytest.approx(remaining, rel=1e-6)
            assert upload <= remaining
            checked += 1

    def test_matches_bisection_oracle(self):
        rng = np.random.default_rng(33)
        agree = 0
        while agree < 300:
            profile, channel, budget, remaining = random_link(rng)
            closed = min_bandwidth(remaining, profile, channel, budget)
            oracle = bisect_min_bandwidth(
                remaining, profile, channel, budget, hi=10 * budget.total_bandwidth_hz
            )
            if math.isinf(oracle):
                # infeasible within the bracket; closed form must be larger or inf
                assert closed > 10 * budget.total_bandwidth_hz or math.isinf(closed)
            else:
                assert closed == pytest.approx(oracle, rel=1e-6)
            agree += 1

    def test_monotone_in_remaining_time(self):
        rng = np.random.default_rng(55)
        profile, channel, budget, remaining = random_link(rng)
        b_full = min_bandwidth(remaining, profile, channel, budget)
        b_half = min_bandwidth(remaining / 2, profile, channel, budget)
        assert b_half > b_full

    def test_past_deadline_rejected(self):
        profile = RadioProfile()
        with pytest.raises(InfeasibleClientError):
            min_bandwidth(0.0, profile, ChannelRealization(1e-10), LinkBudget(1e6, 1.0, 20e6))
        with pytest.raises(InfeasibleClientError):
            min_bandwidth(-0.2, profile, ChannelRealization(1e-10), LinkBudget(1e6, 1.0, 20e6))

    def test_saturated_channel_is_infeasible(self):
        # Required rate above the infinite-bandwidth limit P|H|^2/(N0 ln 2)
        profile = RadioProfile(tx_power_dbm=0.0)
        channel = ChannelRealization(1e-14)
        budget = LinkBudget(model_bits=1e9, deadline_s=1.0, total_bandwidth_hz=20e6)
        assert math.isinf(min_bandwidth(0.5, profile, channel, budget))


class TestRoundDelay:
    BUDGET = LinkBudget(model_bits=1e6, deadline_s=1.0, total_bandwidth_hz=20e6)

    def _maps(self, totals):
        profiles, channels, delays, bws = {}, {}, {}, {}
        for cid, t_cp in enumerate(totals):
            profiles[cid] = RadioProfile(distance_km=0.1, shadow_sigma_db=0.0)
            channels[cid] = ChannelRealization(1e-10)
            delays[cid] = t_cp
            bws[cid] = 1e6
        return delays, bws, profiles, channels

    def test_single_client(self):
        delays, bws, profiles, channels = self._maps([0.3])
        expected = 0.3 + self.BUDGET.model_bits / shannon_rate(1e6, profiles[0], channels[0])
        got = round_delay([0], delays, bws, profiles, channels, self.BUDGET)
        assert got == pytest.approx(expected)

    def test_max_over_clients(self):
        delays, bws, profiles, channels = self._maps([0.3, 0.9, 0.7])
        got = round_delay([0, 1, 2], delays, bws, profiles, channels, self.BUDGET)
        upload = self.BUDGET.model_bits / shannon_rate(1e6, profiles[0], channels[0])
        assert got == pytest.approx(0.9 + upload)

    def test_min_bandwidth_meets_deadline_exactly(self):
        rng = np.random.default_rng(77)
        profiles, channels, delays, bws = {}, {}, {}, {}
        budget = LinkBudget(model_bits=5e6, deadline_s=1.0, total_bandwidth_hz=1e9)
        for cid in range(5):
            profile, channel, _, _ = random_link(rng)
            t_cp = float(rng.uniform(0.1, 0.5))
            b = min_bandwidth(budget.deadline_s - t_cp, profile, channel, budget)
            if not math.isfinite(b):
                continue
            profiles[cid], channels[cid] = profile, channel
            delays[cid], bws[cid] = t_cp, b
        assert profiles, "fixture needs at least one feasible client"
        got = round_delay(list(profiles), delays, bws, profiles, channels, budget)
        assert got == pytest.approx(budget.deadline_s, rel=1e-6)
        assert got <= budget.deadline_s

    def test_missing_entry_rejected(self):
        delays, bws, profiles, channels = self._maps([0.3])
        with pytest.raises(ValueError):
            round_delay([0, 1], delays, bws, profiles, channels, self.BUDGET)
