import dataclasses
import math
from types import SimpleNamespace

import numpy as np
import pytest

from mpbandits.environment import (
    SCENARIO_MEAN_REWARDS,
    SCENARIO_TRANSITIONS,
    ChannelSpec,
    Environment,
    chain_path,
    emit_reward,
    load_scenario,
    load_scenario_file,
    mean_reward,
    oracle_stats,
    realize_noise,
    sample_context,
    stationary_distribution,
    step_chain,
)
from mpbandits.errors import ConfigurationError, ContractViolation, DegeneracyError, EpisodeComplete

from helpers import ConstantRng


class TestChannelSpec:
    def test_rejects_reducible_chain(self):
        with pytest.raises(ConfigurationError):
            ChannelSpec(0.0, 0.0)

    def test_rejects_periodic_chain(self):
        with pytest.raises(ConfigurationError):
            ChannelSpec(1.0, 1.0)

    def test_rejects_inverted_levels(self):
        with pytest.raises(ConfigurationError):
            ChannelSpec(0.1, 0.1, h_good=0.1, h_bad=1.0)


class TestStationary:
    def test_simple_balance(self):
        assert stationary_distribution(ChannelSpec(0.3, 0.7))[1] == pytest.approx(0.3)

    def test_slow_chain(self):
        assert stationary_distribution(ChannelSpec(0.01, 0.08))[1] == pytest.approx(1 / 9)

    def test_absorbing_good(self):
        assert stationary_distribution(ChannelSpec(1.0, 0.0))[1] == pytest.approx(1.0)

    def test_degenerate_raises(self):
        stub = SimpleNamespace(p01=0.0, p10=0.0)
        with pytest.raises(DegeneracyError):
            stationary_distribution(stub)


class TestMeanReward:
    def test_known_values(self):
        assert mean_reward(ChannelSpec(0.04, 0.02)) == pytest.approx(0.7)
        assert mean_reward(ChannelSpec(0.1, 0.9)) == pytest.approx(0.19)
        assert mean_reward(ChannelSpec(0.04, 0.03)) == pytest.approx(0.6142857142857)

    def test_negative_noise_rejected(self):
        with pytest.raises(ContractViolation):
            mean_reward(ChannelSpec(0.5, 0.5), mean_noise=-0.1)

    def test_reference_table_reconstruction(self):
        for name, pairs in SCENARIO_TRANSITIONS.items():
            table = SCENARIO_MEAN_REWARDS[name]
            for (p01, p10), expected in zip(pairs, table):
                got = mean_reward(ChannelSpec(p01, p10))
                assert abs(got - expected) < 5e-3, (name, p01, p10)


class TestStepChain:
    def test_absorbing_bad_state(self):
        spec = ChannelSpec(0.0, 0.5)
        rng = np.random.default_rng(0)
        assert all(step_chain(0, spec, rng) == 0 for _ in range(100))

    def test_deterministic_alternation(self):
        # op-level semantics for the excluded periodic corner case
        stub = SimpleNamespace(p01=1.0, p10=1.0)
        rng = np.random.default_rng(0)
        assert step_chain(0, stub, rng) == 1
        assert step_chain(1, stub, rng) == 0

    def test_long_run_frequency(self):
        spec = ChannelSpec(0.01, 0.08)
        freqs = [chain_path(spec, 100_000, np.random.default_rng(seed)).mean()
                 for seed in range(5)]
        assert abs(np.mean(freqs) - 1 / 9) < 0.01


class TestSampleContext:
    def test_saturated_draws_hit_norm_bound(self):
        x = sample_context(4, 0.5, ConstantRng(1.0))
        assert np.allclose(x, 0.5)
        assert np.linalg.norm(x) == pytest.approx(1.0)

    def test_zero_draws(self):
        assert np.all(sample_context(4, 0.5, ConstantRng(0.0)) == 0.0)

    def test_monte_carlo_norm_and_mean(self):
        rng = np.random.default_rng(7)
        scale = 1 / math.sqrt(8)
        samples = np.stack([sample_context(8, scale, rng) for _ in range(100_000)])
        assert np.linalg.norm(samples, axis=1).max() <= 1.0
        assert abs(samples.mean() - 0.5 * scale) < 0.005


class TestNoiseAndReward:
    def test_zero_theta(self):
        assert realize_noise(np.zeros(4), np.ones(4) * 0.3) == 0.0

    def test_coordinate_projection(self):
        theta = np.array([1.0, 0.0, 0.0])
        assert realize_noise(theta, np.array([0.25, 0.9, 0.9])) == pytest.approx(0.25)

    def test_cauchy_schwarz_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            theta = rng.random(8)
            theta /= max(1.0, np.linalg.norm(theta))
            x = rng.random(8) / math.sqrt(8)
            assert 0.0 <= realize_noise(theta, x) <= 1.0

    def test_reward_rule(self):
        assert emit_reward(1, 0.3) == 1.0
        assert emit_reward(0, 0.3) == 0.1
        assert emit_reward(1, 1.2) == 0.1


class TestLoadScenario:
    def test_table_values(self):
        s1 = load_scenario("S1")
        assert (s1.channels[0].p01, s1.channels[0].p10) == (0.01, 0.08)
        s2 = load_scenario("S2")
        assert (s2.channels[9].p01, s2.channels[9].p10) == (0.9, 0.1)
        s4 = load_scenario("S4")
        assert (s4.channels[4].p01, s4.channels[4].p10) == (0.06, 0.05)
        assert s1.channels[0].h_good == 1.0 and s1.channels[0].h_bad == 0.1

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            load_scenario("S9")

    def test_theta_star_from_seed(self):
        a = load_scenario("S1", seed=3)
        b = load_scenario("S1", seed=3)
        c = load_scenario("S1", seed=4)
        assert np.array_equal(a.theta_star, b.theta_star)
        assert not np.array_equal(a.theta_star, c.theta_star)
        assert np.linalg.norm(a.theta_star) <= 1.0 + 1e-12
        assert np.all(a.theta_star >= 0.0)

    def test_invariants(self):
        with pytest.raises(ConfigurationError):
            load_scenario("S1", M=11)
        with pytest.raises(ConfigurationError):
            load_scenario("S1", d=7)
        with pytest.raises(ConfigurationError):
            dataclasses.replace(load_scenario("S1"), context_scale=0.9)
        with pytest.raises(ConfigurationError):
            load_scenario("S1", noise_jitter=1.5)


class TestScenarioFile:
    def test_round_trip(self, tmp_path):
        text = """\
# custom two-channel setup
name toy
h_good 1.0
h_bad 0.1
channels
1 0.2 0.3
2 0.4 0.1
"""
        path = tmp_path / "toy.txt"
        path.write_text(text)
        cfg = load_scenario_file(path, M=1, T=100, d=2)
        assert cfg.name == "toy"
        assert cfg.K == 2
        assert cfg.channels[1].p01 == pytest.approx(0.4)

    def test_bad_lines(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("channels\n1 0.2\n")
        with pytest.raises(ConfigurationError):
            load_scenario_file(path)
        path.write_text("channels\n2 0.2 0.3\n")
        with pytest.raises(ConfigurationError):
            load_scenario_file(path)
        path.write_text("nonsense here\n")
        with pytest.raises(ConfigurationError):
            load_scenario_file(path)


class TestEnvironment:
    def test_full_mode_reveals_states(self):
        env = Environment(load_scenario("S1", T=5, seed=1))
        obs, outcome = env.advance()
        assert obs.states is not None
        assert np.array_equal(obs.states, outcome.states)
        assert obs.contexts.shape == (10, 8)

    def test_bandit_mode_hides_states(self):
        env = Environment(load_scenario("S1", T=5, seed=1, feedback_mode="bandit"))
        obs, _ = env.advance()
        assert obs.states is None

    def test_common_random_numbers(self):
        a = Environment(load_scenario("S2", T=50, seed=9))
        b = Environment(load_scenario("S2", T=50, seed=9))
        for _ in range(50):
            oa, ra = a.advance()
            ob, rb = b.advance()
            assert np.array_equal(ra.states, rb.states)
            assert np.array_equal(oa.contexts, ob.contexts)
            assert np.array_equal(ra.noise, rb.noise)

    def test_horizon_enforced(self):
        env = Environment(load_scenario("S1", T=2, seed=1))
        env.advance()
        env.advance()
        with pytest.raises(EpisodeComplete):
            env.advance()

    def test_transition_rates_chi_square(self):
        cfg = load_scenario("S3", T=10_000, seed=5)
        env = Environment(cfg)
        prev = env.states.copy()
        from_good = np.zeros(cfg.K)
        good_to_bad = np.zeros(cfg.K)
        from_bad = np.zeros(cfg.K)
        bad_to_good = np.zeros(cfg.K)
        for _ in range(cfg.horizon):
            _, outcome = env.advance()
            was_good = prev == 1
            from_good += was_good
            from_bad += ~was_good
            good_to_bad += was_good & (outcome.states == 0)
            bad_to_good += ~was_good & (outcome.states == 1)
            prev = outcome.states
        # per-channel chi-square with 1 dof against the configured rates
        for k, ch in enumerate(cfg.channels):
            for trials, hits, p in [(from_good[k], good_to_bad[k], ch.p10),
                                    (from_bad[k], bad_to_good[k], ch.p01)]:
                expected = trials * p
                var = trials * p * (1 - p)
                stat = (hits - expected) ** 2 / var
                assert stat < 10.83, (k, p, hits, trials)  # chi2(1) at 0.1%

    def test_quantized_reward_mean_matches_stationary(self):
        # slow channels (p10 = 0.01) need seed averaging at this tolerance
        means = np.zeros(10)
        for seed in range(1, 6):
            cfg = load_scenario("S1", T=100_000, seed=seed)
            env = Environment(cfg)
            total = np.zeros(cfg.K)
            for _ in range(cfg.horizon):
                _, outcome = env.advance()
                total += outcome.quantized
            assert np.all(outcome.noise >= 0.0) and np.all(outcome.noise < 1.0)
            means += total / cfg.horizon / 5
        for k, ch in enumerate(cfg.channels):
            assert abs(means[k] - mean_reward(ch)) < 0.01

    def test_noise_jitter_off_by_default(self):
        cfg = load_scenario("S1", T=3, seed=4)
        env = Environment(cfg)
        for _ in range(3):
            obs, outcome = env.advance()
            assert np.allclose(outcome.noise, obs.contexts @ cfg.theta_star)


class TestOracleStats:
    def test_s4_optimal_set(self):
        stats = oracle_stats(load_scenario("S4", M=5, seed=1))
        assert sorted(k + 1 for k in stats.optimal_set) == [2, 4, 5, 7, 8]
        assert sorted(k + 1 for k in stats.suboptimal_set()) == [1, 3, 6, 9, 10]

    def test_s1_optimal_set(self):
        stats = oracle_stats(load_scenario("S1", M=5, seed=1))
        assert sorted(k + 1 for k in stats.optimal_set) == [6, 7, 8, 9, 10]

    def test_common_noise_shift_keeps_ranking(self):
        cfg = load_scenario("S4", M=5, seed=1)
        stats = oracle_stats(cfg)
        noise_free = np.array([mean_reward(c) for c in cfg.channels])
        expected = np.argsort(-noise_free, kind="stable")[:5]
        assert tuple(int(i) for i in expected) == stats.optimal_set
        assert stats.mean_noise > 0.0

    def test_s4_tie_broken_by_lower_index(self):
        # channels 3 and 10 (1-based) share the same stationary mean
        stats = oracle_stats(load_scenario("S4", M=7, seed=1))
        assert 2 in stats.optimal_set
        assert 9 not in stats.optimal_set
