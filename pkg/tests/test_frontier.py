import math

import numpy as np
import pytest

from drocal import (
    DataError, EmpiricalDistribution, ExpUtilityModel, Frontier, HighConfidence, MaxMean,
    MeanVarTradeoff, QuadraticModel, Satisficing, SolverError, bootstrap_frontier, calibrate,
    frontier_gap, model_reward_stats, normalize_frontier, oos_frontier, read_frontier,
    predicted_curves, replicate_rng, robust_optimize, summarize, write_frontier,
)
from drocal.frontier import divergence_quantile, high_confidence_delta
from oracles import naive_bootstrap_frontier, pooled_variance

TOY_SUPPORT = np.array([0.0, 0.0, 3.0])


def toy_sampler(rng, size):
    return TOY_SUPPORT[rng.integers(0, 3, size=size)]


def toy_sample(n, seed=0):
    return EmpiricalDistribution(toy_sampler(replicate_rng(seed, 1 << 40), n))


def portfolio_instance():
    rng = np.random.default_rng(21)
    return (ExpUtilityModel.budget_constrained(3, 1.0),
            EmpiricalDistribution(rng.normal(0.01, 0.05, (40, 3))))


def make_frontier(mu, sigma2, delta=None):
    mu = np.asarray(mu, dtype=float)
    delta = np.arange(mu.size, dtype=float) if delta is None else delta
    return Frontier(delta, mu, sigma2, np.zeros(mu.size), np.zeros(mu.size))


class TestBootstrapFrontier:
    @pytest.mark.parametrize("name", ["kl", "chi2"])
    def test_matches_naive_oracle_bitwise(self, name, request):
        phi = request.getfixturevalue(name)
        rng = np.random.default_rng(5)
        model = ExpUtilityModel.budget_constrained(3, 1.0)
        dist = EmpiricalDistribution(rng.normal(0.01, 0.05, (25, 3)))
        grid = [0.0, 0.5, 2.0]

        def solve(samples, delta):
            return robust_optimize(model, EmpiricalDistribution(samples), delta, phi, tol=1e-9).x

        ref = naive_bootstrap_frontier(dist.samples, 8, 17, grid, solve,
                                       lambda x: model_reward_stats(model, x, dist))
        got = bootstrap_frontier(model, dist, phi, grid, k=8, seed=17, warm_start=False)
        assert [p[:3] for p in got.points] == ref

    def test_law_of_total_variance(self, kl):
        dist = toy_sample(12)
        model = QuadraticModel(1)
        k = 6
        f = bootstrap_frontier(model, dist, kl, [0.0, 0.3], k=k, seed=2, warm_start=False)
        for i, delta in enumerate((0.0, 0.3)):
            rewards, within = [], []
            for j in range(k):
                rep = dist.subset(np.random.default_rng(np.random.SeedSequence([2, j])).integers(0, 12, 12))
                x = robust_optimize(model, rep, delta, kl, tol=1e-9).x
                rewards.append(model.reward(x, dist.samples))
                within.append(model_reward_stats(model, x, dist)[1])
            pooled_mean, pooled = pooled_variance(rewards, dist.weights)
            W = math.fsum(within) / k
            np.testing.assert_allclose(f.mu[i], pooled_mean, rtol=1e-12)
            # between-replicate term carries the (k - 1) divisor
            np.testing.assert_allclose((f.sigma2[i] - W) * (k - 1) / k, pooled - W, rtol=1e-9, atol=1e-12)

    def test_single_observation(self, kl):
        dist = EmpiricalDistribution([2.0])
        f = bootstrap_frontier(QuadraticModel(1), dist, kl, [0.0, 1.0], k=5)
        np.testing.assert_array_equal(f.mu, [0.0, 0.0])
        np.testing.assert_array_equal(f.sigma2, [0.0, 0.0])

    def test_single_replicate_needs_opt_in(self, toy, kl):
        with pytest.raises(ValueError):
            bootstrap_frontier(*toy, kl, [0.0], k=1)
        f = bootstrap_frontier(*toy, kl, [0.0], k=1, allow_single=True)
        assert f.meta["k"] == 1 and f.mu_sd[0] == 0.0

    def test_grid_validation(self, toy, kl):
        for grid in ([], [0.5, 0.1], [-1.0, 0.0], [0.0, np.nan]):
            with pytest.raises(ValueError):
                bootstrap_frontier(*toy, kl, grid, k=2)

    def test_weighted_rejected(self, kl):
        dist = EmpiricalDistribution([0.0, 1.0], [0.3, 0.7])
        with pytest.raises(ValueError):
            bootstrap_frontier(QuadraticModel(1), dist, kl, [0.0], k=2)

    def test_variance_decreases_toy(self, kl):
        f = bootstrap_frontier(QuadraticModel(1), toy_sample(50), kl, [0.0, 0.5], k=50, seed=0)
        assert f.sigma2[1] < f.sigma2[0]

    def test_three_point_toy(self, kl):
        dist = EmpiricalDistribution(TOY_SUPPORT)
        model = QuadraticModel(1)
        grid = [0.0, 0.5, 1.0]
        f = bootstrap_frontier(model, dist, kl, grid, k=200, seed=0, warm_start=False)
        ref = naive_bootstrap_frontier(
            dist.samples, 200, 0, grid, lambda ys, d: robust_optimize(model, EmpiricalDistribution(ys), d, kl,
                                                                       tol=1e-9).x,
            lambda x: model_reward_stats(model, x, dist))
        assert [p[:3] for p in f.points] == ref
        assert f.sigma2[1] < f.sigma2[0]
        # at n = 3 the first-order mean gain outweighs the second-order loss,
        # as the expansion predicts
        s = summarize(model, dist, kl)
        predicted = predicted_curves(s, 3, [0.0, 0.01])
        assert np.sign(f.mu[1] - f.mu[0]) == np.sign(predicted[1][1] - predicted[0][1])

    def test_reproducible(self, toy, kl):
        a = bootstrap_frontier(*toy, kl, [0.0, 0.2], k=4, seed=9)
        b = bootstrap_frontier(*toy, kl, [0.0, 0.2], k=4, seed=9)
        assert a.points == b.points


class TestOosFrontier:
    def test_constant_reward(self, kl):
        class Constant(QuadraticModel):
            def reward(self, x, y):
                return np.full(np.asarray(y).shape[0], 4.0)

        f = oos_frontier(Constant(1), toy_sampler, 5, 20, kl, [0.0, 0.4])
        np.testing.assert_array_equal(f.mu, [4.0, 4.0])
        np.testing.assert_array_equal(f.sigma2, [0.0, 0.0])

    def test_sampled_and_conditional_agree(self, kl):
        model = QuadraticModel(1)
        law = EmpiricalDistribution(TOY_SUPPORT)

        def moments(x):
            return model_reward_stats(model, x, law)

        a = oos_frontier(model, toy_sampler, 20, 4000, kl, [0.0], seed=1)
        b = oos_frontier(model, toy_sampler, 20, 4000, kl, [0.0], seed=1, moments=moments)
        assert abs(a.mu[0] - b.mu[0]) <= 4 * a.mu_sd[0] / math.sqrt(4000)
        np.testing.assert_allclose(a.sigma2[0], b.sigma2[0], rtol=0.1)

    def test_large_sample_consistency(self, kl):
        # with n large the empirical optimizer is near x* = 1: mean reward near -1
        model = QuadraticModel(1)
        law = EmpiricalDistribution(TOY_SUPPORT)
        f = oos_frontier(model, toy_sampler, 10_000, 20, kl, [0.0], seed=3,
                         moments=lambda x: model_reward_stats(model, x, law))
        np.testing.assert_allclose(f.mu[0], -1.0, atol=2e-3)
        np.testing.assert_allclose(f.sigma2[0], 0.5, atol=1e-2)

    def test_arguments(self, kl):
        with pytest.raises(ValueError):
            oos_frontier(QuadraticModel(1), toy_sampler, 5, 1, kl, [0.0])
        with pytest.raises(ValueError):
            oos_frontier(QuadraticModel(1), toy_sampler, 0, 5, kl, [0.0])


class TestNormalize:
    def test_two_points(self):
        g = normalize_frontier(make_frontier([3.0, 1.0], [10.0, 4.0]))
        np.testing.assert_array_equal(g.mu, [1.0, 0.0])
        np.testing.assert_array_equal(g.sigma2, [1.0, 0.0])

    def test_idempotent(self):
        f = make_frontier([3.0, 2.5, 1.0], [10.0, 6.0, 4.0])
        g = normalize_frontier(f)
        h = normalize_frontier(g)
        np.testing.assert_allclose(h.mu, g.mu, atol=1e-15)
        np.testing.assert_allclose(h.sigma2, g.sigma2, atol=1e-15)
        assert 0 < g.mu[1] < 1 and 0 < g.sigma2[1] < 1

    def test_degenerate(self):
        with pytest.raises(ValueError):
            normalize_frontier(make_frontier([1.0, 1.0], [3.0, 2.0]))
        with pytest.raises(ValueError):
            normalize_frontier(make_frontier([1.0], [3.0]))

    def test_gap(self):
        ref = make_frontier([3.0, 1.0], [10.0, 4.0])
        cand = make_frontier([3.0, 2.0], [10.0, 4.0])
        np.testing.assert_allclose(frontier_gap(cand, ref), 0.5)
        assert frontier_gap(ref, ref) == 0.0
        with pytest.raises(ValueError):
            frontier_gap(make_frontier([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), ref)


class TestFrontierObject:
    def test_validation(self):
        with pytest.raises(ValueError):
            make_frontier([1.0, 2.0], [1.0, 2.0], delta=np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            make_frontier([1.0], [-1.0])
        with pytest.raises(ValueError):
            Frontier([0.0], [1.0, 2.0], [1.0], [0.0], [0.0])

    def test_index_of(self):
        f = make_frontier([1.0, 2.0], [1.0, 2.0], delta=np.array([0.0, 0.5]))
        assert f.index_of(0.5) == 1
        with pytest.raises(KeyError):
            f.index_of(0.25)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path, toy, kl):
        f = bootstrap_frontier(*toy, kl, [0.0, 0.1, 0.7], k=5, seed=4)
        path = write_frontier(f, tmp_path / "f.csv", {"note": np.float64(1.5)})
        g = read_frontier(path)
        assert g.points == f.points
        assert g.meta["note"] == 1.5 and g.meta["k"] == 5

    def test_normalized_round_trip(self, tmp_path):
        f = normalize_frontier(make_frontier([3.0, 2.9, 1.0], [10.0, 11.0, 4.0]))
        g = read_frontier(write_frontier(f, tmp_path / "n.csv"))
        assert g.points == f.points

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("delta,mean,var\n0,1,2\n")
        with pytest.raises(DataError):
            read_frontier(p)

    def test_bad_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("delta,mu,sigma2,mu_sd,sigma2_sd\n0,1,2,0\n")
        with pytest.raises(DataError):
            read_frontier(p)
        p.write_text("delta,mu,sigma2,mu_sd,sigma2_sd\n0,1,x,0,0\n")
        with pytest.raises(DataError):
            read_frontier(p)


class TestCalibration:
    def test_max_mean_tie_prefers_smaller_delta(self):
        f = make_frontier([1.0, 2.0, 2.0, 0.5], [4.0, 3.0, 2.0, 1.0])
        assert calibrate(f, MaxMean()) == 1.0

    def test_tradeoff_zero_is_max_mean(self):
        f = make_frontier([1.0, 2.0, 1.5], [4.0, 3.0, 2.0])
        assert calibrate(f, MeanVarTradeoff(0.0)) == calibrate(f, MaxMean())
        assert calibrate(f, MeanVarTradeoff(10.0)) == 2.0
        with pytest.raises(ValueError):
            MeanVarTradeoff(-1.0)

    def test_satisficing(self, toy, kl):
        f = make_frontier([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], delta=np.array([0.0, 0.1, 1.0]))
        objective = robust_optimize(*toy, 0.1, kl).objective
        assert calibrate(f, Satisficing(objective - 1e-9, *toy, kl)) == 0.1
        assert calibrate(f, Satisficing(-1e9, *toy, kl)) == 1.0
        with pytest.raises(SolverError):
            calibrate(f, Satisficing(0.0, *toy, kl))

    def test_high_confidence_monotone_in_alpha(self, kl):
        model, dist = portfolio_instance()
        deltas = [high_confidence_delta(HighConfidence(a, model, dist, kl, k=200))[0]
                  for a in (0.2, 0.1, 0.05)]
        assert deltas[0] < deltas[1] < deltas[2]

    def test_high_confidence_hits_radius(self, kl):
        from drocal.frontier import realized_divergence

        model, dist = portfolio_instance()
        delta, radius = high_confidence_delta(HighConfidence(0.1, model, dist, kl, k=200))
        np.testing.assert_allclose(realized_divergence(model, dist, kl, delta)[0], radius, rtol=1e-3)

    def test_chi_square_quantile(self, kl):
        dist = toy_sample(30)
        q = divergence_quantile(dist, kl, 0.05, estimator="chi2")
        from scipy.stats import chi2 as chi2_law
        np.testing.assert_allclose(q, chi2_law.ppf(0.95, 29) / 60)
        with pytest.raises(ValueError):
            HighConfidence(0.05, QuadraticModel(1), dist, kl, estimator="nope")
        with pytest.raises(ValueError):
            HighConfidence(1.5, QuadraticModel(1), dist, kl)

    def test_unbracketed_radius(self, kl):
        model, dist = QuadraticModel(1), toy_sample(40)
        with pytest.raises(SolverError):
            high_confidence_delta(HighConfidence(0.1, model, dist, kl, k=200, lo=1e-6, hi=1e-5))

    def test_unknown_rule(self):
        from drocal import ConfigError

        with pytest.raises(ConfigError):
            calibrate(make_frontier([1.0], [1.0]), object())
