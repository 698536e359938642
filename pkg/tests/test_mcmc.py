"""Tests for the delayed-rejection adaptive Metropolis sampler."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest

from linewidth import mcmc
from linewidth.mcmc import (
    Chain,
    DramConfig,
    PriorSpec,
    chain_effective_sample_size,
    dram_run,
    effective_sample_size,
    log_prior,
    read_chain,
    stage1_priors,
    stage2_priors,
    thin_and_select,
    write_chain,
)


def standard_normal_2d(x):
    return -0.5 * float(x @ x)


class TestPriors:
    def test_spec_requires_ordered_bounds(self):
        with pytest.raises(ValueError):
            PriorSpec("x", 1.0, 1.0)
        with pytest.raises(ValueError):
            PriorSpec("x", 2.0, -2.0)

    def test_interior_point_scores_zero(self):
        priors = [PriorSpec("a", 0.0, 1.0), PriorSpec("b", -math.inf, math.inf)]
        assert log_prior(np.array([0.5, -123.0]), priors) == 0.0

    def test_boundary_and_outside_are_excluded(self):
        priors = [PriorSpec("a", 0.0, 1.0)]
        assert log_prior(np.array([0.0]), priors) == -math.inf
        assert log_prior(np.array([1.0]), priors) == -math.inf
        assert log_prior(np.array([1.5]), priors) == -math.inf

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            log_prior(np.array([0.5, 0.5]), [PriorSpec("a", 0.0, 1.0)])

    def test_spectrum_domain_box(self):
        nu = np.linspace(1550.0, 1750.0, 512)
        priors = stage1_priors(nu)
        assert [p.name for p in priors] == ["alpha", "sigma_s", "phi", "sigma_eps"]
        # Length scale capped at twice the span; just past the cap is out.
        assert log_prior(np.array([1.0, 1.0, 401.0, 0.1]), priors) == -math.inf
        assert log_prior(np.array([1.0, 1.0, 399.0, 0.1]), priors) == 0.0
        assert log_prior(np.array([-0.1, 1.0, 100.0, 0.1]), priors) == -math.inf

    def test_frequency_domain_box(self):
        priors = stage2_priors(max_magnitude=5.0, xi_max=0.15)
        assert [p.name for p in priors] == ["beta0", "beta1", "sigma_c", "lam", "sigma_z"]
        # Mean level capped at ten times the largest magnitude.
        assert log_prior(np.array([55.0, -1.0, 1.0, 0.1, 0.1]), priors) == -math.inf
        assert log_prior(np.array([45.0, -1.0, 1.0, 0.1, 0.1]), priors) == 0.0
        # Decay rate is free in both directions.
        assert log_prior(np.array([1.0, 1e6, 1.0, 0.1, 0.1]), priors) == 0.0
        assert log_prior(np.array([1.0, -1e6, 1.0, 0.1, 0.1]), priors) == 0.0
        # Frequency length scale capped at three times the top frequency.
        assert log_prior(np.array([1.0, -1.0, 1.0, 0.46, 0.1]), priors) == -math.inf

    def test_frequency_box_needs_positive_scales(self):
        with pytest.raises(ValueError):
            stage2_priors(0.0, 0.15)
        with pytest.raises(ValueError):
            stage2_priors(5.0, -1.0)


class TestDramConfig:
    def test_rejects_inverted_burn_in(self):
        with pytest.raises(ValueError):
            DramConfig(100, 100)
        with pytest.raises(ValueError):
            DramConfig(100, -1)

    def test_rejects_zero_stages(self):
        with pytest.raises(ValueError):
            DramConfig(100, 10, dr_stages=0)

    def test_rejects_bad_shrink(self):
        with pytest.raises(ValueError):
            DramConfig(100, 10, dr_scale=0.0)
        with pytest.raises(ValueError):
            DramConfig(100, 10, dr_scale=1.5)

    def test_run_requires_proposal_covariance(self):
        with pytest.raises(ValueError):
            dram_run(standard_normal_2d, np.zeros(2), DramConfig(100, 10))

    def test_run_rejects_indefinite_covariance(self):
        cfg = DramConfig(100, 10, initial_cov=np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ValueError):
            dram_run(standard_normal_2d, np.zeros(2), cfg)

    def test_run_rejects_infinite_start(self):
        priors = [PriorSpec("a", 0.0, 1.0)]
        cfg = DramConfig(100, 10, initial_cov=np.eye(1))
        with pytest.raises(ValueError):
            dram_run(lambda th: log_prior(th, priors), np.array([2.0]), cfg)


class TestDramSampling:
    def test_standard_normal_moments(self):
        cfg = DramConfig(20000, 8000, initial_cov=np.eye(2), seed=5)
        chain = dram_run(standard_normal_2d, np.zeros(2), cfg)
        post = chain.post_burn_in
        assert np.all(np.abs(post.mean(axis=0)) < 0.1)
        frob = np.linalg.norm(np.cov(post.T) - np.eye(2))
        assert frob < 0.15

    def test_every_stage_sees_some_accepts_and_some_rejects(self):
        cfg = DramConfig(20000, 8000, initial_cov=np.eye(2), seed=5)
        chain = dram_run(standard_normal_2d, np.zeros(2), cfg)
        assert np.all(chain.accepted > 0)
        assert chain.accepted.sum() < cfg.chain_length
        assert 0.0 < chain.acceptance_rate < 1.0

    def test_deterministic_under_seed(self):
        cfg = DramConfig(2000, 500, initial_cov=np.eye(2), seed=17)
        a = dram_run(standard_normal_2d, np.zeros(2), cfg)
        b = dram_run(standard_normal_2d, np.zeros(2), cfg)
        assert np.array_equal(a.samples, b.samples)
        assert np.array_equal(a.log_posterior, b.log_posterior)
        assert np.array_equal(a.accepted, b.accepted)

    def test_different_seed_differs(self):
        base = DramConfig(2000, 500, initial_cov=np.eye(2), seed=17)
        a = dram_run(standard_normal_2d, np.zeros(2), base)
        from dataclasses import replace

        b = dram_run(standard_normal_2d, np.zeros(2), replace(base, seed=18))
        assert not np.array_equal(a.samples, b.samples)

    def test_box_uniform_marginals_pass_ks(self):
        # Flat target on the unit square; after thinning to an effectively
        # independent subsample each marginal must look uniform at the 1%
        # significance level.
        priors = [PriorSpec("a", 0.0, 1.0), PriorSpec("b", 0.0, 1.0)]
        cfg = DramConfig(30000, 5000, initial_cov=np.diag([0.01, 0.01]), seed=3)
        chain = dram_run(lambda th: log_prior(th, priors), np.array([0.5, 0.5]), cfg)
        post = chain.post_burn_in
        ess = chain_effective_sample_size(chain)
        stride = max(1, math.ceil(3.0 * post.shape[0] / ess))
        thinned = post[::stride]
        critical = 1.63 / math.sqrt(thinned.shape[0])
        for dim in range(2):
            assert kstest(thinned[:, dim], "uniform").statistic < critical

    def test_chain_never_leaves_the_prior_box(self):
        priors = [PriorSpec("a", 0.0, 1.0), PriorSpec("b", 0.0, 1.0)]
        cfg = DramConfig(5000, 1000, initial_cov=np.diag([0.04, 0.04]), seed=8)
        chain = dram_run(lambda th: log_prior(th, priors), np.array([0.5, 0.5]), cfg)
        assert np.all(chain.samples > 0.0)
        assert np.all(chain.samples < 1.0)
        assert np.all(np.isfinite(chain.log_posterior))

    def test_nan_target_treated_as_rejection(self):
        def leaky(th):
            if abs(th[0]) > 1.0:
                return math.nan
            return 0.0

        cfg = DramConfig(3000, 500, initial_cov=np.eye(1), seed=2)
        chain = dram_run(leaky, np.zeros(1), cfg)
        assert np.all(np.abs(chain.samples) <= 1.0)

    def test_single_stage_matches_plain_metropolis_reference(self):
        # With one stage and adaptation off, the sampler must reproduce a
        # textbook Metropolis loop bit for bit on a shared generator
        # protocol: one normal vector, then one uniform, per iteration.
        def target(x):
            return -0.5 * float(x @ x) - 0.1 * float(x[0] ** 4)

        n, d, seed = 4000, 3, 23
        cov = np.diag([0.9, 1.1, 0.7])
        cfg = DramConfig(
            n, 100, initial_cov=cov, dr_stages=1, adaptation_start=n + 10, seed=seed
        )
        chain = dram_run(target, np.ones(3), cfg)

        rng = np.random.default_rng(seed)
        factor = np.linalg.cholesky(cov)
        current = np.ones(3)
        l_cur = target(current)
        reference = np.empty((n, d))
        for i in range(n):
            proposal = current + factor @ rng.standard_normal(d)
            l_prop = target(proposal)
            log_alpha = min(0.0, l_prop - l_cur)
            u = rng.uniform()
            if math.log(u) < log_alpha:
                current, l_cur = proposal, l_prop
            reference[i] = current
        assert np.array_equal(chain.samples, reference)

    def test_delayed_rejection_rescues_low_acceptance(self):
        # A deliberately oversized first-stage proposal: the shrunk retry
        # stages must recover moves a single-stage sampler would lose.
        cfg1 = DramConfig(8000, 2000, initial_cov=np.eye(2) * 400.0,
                          dr_stages=1, adaptation_start=10**6, seed=31)
        cfg3 = DramConfig(8000, 2000, initial_cov=np.eye(2) * 400.0,
                          dr_stages=3, adaptation_start=10**6, seed=31)
        plain = dram_run(standard_normal_2d, np.zeros(2), cfg1)
        delayed = dram_run(standard_normal_2d, np.zeros(2), cfg3)
        assert delayed.accepted.sum() > 2 * plain.accepted.sum()
        assert delayed.accepted[1:].sum() > 0

    @pytest.mark.slow
    def test_double_well_histogram_matches_quadrature(self):
        # Detailed-balance check: long plain-Metropolis run on a bimodal
        # density against its quadrature normalization.
        def log_dw(x):
            return -4.0 * (x[0] ** 2 - 1.0) ** 2

        cfg = DramConfig(
            1_000_000,
            100_000,
            initial_cov=np.array([[0.75**2]]),
            dr_stages=1,
            adaptation_start=2_000_000,
            seed=11,
        )
        chain = dram_run(log_dw, np.array([1.0]), cfg)
        post = chain.post_burn_in[:, 0]
        edges = np.linspace(-3.0, 3.0, 61)
        hist, _ = np.histogram(post, bins=edges)
        empirical = hist / hist.sum()
        centers = 0.5 * (edges[:-1] + edges[1:])
        density = np.array([math.exp(-4.0 * (c * c - 1.0) ** 2) for c in centers])
        theoretical = density / density.sum()
        tv = 0.5 * np.abs(empirical - theoretical).sum()
        assert tv < 0.05
        # The quadrature normalization confirms the grid captures the mass.
        norm = quad(lambda v: math.exp(-4.0 * (v * v - 1.0) ** 2), -3, 3)[0]
        assert norm > 0


class TestThinning:
    @staticmethod
    def _toy_chain(n=100, burn=50):
        samples = np.arange(n, dtype=float)[:, None] * np.array([1.0, 10.0])
        return Chain(samples, np.zeros(n), np.array([n]), np.eye(2), burn)

    def test_selection_stays_post_burn_in(self):
        chain = self._toy_chain()
        picks = thin_and_select(chain, 500, np.random.default_rng(0))
        assert picks.shape == (500, 2)
        assert np.all(picks[:, 0] >= 50)

    def test_deterministic_and_with_replacement(self):
        chain = self._toy_chain()
        a = thin_and_select(chain, 200, np.random.default_rng(7))
        b = thin_and_select(chain, 200, np.random.default_rng(7))
        assert np.array_equal(a, b)
        # 200 draws from 50 states must repeat some state.
        assert np.unique(a[:, 0]).size < 200

    def test_single_state_chain_returns_that_state(self):
        samples = np.tile(np.array([2.5, -1.0]), (20, 1))
        chain = Chain(samples, np.zeros(20), np.array([0]), np.eye(2), 10)
        picks = thin_and_select(chain, 5, np.random.default_rng(1))
        assert np.all(picks == np.array([2.5, -1.0]))

    def test_rejects_nonpositive_count(self):
        with pytest.raises(ValueError):
            thin_and_select(self._toy_chain(), 0, np.random.default_rng(0))

    def test_rejects_fully_burned_chain(self):
        with pytest.raises(ValueError, match="no post-burn-in"):
            thin_and_select(self._toy_chain(burn=100), 5, np.random.default_rng(0))

    def test_selection_frequencies_are_uniform(self):
        # 10 distinct post-burn-in states sampled 1e5 times: multinomial
        # counts must sit within 3 sigma of equal shares.
        n, burn = 20, 10
        samples = np.arange(n, dtype=float)[:, None]
        chain = Chain(samples, np.zeros(n), np.array([n]), np.eye(1), burn)
        picks = thin_and_select(chain, 100_000, np.random.default_rng(12))
        values, counts = np.unique(picks[:, 0], return_counts=True)
        assert values.size == 10
        expected = 100_000 / 10
        sigma = math.sqrt(100_000 * 0.1 * 0.9)
        assert np.all(np.abs(counts - expected) < 3 * sigma)


class TestEffectiveSampleSize:
    def test_independent_draws_score_near_full(self, rng):
        x = rng.standard_normal(4000)
        assert effective_sample_size(x) > 2000

    def test_autocorrelated_draws_score_low(self, rng):
        n, phi = 20000, 0.9
        x = np.empty(n)
        x[0] = rng.standard_normal()
        innovations = rng.standard_normal(n)
        for i in range(1, n):
            x[i] = phi * x[i - 1] + innovations[i]
        ess = effective_sample_size(x)
        assert n / 40 < ess < n / 8

    def test_constant_series_counts_every_sample(self):
        assert effective_sample_size(np.full(500, 3.3)) == 500

    def test_chain_summary_takes_worst_parameter(self, rng):
        good = rng.standard_normal(2000)
        bad = np.cumsum(rng.standard_normal(2000)) * 0.01
        chain = Chain(np.column_stack([good, bad]), np.zeros(2000), np.array([2000]), np.eye(2), 0)
        combined = chain_effective_sample_size(chain)
        assert combined <= effective_sample_size(good)
        assert combined == pytest.approx(
            min(effective_sample_size(good), effective_sample_size(bad))
        )


class TestChainFiles:
    def test_round_trip(self, tmp_path):
        cfg = DramConfig(200, 50, initial_cov=np.eye(2) * 0.5, seed=4)
        chain = dram_run(standard_normal_2d, np.zeros(2), cfg)
        path = tmp_path / "chain.txt"
        write_chain(path, chain, names=("u", "v"))
        samples, log_post, burn = read_chain(path)
        assert np.array_equal(samples, chain.samples)
        assert np.array_equal(log_post, chain.log_posterior)
        assert burn == 50
