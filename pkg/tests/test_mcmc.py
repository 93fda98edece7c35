import math

import numpy as np
import pytest
from scipy.special import ndtr

from degfusion.errors import ConfigurationError, DegenerateSampleError
from degfusion.mcmc import (
    Chain,
    gelman_rubin,
    posterior_sample,
    run_chains,
    rwmh_chain,
)

SUPPORT = (0.0, 1.0)


def flat_target(theta):
    return 0.0


def trunc_gauss_logpdf(theta, mu=0.4, sd=0.12):
    return -0.5 * ((theta - mu) / sd) ** 2


def trunc_gauss_cdf(x, mu=0.4, sd=0.12):
    lo = ndtr((SUPPORT[0] - mu) / sd)
    hi = ndtr((SUPPORT[1] - mu) / sd)
    return (ndtr((x - mu) / sd) - lo) / (hi - lo)


def ks_against(sample, cdf):
    xs = np.sort(sample)
    emp_hi = np.arange(1, xs.size + 1) / xs.size
    emp_lo = np.arange(0, xs.size) / xs.size
    target = cdf(xs)
    return max(np.abs(emp_hi - target).max(), np.abs(emp_lo - target).max())


class TestRwmhChain:
    def test_flat_target_accepts_nearly_everything(self):
        # Only proposals past the support edge are rejected; with a 5%
        # step the stationary boundary loss is 2.5%.
        chain = rwmh_chain(flat_target, 0.5, SUPPORT, 0.05, 5000, seed=0)
        assert 0.95 <= chain.acceptance_rate <= 1.0

    def test_truncated_gaussian_ks(self):
        chain = rwmh_chain(trunc_gauss_logpdf, 0.5, SUPPORT, 0.1, 50_000, seed=1)
        sample = chain.states[25_000:]
        assert ks_against(sample, trunc_gauss_cdf) < 0.05

    def test_oversized_step_still_correct(self):
        chain = rwmh_chain(trunc_gauss_logpdf, 0.5, SUPPORT, 10.0, 50_000, seed=2)
        assert chain.acceptance_rate < 0.2
        assert ks_against(chain.states[25_000:], trunc_gauss_cdf) < 0.05

    def test_states_never_leave_support(self):
        chain = rwmh_chain(trunc_gauss_logpdf, 0.9, SUPPORT, 0.4, 20_000, seed=3)
        assert chain.states.min() >= SUPPORT[0]
        assert chain.states.max() <= SUPPORT[1]

    def test_bad_init_rejected(self):
        with pytest.raises(ConfigurationError):
            rwmh_chain(trunc_gauss_logpdf, 1.5, SUPPORT, 0.1, 1000, seed=0)
        with pytest.raises(ConfigurationError):
            rwmh_chain(lambda t: -math.inf, 0.5, SUPPORT, 0.1, 1000, seed=0)

    def test_reproducible(self):
        a = rwmh_chain(trunc_gauss_logpdf, 0.5, SUPPORT, 0.1, 2000, seed=42)
        b = rwmh_chain(trunc_gauss_logpdf, 0.5, SUPPORT, 0.1, 2000, seed=42)
        assert np.array_equal(a.states, b.states)
        assert a.accepted == b.accepted

    def test_adaptation_moves_step_toward_target(self):
        chain = rwmh_chain(flat_target, 0.5, SUPPORT, 0.001, 5000, seed=5,
                           adapt_fraction=0.5)
        # A flat target accepts everything, so the step must have grown.
        assert chain.step_size > 0.001

    def test_detailed_balance_on_five_levels(self):
        levels = np.array([1.0, 3.0, 0.5, 2.0, 1.5])

        def log_post(theta):
            return math.log(levels[min(int(theta * 5), 4)])

        chain = rwmh_chain(log_post, 0.5, SUPPORT, 0.35, 200_000, seed=8)
        states = np.minimum((chain.states * 5).astype(int), 4)
        counts = np.zeros((5, 5))
        for a, b in zip(states[:-1], states[1:]):
            counts[a, b] += 1
        n = states.size - 1
        for a in range(5):
            for b in range(a + 1, 5):
                diff = abs(counts[a, b] - counts[b, a])
                se = math.sqrt(counts[a, b] + counts[b, a])
                assert diff <= 3.0 * max(se, 1.0)


class TestRunChains:
    def test_five_chains(self):
        inits = np.linspace(0.1, 0.9, 5)
        chains = run_chains(trunc_gauss_logpdf, SUPPORT, inits, [0.1] * 5,
                            2000, base_seed=10)
        assert len(chains) == 5
        assert [c.seed for c in chains] == [10, 11, 12, 13, 14]

    def test_repeat_call_identical(self):
        inits = np.linspace(0.1, 0.9, 3)
        a = run_chains(trunc_gauss_logpdf, SUPPORT, inits, [0.1] * 3, 1000, 7)
        b = run_chains(trunc_gauss_logpdf, SUPPORT, inits, [0.1] * 3, 1000, 7)
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.states, cb.states)

    def test_parallel_equals_sequential(self):
        inits = np.linspace(0.1, 0.9, 4)
        seq = run_chains(trunc_gauss_logpdf, SUPPORT, inits, [0.1] * 4, 1500,
                         3, parallel=False)
        par = run_chains(trunc_gauss_logpdf, SUPPORT, inits, [0.1] * 4, 1500,
                         3, parallel=True)
        for cs, cp in zip(seq, par):
            assert np.array_equal(cs.states, cp.states)

    def test_distinct_inits_required(self):
        with pytest.raises(ConfigurationError):
            run_chains(trunc_gauss_logpdf, SUPPORT, [0.5, 0.5], [0.1, 0.1],
                       1000, 0)

    def test_chain_index_in_errors(self):
        with pytest.raises(ConfigurationError, match="chain 1"):
            run_chains(trunc_gauss_logpdf, SUPPORT, [0.5, 1.7], [0.1, 0.1],
                       1000, 0)


def _manual_chain(states):
    states = np.asarray(states, dtype=float)
    return Chain(states, np.zeros_like(states), np.zeros(states.size, bool),
                 0, 0.1, 0)


class TestGelmanRubin:
    def test_identical_chains_give_exact_formula(self):
        base = rwmh_chain(trunc_gauss_logpdf, 0.5, SUPPORT, 0.1, 1000, seed=0)
        report = gelman_rubin([base, base, base], burn_in_fraction=0.5)
        n = 500
        assert report.B == pytest.approx(0.0, abs=1e-20)
        assert report.R == pytest.approx(1.0 - 1.0 / n, abs=1e-12)

    def test_disjoint_plateaus_diverge(self):
        rng = np.random.default_rng(0)
        low = _manual_chain(0.0 + 1e-3 * rng.normal(size=400))
        high = _manual_chain(1.0 + 1e-3 * rng.normal(size=400))
        report = gelman_rubin([low, high], burn_in_fraction=0.0)
        assert report.R > 1.1 * 10

    def test_converged_chains_near_one(self):
        inits = np.linspace(0.1, 0.9, 4)
        chains = run_chains(trunc_gauss_logpdf, SUPPORT, inits, [0.15] * 4,
                            20_000, base_seed=2)
        report = gelman_rubin(chains, burn_in_fraction=0.5)
        assert report.R < 1.05

    def test_constant_chains_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            gelman_rubin([_manual_chain(np.full(100, 0.3))] * 2, 0.0)

    def test_needs_two_chains(self):
        with pytest.raises(ConfigurationError):
            gelman_rubin([_manual_chain(np.arange(100.0))], 0.0)


class TestPosteriorSample:
    def test_no_burn_no_thin_concatenates(self):
        chains = [_manual_chain(np.arange(10.0)),
                  _manual_chain(np.arange(10.0, 20.0))]
        pooled = posterior_sample(chains, burn_in_fraction=0.0, thin=1)
        assert np.array_equal(pooled, np.arange(20.0))

    def test_thinning_halves_pool(self):
        chains = [_manual_chain(np.arange(10.0)),
                  _manual_chain(np.arange(10.0))]
        pooled = posterior_sample(chains, burn_in_fraction=0.0, thin=2)
        assert pooled.size == 10

    def test_pooled_mean_matches_quadrature(self):
        inits = np.linspace(0.1, 0.9, 5)
        chains = run_chains(trunc_gauss_logpdf, SUPPORT, inits, [0.15] * 5,
                            20_000, base_seed=6)
        pooled = posterior_sample(chains, burn_in_fraction=0.5)
        xs = np.linspace(*SUPPORT, 4001)
        dens = np.exp([trunc_gauss_logpdf(x) for x in xs])
        dens /= np.trapezoid(dens, xs)
        mean_quad = np.trapezoid(xs * dens, xs)
        # Monte Carlo standard error from per-chain batch means.
        batches = np.array([c.states[10_000:].reshape(20, -1).mean(axis=1)
                            for c in chains]).ravel()
        se = batches.std(ddof=1) / math.sqrt(batches.size)
        assert abs(pooled.mean() - mean_quad) < 2.0 * se

    def test_r_threshold_warns(self):
        rng = np.random.default_rng(0)
        low = _manual_chain(0.0 + 1e-3 * rng.normal(size=400))
        high = _manual_chain(1.0 + 1e-3 * rng.normal(size=400))
        with pytest.warns(UserWarning, match="converged"):
            posterior_sample([low, high], 0.0, r_threshold=1.05)

    def test_bad_thin(self):
        with pytest.raises(ConfigurationError):
            posterior_sample([_manual_chain(np.arange(10.0))] * 2, 0.0, thin=0)
