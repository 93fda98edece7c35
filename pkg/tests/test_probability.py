import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, simpson
from scipy.stats import gaussian_kde

from degfusion.errors import ConfigurationError, DegenerateSampleError, DomainError
from degfusion.probability import (
    Marginal,
    PriorSpec,
    SimplexWeights,
    kde_density,
    kl_vs_uniform,
    sample_dirichlet,
    sample_prior,
    silverman_bandwidth,
)

STD_NORMAL_AT_ZERO = 0.3989422804014327  # 1 / sqrt(2*pi)


def _unit_square_prior():
    return PriorSpec(
        (Marginal.uniform(0, 1), Marginal.uniform(0, 1)), ("u", "v"))


class TestMarginal:
    def test_degenerate_uniform_rejected(self):
        with pytest.raises(ConfigurationError):
            Marginal.uniform(0.3, 0.3)

    def test_gaussian_needs_positive_variance(self):
        with pytest.raises(ConfigurationError):
            Marginal.gaussian(0.0, 0.0)

    def test_gamma_needs_positive_parameters(self):
        with pytest.raises(ConfigurationError):
            Marginal.gamma(1.0, -1.0)

    def test_empirical_kde_unit_mass(self, rng):
        sample = rng.normal(2.0, 0.4, 4000)
        marg = Marginal.empirical_kde(sample, bounds=(1.0, 3.0))
        mass, _ = quad(lambda x: float(marg.pdf(np.array([x]))[0]), 1.0, 3.0,
                       limit=200)
        assert abs(mass - 1.0) < 1e-6

    def test_empirical_kde_draws_stay_inside_bounds(self, rng):
        sample = rng.normal(0.0, 1.0, 2000)
        marg = Marginal.empirical_kde(sample, bounds=(-0.5, 0.5))
        draws = marg.draw(np.random.default_rng(3), 5000)
        assert draws.min() >= -0.5 and draws.max() <= 0.5

    def test_empirical_kde_rejects_bad_bandwidth(self, rng):
        with pytest.raises(ConfigurationError):
            Marginal.empirical_kde(rng.normal(size=100), bounds=(-3, 3),
                                   bandwidth=0.0)


class TestSamplePrior:
    def test_unit_square_support(self):
        X = sample_prior(_unit_square_prior(), 4, seed=7)
        assert X.shape == (4, 2)
        assert np.all((X >= 0.0) & (X <= 1.0))

    def test_reference_crack_prior_bounds(self):
        from degfusion.reference import PARIS_BOUNDS, paris_prior

        X = sample_prior(paris_prior(), 1000, seed=11)
        c = X[:, 0]
        assert c.min() >= 0.9e-10 and c.max() <= 1.1e-10
        for j, (lo, hi) in enumerate(PARIS_BOUNDS):
            assert X[:, j].min() >= lo and X[:, j].max() <= hi

    def test_deterministic_given_seed(self):
        a = sample_prior(_unit_square_prior(), 100, seed=42)
        b = sample_prior(_unit_square_prior(), 100, seed=42)
        assert np.array_equal(a, b)

    def test_rejects_empty_sample(self):
        with pytest.raises(ConfigurationError):
            sample_prior(_unit_square_prior(), 0, seed=1)


class TestSampleDirichlet:
    def test_one_component_is_all_ones(self):
        W = sample_dirichlet(1, 5, seed=0)
        assert np.array_equal(W, np.ones((5, 1)))

    def test_three_component_means(self):
        W = sample_dirichlet(3, 10_000, seed=123)
        assert np.all(np.abs(W.mean(axis=0) - 1.0 / 3.0) < 0.02)

    def test_single_segment_row(self):
        W = sample_dirichlet(2, 1, seed=5)
        u = W[0, 0]
        assert 0.0 <= u <= 1.0
        assert abs(W[0].sum() - 1.0) <= 1e-12

    def test_rows_always_on_simplex(self):
        W = sample_dirichlet(4, 100_000, seed=9)
        assert np.abs(W.sum(axis=1) - 1.0).max() <= 1e-12
        assert W.min() >= 0.0

    @given(p=st.integers(1, 6), M=st.integers(1, 50),
           seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_simplex_property(self, p, M, seed):
        W = sample_dirichlet(p, M, seed)
        assert W.shape == (M, p)
        assert np.abs(W.sum(axis=1) - 1.0).max() <= 1e-12

    def test_weights_validation(self):
        with pytest.raises(ConfigurationError):
            SimplexWeights(np.array([0.5, 0.6]))
        assert len(SimplexWeights(np.array([0.25, 0.75]))) == 2


class TestKdeDensity:
    def test_standard_normal_at_origin(self):
        sample = np.random.default_rng(2).normal(0, 1, 10_000)
        dens = kde_density(sample, [0.0])
        assert abs(dens[0] - STD_NORMAL_AT_ZERO) < 0.02

    def test_constant_sample_is_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            kde_density(np.full(50, 1.3), [0.0])

    def test_symmetry(self, rng):
        half = rng.normal(0, 1, 3000)
        sample = np.concatenate([half, -half])
        xs = np.linspace(-2, 2, 21)
        dens = kde_density(sample, xs)
        assert np.abs(dens - dens[::-1]).max() < 0.02

    def test_unit_mass(self, rng):
        sample = rng.gamma(3.0, 1.0, 5000)
        h = silverman_bandwidth(sample)
        xs = np.linspace(sample.min() - 6 * h, sample.max() + 6 * h, 4000)
        mass = np.trapezoid(kde_density(sample, xs), xs)
        assert abs(mass - 1.0) < 1e-3

    def test_densities_non_negative(self, rng):
        dens = kde_density(rng.normal(size=500), np.linspace(-10, 10, 100))
        assert np.all(dens >= 0)


class TestKlVsUniform:
    def test_uniform_sample_is_uninformed(self):
        for seed in (0, 1, 2):
            sample = np.random.default_rng(seed).uniform(2.0, 5.0, 10_000)
            assert kl_vs_uniform(sample, (2.0, 5.0)) < 0.05

    def test_narrow_gaussian_is_informed(self):
        # Oracle: quadrature of an independently fitted KDE against the
        # uniform density.
        width = 3.0
        sample = np.random.default_rng(1).normal(3.5, width / 100, 10_000)
        sample = sample[(sample >= 2.0) & (sample <= 5.0)]
        ours = kl_vs_uniform(sample, (2.0, 5.0))

        xs = np.linspace(2.0, 5.0, 2001)
        dens = gaussian_kde(sample)(xs)
        dens /= simpson(dens, x=xs)
        oracle = simpson(dens * np.log(np.maximum(dens, 1e-300) * width), x=xs)
        assert oracle > 1.0
        assert ours > 1.0

    def test_threshold_separates_informed_from_flat(self):
        flat = np.random.default_rng(3).uniform(0, 1, 20_000)
        peaked = np.random.default_rng(4).normal(0.5, 0.05, 20_000)
        peaked = peaked[(peaked >= 0) & (peaked <= 1)]
        assert kl_vs_uniform(flat, (0, 1)) < 0.1
        assert kl_vs_uniform(peaked, (0, 1)) > 0.1

    def test_sample_outside_support_rejected(self):
        with pytest.raises(DomainError):
            kl_vs_uniform(np.array([0.1, 0.5, 1.4]), (0.0, 1.0))

    def test_never_negative(self, rng):
        for _ in range(5):
            sample = rng.uniform(0, 1, 2000)
            assert kl_vs_uniform(sample, (0.0, 1.0)) >= 0.0


class TestPriorSpec:
    def test_replace_swaps_one_marginal(self, rng):
        prior = _unit_square_prior()
        updated = prior.replace(1, Marginal.empirical_kde(
            rng.uniform(0.4, 0.6, 500), bounds=(0.0, 1.0)))
        assert updated.marginals[0] is prior.marginals[0]
        assert updated.support(1) == (0.0, 1.0)
        assert updated.marginals[1].kind == "empirical-kde"

    def test_midpoints(self):
        prior = PriorSpec((Marginal.uniform(2, 4), Marginal.gaussian(1.5, 2.0)),
                          ("a", "b"))
        mids = prior.midpoints()
        assert mids[0] == 3.0 and mids[1] == 1.5

    def test_duplicate_names_rejected(self):
        with pytest.raises(ConfigurationError):
            PriorSpec((Marginal.uniform(0, 1), Marginal.uniform(0, 1)),
                      ("x", "x"))
