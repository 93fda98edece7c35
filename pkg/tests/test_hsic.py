import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degfusion.errors import (
    ConfigurationError,
    DegenerateSampleError,
    ExhaustedVariablesError,
    ShapeError,
)
from degfusion.hsic import (
    gram_matrix,
    hsic_v_statistic,
    permutation_null_r2,
    r2_hsic,
    rank_and_select,
)
from degfusion.models import TimeGrid


def brute_force_hsic(x, z):
    """O(n^2) double-sum expansion of the centered-trace estimator.

    Expands Tr(Lx H Lz H) via elementwise products and row/total sums,
    never touching the library's centering path.
    """
    n = x.size
    sx = x.std(ddof=1)
    sz = z.std(ddof=1)
    Kx = np.empty((n, n))
    Kz = np.empty((n, n))
    for p in range(n):
        for q in range(n):
            Kx[p, q] = np.exp(-0.5 * ((x[p] - x[q]) / sx) ** 2)
            Kz[p, q] = np.exp(-0.5 * ((z[p] - z[q]) / sz) ** 2)
    elementwise = sum(Kx[p, q] * Kz[p, q] for p in range(n) for q in range(n))
    rows_x = Kx.sum(axis=1)
    rows_z = Kz.sum(axis=1)
    cross = sum(rows_x[p] * rows_z[p] for p in range(n))
    total = Kx.sum() * Kz.sum()
    return (elementwise - 2.0 / n * cross + total / n ** 2) / n ** 2


class TestGramMatrix:
    def test_constant_sample_gives_all_ones(self):
        K = gram_matrix(np.full(6, 2.5), bandwidth=1.0)
        assert np.array_equal(K, np.ones((6, 6)))

    def test_unit_diagonal(self, rng):
        K = gram_matrix(rng.normal(size=40), bandwidth=0.7)
        assert np.array_equal(np.diag(K), np.ones(40))

    def test_three_point_hand_values(self):
        K = gram_matrix(np.array([0.0, 1.0, 2.0]), bandwidth=1.0)
        assert K[0, 1] == pytest.approx(np.exp(-0.5), abs=1e-15)
        assert K[1, 2] == pytest.approx(np.exp(-0.5), abs=1e-15)
        assert K[0, 2] == pytest.approx(np.exp(-2.0), abs=1e-15)

    def test_zero_bandwidth_rejected(self, rng):
        with pytest.raises(DegenerateSampleError):
            gram_matrix(rng.normal(size=10), bandwidth=0.0)

    def test_symmetric_psd(self, rng):
        for _ in range(5):
            x = rng.normal(size=100)
            K = gram_matrix(x, bandwidth=x.std())
            assert np.array_equal(K, K.T)
            assert np.linalg.eigvalsh(K).min() >= -1e-10

    def test_size_limit(self):
        with pytest.raises(ConfigurationError):
            gram_matrix(np.arange(5001, dtype=float), bandwidth=1.0)


class TestVStatistic:
    def test_matches_brute_force_expansion(self, rng):
        for _ in range(5):
            x = rng.normal(size=50)
            z = x ** 2 + 0.5 * rng.normal(size=50)
            ours = hsic_v_statistic(x, z)
            oracle = brute_force_hsic(x, z)
            assert ours == pytest.approx(oracle, rel=1e-10)

    def test_self_dependence_positive(self, rng):
        x = rng.normal(size=64)
        assert hsic_v_statistic(x, x) > 0

    def test_independent_pair_below_permutation_null(self):
        rng = np.random.default_rng(99)
        x = rng.normal(size=1000)
        z = rng.normal(size=1000)
        stat = r2_hsic(x, z)
        null = permutation_null_r2(x, z, 200, seed=7)
        assert stat < np.quantile(null, 0.95)

    def test_length_mismatch(self, rng):
        with pytest.raises(ShapeError):
            hsic_v_statistic(rng.normal(size=10), rng.normal(size=11))

    def test_constant_sample_degenerate(self, rng):
        with pytest.raises(DegenerateSampleError):
            hsic_v_statistic(np.ones(10), rng.normal(size=10))


class TestR2Hsic:
    def test_self_normalization_is_one(self, rng):
        x = rng.normal(size=80)
        assert r2_hsic(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_negation_invariance(self, rng):
        x = rng.normal(size=80)
        assert r2_hsic(x, -x) == pytest.approx(1.0, abs=1e-12)

    def test_independent_pair_small(self):
        rng = np.random.default_rng(4)
        assert r2_hsic(rng.normal(size=1000), rng.normal(size=1000)) < 0.02

    @given(scale=st.floats(0.1, 10.0), shift=st.floats(-5.0, 5.0))
    @settings(max_examples=15, deadline=None)
    def test_affine_invariance(self, scale, shift):
        rng = np.random.default_rng(11)
        x = rng.normal(size=60)
        z = np.sin(x) + 0.2 * rng.normal(size=60)
        assert r2_hsic(scale * x + shift, z) == pytest.approx(
            r2_hsic(x, z), abs=1e-10)


class _LinearToyModel:
    """Trajectory = x[0] * ramp; ignores every other input."""

    def __init__(self, grid):
        self.grid = grid

    def evaluate(self, x):
        return x[0] * self.grid.points


class TestRankAndSelect:
    def _toy_doe(self, n=200, seed=0):
        grid = TimeGrid.regular(0.0, 10.0, 0.5)
        model = _LinearToyModel(grid)
        rng = np.random.default_rng(seed)
        X = rng.uniform(1.0, 2.0, size=(n, 2))
        Y = np.column_stack([model.evaluate(x) for x in X]).reshape(grid.size, n)
        return X, Y, grid

    def test_inert_variable_scores_low(self):
        X, Y, grid = self._toy_doe()
        report = rank_and_select(X, Y, grid, data_times=[2.0, 5.0, 8.0])
        assert report.selected_index == 0
        assert report.averaged[1] < 0.05

    def test_single_time_average_is_column(self):
        X, Y, grid = self._toy_doe()
        report = rank_and_select(X, Y, grid, data_times=[5.0])
        assert np.array_equal(report.averaged, report.r2[:, 0])

    def test_crack_ranking_stable_across_seeds(self, coarse_crack_model,
                                               crack_nominal):
        from degfusion.models import build_doe
        from degfusion.reference import paris_prior

        times = np.linspace(60_000, 95_000, 8)
        tops = []
        for seed in (0, 1, 2):
            doe = build_doe(coarse_crack_model, paris_prior(), 300, seed)
            report = rank_and_select(doe.inputs, doe.outputs,
                                     coarse_crack_model.grid, times)
            order = np.argsort(report.averaged)[::-1]
            assert report.averaged[order[0]] > report.averaged[order[1]]
            tops.append(report.selected_index)
        assert len(set(tops)) == 1

    def test_deterministic_report(self):
        X, Y, grid = self._toy_doe()
        a = rank_and_select(X, Y, grid, data_times=[2.0, 7.0])
        b = rank_and_select(X, Y, grid, data_times=[2.0, 7.0])
        assert np.array_equal(a.r2, b.r2)
        assert a.selected_index == b.selected_index

    def test_exclusion_and_exhaustion(self):
        X, Y, grid = self._toy_doe()
        report = rank_and_select(X, Y, grid, [5.0], exclude={0})
        assert report.selected_index == 1
        with pytest.raises(ExhaustedVariablesError):
            rank_and_select(X, Y, grid, [5.0], exclude={0, 1})

    def test_times_outside_horizon(self):
        X, Y, grid = self._toy_doe()
        from degfusion.errors import DomainError

        with pytest.raises(DomainError):
            rank_and_select(X, Y, grid, [1e6])

    def test_csv_round_shape(self, tmp_path):
        X, Y, grid = self._toy_doe()
        report = rank_and_select(X, Y, grid, [2.0, 5.0], names=("a", "b"))
        path = tmp_path / "hsic.csv"
        report.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "variable,2,5,averaged,selected"
        assert len(lines) == 3
