import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penfbm import gaussgen
from penfbm.errors import FactorizationFailure, NegativeEigenvalue
from penfbm.gaussgen import (
    FBMSampler,
    Path,
    PathEnsemble,
    TimeGrid,
    build_cov_matrix,
    cholesky_factor,
    circulant_eigenvalues,
    fbm_covariance,
    iter_chunks,
    rescale,
    reversed_covariance,
    running_max,
    running_min,
    sample_fbm,
    sample_fbm_cholesky,
    sample_fbm_circulant,
    time_reverse,
)
from penfbm.stats import WeightedSample, ks_distance


def _max_cov_z(values, cov):
    x = values[:, 1:]
    prod = x[:, :, None] * x[:, None, :]
    se = prod.std(axis=0, ddof=1) / math.sqrt(len(x))
    return float(np.max(np.abs(prod.mean(axis=0) - cov) / se))


class TestHurstAndGrid:
    @pytest.mark.parametrize("H", [0.0, 1.0, -0.2, 1.5, float("nan")])
    def test_rejects_out_of_range_hurst(self, H):
        with pytest.raises(ValueError):
            gaussgen.check_hurst(H)

    def test_grid_spacing(self):
        g = TimeGrid(4.0, 8)
        assert g.dt == 0.5
        assert g.times[0] == 0.0 and g.times[-1] == 4.0
        assert np.allclose(np.diff(g.times), 0.5)

    @pytest.mark.parametrize("horizon,n", [(0.0, 4), (-1.0, 4), (1.0, 0)])
    def test_invalid_grid(self, horizon, n):
        with pytest.raises(ValueError):
            TimeGrid(horizon, n)

    def test_path_length_checked(self):
        with pytest.raises(ValueError):
            Path(TimeGrid(1.0, 4), np.zeros(4))


class TestCovariance:
    @pytest.mark.parametrize("H", [0.1, 0.3, 0.5, 0.8, 0.95])
    def test_unit_variance_at_one(self, H):
        assert fbm_covariance(H, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_brownian_case_is_min(self):
        assert fbm_covariance(0.5, 0.3, 0.7) == pytest.approx(0.3, abs=1e-15)

    def test_h075_closed_form(self):
        assert fbm_covariance(0.75, 1.0, 2.0) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(
        H=st.floats(0.01, 0.99),
        s=st.floats(0.0, 100.0, allow_nan=False),
        t=st.floats(0.0, 100.0, allow_nan=False),
    )
    def test_symmetric(self, H, s, t):
        assert fbm_covariance(H, s, t) == fbm_covariance(H, t, s)

    def test_matrix_brownian_three_points(self):
        cov = build_cov_matrix(0.5, TimeGrid(1.0, 2))
        assert np.allclose(cov, [[0.5, 0.5], [0.5, 1.0]], atol=1e-15)

    def test_matrix_brownian_is_min(self):
        g = TimeGrid(3.0, 17)
        t = g.times[1:]
        assert np.allclose(build_cov_matrix(0.5, g), np.minimum.outer(t, t), atol=1e-14)

    def test_matrix_h075(self):
        cov = build_cov_matrix(0.75, TimeGrid(2.0, 2))
        assert np.allclose(cov, [[1.0, math.sqrt(2.0)], [math.sqrt(2.0), 2.0**1.5]], atol=1e-14)

    @pytest.mark.parametrize("H", [0.25, 0.5, 0.75])
    def test_time_reversal_covariance_identity(self, H):
        g = TimeGrid(1.0, 64)
        assert np.max(np.abs(reversed_covariance(H, g) - build_cov_matrix(H, g))) <= 1e-12


class TestCholesky:
    def test_count_zero_gives_empty(self):
        ens = sample_fbm_cholesky(0.5, TimeGrid(1.0, 8), 0, 0)
        assert len(ens) == 0 and list(ens) == []

    def test_brownian_sample_covariance(self):
        g = TimeGrid(1.0, 32)
        ens = sample_fbm_cholesky(0.5, g, 20_000, 1)
        assert _max_cov_z(ens.values, build_cov_matrix(0.5, g)) <= 3.0

    @pytest.mark.parametrize("H", [0.3, 0.5, 0.8])
    def test_sample_covariance_within_four_stderr(self, H):
        g = TimeGrid(1.0, 32)
        ens = sample_fbm_cholesky(H, g, 20_000, 7)
        assert _max_cov_z(ens.values, build_cov_matrix(H, g)) <= 4.0

    def test_bit_identical_for_same_seed(self):
        g = TimeGrid(1.0, 16)
        a = sample_fbm_cholesky(0.7, g, 50, 99)
        b = sample_fbm_cholesky(0.7, g, 50, 99)
        assert a.values.tobytes() == b.values.tobytes()

    def test_paths_start_at_zero(self):
        ens = sample_fbm_cholesky(0.3, TimeGrid(2.0, 10), 20, 3)
        assert np.all(ens.values[:, 0] == 0.0)

    def test_jitter_rescues_semidefinite_matrix(self):
        v = np.array([1.0, 2.0, 3.0])
        cov = np.outer(v, v)
        L = cholesky_factor(cov)
        assert np.allclose(L @ L.T, cov, atol=1e-8)

    def test_indefinite_matrix_fails(self):
        with pytest.raises(FactorizationFailure):
            cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestCirculant:
    @pytest.mark.parametrize("H", [0.05, 0.3, 0.5, 0.8, 0.97])
    def test_eigenvalues_nonnegative(self, H):
        assert circulant_eigenvalues(H, 512).min() >= 0.0

    def test_negative_eigenvalue_is_an_error(self, monkeypatch):
        bad = np.concatenate([[1.0, 1.5], np.zeros(7)])
        monkeypatch.setattr(gaussgen, "fgn_autocovariance", lambda H, n: bad)
        with pytest.raises(NegativeEigenvalue):
            circulant_eigenvalues(0.5, 8)

    def test_auto_falls_back_to_cholesky(self, monkeypatch):
        def boom(H, n):
            raise NegativeEigenvalue("forced")

        monkeypatch.setattr(gaussgen, "circulant_eigenvalues", boom)
        assert FBMSampler(0.7, TimeGrid(1.0, 16), "auto").method == "cholesky"

    def test_ks_against_cholesky(self):
        g = TimeGrid(1.0, 256)
        a = sample_fbm_cholesky(0.5, g, 20_000, 11).values[:, -1]
        b = sample_fbm_circulant(0.5, g, 20_000, 12).values[:, -1]
        assert ks_distance(WeightedSample(a), WeightedSample(b)) <= 0.02

    @pytest.mark.parametrize("H", [0.3, 0.75])
    def test_endpoint_variance(self, H):
        x = sample_fbm_circulant(H, TimeGrid(1.0, 128), 20_000, 5).values[:, -1]
        se = math.sqrt(2.0 / (len(x) - 1))
        assert abs(np.mean(x * x) - 1.0) <= 3.0 * se

    @pytest.mark.parametrize("H", [0.3, 0.8])
    def test_sample_covariance(self, H):
        g = TimeGrid(1.0, 16)
        ens = sample_fbm_circulant(H, g, 20_000, 21)
        assert _max_cov_z(ens.values, build_cov_matrix(H, g)) <= 4.0

    def test_bit_identical_for_same_seed(self):
        g = TimeGrid(1.0, 64)
        a = sample_fbm_circulant(0.4, g, 30, 5)
        b = sample_fbm_circulant(0.4, g, 30, 5)
        assert a.values.tobytes() == b.values.tobytes()

    def test_increments_method_needs_brownian(self):
        with pytest.raises(ValueError):
            FBMSampler(0.6, TimeGrid(1.0, 8), "increments")


class TestDeterminism:
    @pytest.mark.parametrize("method", ["cholesky", "circulant", "auto"])
    def test_independent_of_workers_and_chunking(self, method):
        sampler = FBMSampler(0.65, TimeGrid(1.0, 64), method)
        ref = np.concatenate([b for _, b in iter_chunks(sampler, 100, 3, chunk_size=100)])
        small = np.concatenate([b for _, b in iter_chunks(sampler, 100, 3, chunk_size=7)])
        threaded = np.concatenate([b for _, b in iter_chunks(sampler, 100, 3, chunk_size=9, workers=4)])
        assert ref.tobytes() == small.tobytes() == threaded.tobytes()

    def test_prefix_stability(self):
        g = TimeGrid(1.0, 32)
        big = sample_fbm(0.5, g, 40, 8)
        small = sample_fbm(0.5, g, 10, 8)
        assert np.array_equal(big.values[:10], small.values)

    def test_different_seeds_differ(self):
        g = TimeGrid(1.0, 32)
        assert not np.array_equal(sample_fbm(0.5, g, 5, 1).values, sample_fbm(0.5, g, 5, 2).values)


class TestTransforms:
    def test_time_reverse_zero(self):
        p = Path(TimeGrid(1.0, 4), np.zeros(5))
        assert np.array_equal(time_reverse(p).values, np.zeros(5))

    def test_time_reverse_example(self):
        p = Path(TimeGrid(1.0, 2), [0.0, 1.0, 3.0])
        assert np.array_equal(time_reverse(p).values, [0.0, 2.0, 3.0])

    def test_time_reverse_involution(self, rng):
        v = np.concatenate([[0.0], np.cumsum(rng.standard_normal(20))])
        p = Path(TimeGrid(1.0, 20), v)
        assert np.allclose(time_reverse(time_reverse(p)).values, v)

    def test_running_min_example(self):
        p = Path(TimeGrid(1.0, 3), [0.0, 1.0, -1.0, 2.0])
        assert np.array_equal(running_min(p).values, [0.0, 0.0, -1.0, -1.0])

    def test_running_max_zero(self):
        p = Path(TimeGrid(1.0, 3), np.zeros(4))
        assert np.array_equal(running_max(p).values, np.zeros(4))

    def test_rescale_halves_for_brownian_on_four(self):
        p = Path(TimeGrid(4.0, 4), [0.0, 2.0, -2.0, 4.0, 6.0])
        r = rescale(p, 4.0, 0.5)
        assert np.allclose(r.values, [0.0, 1.0, -1.0, 2.0, 3.0])
        assert r.grid.horizon == 1.0 and r.grid.n_steps == 4

    def test_rescale_horizon_mismatch(self):
        with pytest.raises(ValueError):
            rescale(Path(TimeGrid(2.0, 2), [0.0, 1.0, 2.0]), 4.0, 0.5)

    def test_ensemble_transforms(self):
        ens = PathEnsemble(TimeGrid(1.0, 2), [[0.0, 1.0, 3.0], [0.0, -1.0, 1.0]])
        assert np.array_equal(time_reverse(ens).values, [[0.0, 2.0, 3.0], [0.0, 2.0, 1.0]])
        assert np.array_equal(running_min(ens).values, [[0.0, 0.0, 0.0], [0.0, -1.0, -1.0]])

    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_self_similarity(self, H):
        big = rescale(sample_fbm(H, TimeGrid(8.0, 64), 20_000, 31), 8.0, H)
        unit = sample_fbm(H, TimeGrid(1.0, 64), 20_000, 32)
        a = WeightedSample(big.values[:, 32])
        b = WeightedSample(unit.values[:, 32])
        assert ks_distance(a, b) <= 0.02

    def test_reversed_sample_law(self):
        g = TimeGrid(1.0, 16)
        ens = time_reverse(sample_fbm(0.7, g, 20_000, 41))
        assert _max_cov_z(ens.values, build_cov_matrix(0.7, g)) <= 4.0


class TestEnsembleContainer:
    def test_sequence_protocol(self):
        ens = PathEnsemble(TimeGrid(1.0, 2), np.arange(9.0).reshape(3, 3) - np.arange(9.0).reshape(3, 3)[:, :1])
        assert len(ens) == 3
        assert isinstance(ens[0], Path)
        assert len(ens[1:]) == 2
        assert len(list(ens)) == 3
        back = PathEnsemble.from_paths(list(ens))
        assert np.array_equal(back.values, ens.values)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            PathEnsemble(TimeGrid(1.0, 4), np.zeros((2, 4)))
