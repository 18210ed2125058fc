import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from penfbm.errors import DegenerateWeights
from penfbm.gaussgen import FBMSampler, Path, TimeGrid, iter_chunks, sample_fbm
from penfbm.limitlaw import (
    BM_EXPECTED_NEG_MIN,
    asymmetry_test,
    laplace_ratio,
    limit_weight,
    normalizer,
    normalizer_E_negMin,
    sample_limit_law,
)


class TestLimitWeight:
    def test_endpoint_minus_minimum(self):
        assert limit_weight(Path(TimeGrid(1.0, 3), [0.0, -0.5, 0.2, 1.0])) == pytest.approx(1.5)

    def test_monotone_path(self):
        g = TimeGrid(1.0, 10)
        assert limit_weight(Path(g, 2.0 * g.times)) == pytest.approx(2.0)

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, 9, elements=st.floats(-1e3, 1e3)))
    def test_nonnegative(self, v):
        assert limit_weight(v) >= 0.0

    def test_mean_matches_negative_minimum(self):
        # E B(1) = 0, so E[B(1) - M(1)] = E[-M(1)] on the same grid
        ens = sample_fbm(0.5, TimeGrid(1.0, 256), 40_000, 1)
        w = ens.values[:, -1] - ens.values.min(axis=1)
        neg = -ens.values.min(axis=1)
        diff = w - neg
        assert abs(diff.mean()) <= 3.0 * diff.std(ddof=1) / math.sqrt(diff.size)


class TestNormalizer:
    def test_brownian_closed_form(self):
        est = normalizer_E_negMin(0.5, n_steps=256, n_paths=100_000, seed=2)
        assert est.extrapolated.value == pytest.approx(BM_EXPECTED_NEG_MIN, rel=0.01)
        assert est.value < BM_EXPECTED_NEG_MIN  # the grid minimum is biased toward zero

    @pytest.mark.parametrize("H", [0.3, 0.5, 0.8])
    def test_symmetry(self, H):
        est = normalizer_E_negMin(H, n_steps=128, n_paths=20_000, seed=3)
        assert est.symmetric
        assert abs(est.neg_min.value - est.max.value) <= 3.0 * est.diff_stderr

    def test_refinement_monotone(self):
        sampler = FBMSampler(0.5, TimeGrid(1.0, 1024))
        mins = {4: [], 2: [], 1: []}
        for _, block in iter_chunks(sampler, 20_000, 4):
            for stride in mins:
                mins[stride].append(-block[:, ::stride].min(axis=1))
        means = {k: np.concatenate(v).mean() for k, v in mins.items()}
        assert means[4] < means[2] < means[1]
        assert means[1] - means[2] < means[2] - means[4]

    def test_closed_form_policy(self):
        assert normalizer(0.5).value == BM_EXPECTED_NEG_MIN
        assert normalizer(0.5).stderr == 0.0
        est = normalizer(0.7, n_steps=64, n_paths=2000, seed=1)
        assert est.stderr > 0

    def test_odd_grid_rejected(self):
        with pytest.raises(ValueError):
            normalizer_E_negMin(0.5, n_steps=63, n_paths=10)


class TestLimitEnsemble:
    def test_self_normalized(self):
        ens = sample_limit_law(0.5, 64, 5000, 4)
        assert ens.expect(np.ones(len(ens))) == pytest.approx(1.0, abs=1e-12)
        assert ens.normalizer == pytest.approx(ens.weights.sum())

    def test_weights_are_limit_weights(self):
        ens = sample_limit_law(0.7, 32, 200, 5, store_steps=32, ess_floor=0.0)
        raw = sample_fbm(0.7, TimeGrid(1.0, 32), 200, 5)
        assert np.allclose(ens.weights, [limit_weight(p) for p in raw], rtol=1e-14)
        # on a grid the weight vanishes exactly when the last point is the minimum
        at_end = raw.values.argmin(axis=1) == raw.grid.n_steps
        assert np.array_equal(ens.weights == 0.0, at_end)

    def test_zero_weights_vanish_with_refinement(self):
        coarse = sample_limit_law(0.5, 16, 20_000, 10, store_steps=0)
        fine = sample_limit_law(0.5, 1024, 20_000, 10, store_steps=0)
        assert np.all(fine.weights >= 0)
        assert np.mean(fine.weights == 0) < np.mean(coarse.weights == 0) / 4

    def test_negative_endpoints_keep_mass(self):
        ens = sample_limit_law(0.5, 64, 20_000, 6)
        assert ens.sample("end").prob(ens.sample("end").values < 0) > 0.1

    @pytest.mark.parametrize("H", [0.3, 0.5, 0.8])
    def test_asymmetry(self, H):
        ens = sample_limit_law(H, 64, 20_000, 7)
        rep = asymmetry_test(ens, n_boot=300, level=0.99, seed=1)
        assert rep.passed and rep.difference > 0
        assert rep.p_positive > rep.p_negative

    def test_ess_floor(self):
        with pytest.raises(DegenerateWeights):
            sample_limit_law(0.5, 16, 50, 8)


class TestLaplaceRatio:
    @pytest.mark.parametrize("r", [0.1, 1.0, 1e4])
    def test_constant(self, r):
        assert laplace_ratio(np.full(11, 2.5), r) == 2.5

    def test_identity_function(self):
        t = np.linspace(0.0, 1.0, 100_001)
        assert abs(laplace_ratio(t, 100.0) - 0.99) <= 1e-3

    def test_sine_peak(self):
        t = np.linspace(0.0, 1.0, 100_001)
        assert abs(laplace_ratio(np.sin(np.pi * t), 1000.0) - 1.0) <= 1e-2

    def test_monotone_and_converges(self, rng):
        f = np.cumsum(rng.standard_normal(2001)) / 40.0
        rs = np.geomspace(1.0, 1e6, 40)
        vals = np.array([laplace_ratio(f, r) for r in rs])
        assert np.all(np.diff(vals) >= -1e-12)
        assert vals[-1] == pytest.approx(f.max(), abs=1e-4)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            laplace_ratio([1.0], 1.0)
        with pytest.raises(ValueError):
            laplace_ratio([1.0, 2.0], 0.0)
