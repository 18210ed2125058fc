import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from penfbm.ensemble import EstimateWithError
from penfbm.errors import BudgetExhausted, DegenerateWeights
from penfbm.gaussgen import FBMSampler, Path, TimeGrid, iter_chunks, sample_fbm
from penfbm.penalize import (
    estimate_I,
    estimate_I_nested,
    fit_rate,
    molchan_rate,
    nested_estimates,
    penalized_log_weight,
    persistence_probability,
    sample_conditioned_rejection,
    sample_penalized,
    weight_penalized,
)
from penfbm.stats import WeightedSample, ks_distance

Z99 = 2.3263478740408408  # one-sided 99% normal quantile


def _weighted_mean_se(sample):
    p = sample.weights
    m = float(np.dot(p, sample.values))
    return m, math.sqrt(float(np.dot(p * p, (sample.values - m) ** 2)))


class TestWeight:
    @pytest.mark.parametrize("T", [0.5, 1.0, 7.0, 64.0])
    def test_zero_path(self, T):
        p = Path(TimeGrid(T, 32), np.zeros(33))
        assert weight_penalized(p) == pytest.approx(1.0 / T, rel=1e-14)

    @pytest.mark.parametrize("c", [-30.0, -1.0, 0.0, 2.5, 40.0])
    def test_constant_path(self, c):
        p = Path(TimeGrid(2.0, 16), np.full(17, c))
        assert weight_penalized(p) == pytest.approx(math.exp(c) / 2.0, rel=1e-13)

    def test_linear_path(self):
        g = TimeGrid(1.0, 4096)
        p = Path(g, g.times.copy())
        expected = 1.0 / (1.0 - math.exp(-1.0))
        assert weight_penalized(p) == pytest.approx(expected, rel=1e-7)
        assert abs(weight_penalized(p) - 1.581977) < 1e-6

    def test_deep_negative_path_no_overflow(self):
        p = Path(TimeGrid(1.0, 4), [0.0, -800.0, -900.0, -800.0, -700.0])
        assert np.isfinite(penalized_log_weight(p.values, p.grid.dt)).all()
        assert weight_penalized(p) == 0.0 or weight_penalized(p) > 0

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, 17, elements=st.floats(-50, 50)))
    def test_positive(self, v):
        v[0] = 0.0
        assert weight_penalized(Path(TimeGrid(3.0, 16), v)) > 0.0


class TestEstimateI:
    def test_brownian_unit_horizon(self):
        est = estimate_I(0.5, 1.0, 64, 1_000_000, seed=3)
        assert est.value > 0 and math.isfinite(est.value)
        assert est.stderr < 0.01 * est.value

    def test_discretization_converged(self):
        sampler = FBMSampler(0.5, TimeGrid(1.0, 2048))
        fine, coarse = [], []
        for _, block in iter_chunks(sampler, 20_000, 4):
            fine.append(np.exp(penalized_log_weight(block, 1 / 2048)))
            coarse.append(np.exp(penalized_log_weight(np.ascontiguousarray(block[:, ::2]), 1 / 1024)))
        f = EstimateWithError.from_samples(np.concatenate(fine))
        c = EstimateWithError.from_samples(np.concatenate(coarse))
        assert abs(f.value - c.value) < f.stderr

    def test_needs_two_paths(self):
        with pytest.raises(ValueError):
            estimate_I(0.5, 1.0, 8, 1, 0)

    def test_nested_matches_independent_prefix(self):
        est = estimate_I_nested(0.5, [2.0, 4.0, 8.0], steps_per_unit=8, n_paths=500, seed=5)
        ens = sample_fbm(0.5, TimeGrid(8.0, 64), 500, 5)
        w = np.exp(penalized_log_weight(np.ascontiguousarray(ens.values[:, :17]), 1 / 8))
        assert est[0].value == pytest.approx(w.mean(), rel=1e-12)

    def test_brownian_rate(self):
        fit = molchan_rate(0.5, (64, 256, 1024), steps_per_unit=4, n_paths=20_000, seed=6)
        assert abs(fit.slope + 0.5) <= 0.05


class TestRateFit:
    def test_exact_power_law(self):
        Ts = [10.0, 100.0, 1000.0]
        ests = [EstimateWithError(2.0 * T**-0.3, 0.01 * T**-0.3, 100) for T in Ts]
        fit = fit_rate(Ts, ests)
        assert fit.slope == pytest.approx(-0.3, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(2.0), abs=1e-12)
        assert fit.slope_stderr > 0

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_rate([1.0, 2.0], [EstimateWithError(1, 0.1, 2)] * 2)


class TestPenalizedEnsemble:
    def test_stub_weight_reproduces_fbm_marginal(self):
        ens = sample_penalized(0.5, 4.0, 64, 2000, 7, weight=lambda block, grid: np.ones(len(block)))
        plain = sample_fbm(0.5, TimeGrid(4.0, 64), 2000, 7).values[:, -1] / 2.0
        assert ks_distance(ens.sample("end"), WeightedSample(plain)) == 0.0

    def test_weights_match_path_weight(self):
        ens = sample_penalized(0.7, 3.0, 48, 20, 8, ess_floor=0.0)
        raw = sample_fbm(0.7, TimeGrid(3.0, 48), 20, 8)
        assert np.allclose(ens.weights, [weight_penalized(p) for p in raw], rtol=1e-12)
        assert ens.normalizer == pytest.approx(ens.weights.sum())

    def test_rescaled_paths(self):
        ens = sample_penalized(0.5, 4.0, 8, 5, 9, ess_floor=0.0)
        raw = sample_fbm(0.5, TimeGrid(4.0, 8), 5, 9)
        assert ens.paths.grid.horizon == 1.0
        assert np.allclose(ens.paths.values, raw.values / 2.0)

    def test_probabilities_sum_to_one(self):
        ens = sample_penalized(0.5, 8.0, 64, 3000, 10)
        assert ens.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        assert ens.expect(np.ones(len(ens))) == pytest.approx(1.0, abs=1e-12)

    def test_ess_floor_is_hard(self):
        with pytest.raises(DegenerateWeights):
            sample_penalized(0.5, 8.0, 64, 500, 11, ess_floor=1e9)

    def test_endpoint_shifted_upward(self):
        ens = sample_penalized(0.5, 100.0, 1600, 100_000, 12, store_steps=0)
        m, se = _weighted_mean_se(ens.sample("end"))
        assert m - Z99 * se > 0.0

    def test_store_steps_must_divide(self):
        with pytest.raises(ValueError):
            sample_penalized(0.5, 1.0, 64, 200, 1, store_steps=10)


class TestRejection:
    def test_reflection_principle_at_unit_horizon(self):
        ens = sample_conditioned_rejection(0.5, 1.0, 10_000, 6000, 100_000, 13, store_steps=0)
        p, se = ens.info["acceptance_rate"], ens.info["acceptance_stderr"]
        assert abs(p - 0.682689492137086) <= 3.0 * se

    def test_acceptance_decreases_in_T(self):
        rates = [sample_conditioned_rejection(0.5, T, 64 * int(T), 1000, 1_000_000, 14, store_steps=0).info for T in (1.0, 4.0, 16.0)]
        for a, b in zip(rates, rates[1:]):
            assert a["acceptance_rate"] - b["acceptance_rate"] > 3.0 * math.hypot(a["acceptance_stderr"], b["acceptance_stderr"])

    def test_accepted_paths_stay_above_barrier(self):
        ens = sample_conditioned_rejection(0.7, 9.0, 90, 300, 100_000, 15)
        assert np.all(ens.features["raw_min"] >= -1.0)
        assert np.all(ens.paths.values.min(axis=1) * 9.0**0.7 >= -1.0 - 1e-12)
        assert len(ens) == 300

    def test_budget_exhausted(self):
        with pytest.raises(BudgetExhausted):
            sample_conditioned_rejection(0.5, 256.0, 256, 500, 1000, 16)

    def test_persistence_probability_matches_rejection_rate(self):
        est = persistence_probability(0.5, 4.0, 64, 20_000, 17)
        _, alive = nested_estimates(0.5, [4.0, 8.0, 16.0], 16, 20_000, 17)
        assert est.value == pytest.approx(alive[0].value, abs=1e-12)


class TestPenalizedVsConditioned:
    def test_both_right_shifted(self):
        pen = sample_penalized(0.5, 64.0, 1024, 20_000, 18, store_steps=0)
        m, se = _weighted_mean_se(pen.sample("end"))
        assert m - Z99 * se > 0.0
        cond = sample_conditioned_rejection(0.5, 64.0, 1024, 2000, 1_000_000, 19, store_steps=0)
        end = cond.features["end"]
        assert end.mean() - Z99 * end.std(ddof=1) / math.sqrt(end.size) > 0.0
