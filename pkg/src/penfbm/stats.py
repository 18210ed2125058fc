"""Weighted-sample statistics: ECDFs, KS and Wasserstein distances, ESS,
weighted bootstrap, and the modulus of continuity of sampled paths."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import EmptySample, NonfiniteWeight
from .rng import generator


class WeightedSample:
    """Real values with nonnegative weights; weights are normalized to sum 1."""

    def __init__(self, values, weights=None):
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise EmptySample("sample has no values")
        if weights is None:
            weights = np.full(values.size, 1.0 / values.size)
        else:
            weights = np.asarray(weights, dtype=float).ravel()
            if weights.shape != values.shape:
                raise ValueError(f"{weights.size} weights for {values.size} values")
            if not np.all(np.isfinite(weights)):
                raise NonfiniteWeight("weights contain NaN or infinity")
            if np.any(weights < 0):
                raise ValueError("weights must be nonnegative")
            total = weights.sum()
            if not total > 0:
                raise EmptySample("total weight is zero")
            weights = weights / total
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        self.values = values
        self.weights = weights

    def __len__(self):
        return self.values.size

    @property
    def ess(self) -> float:
        return ess(self.weights)

    def mean(self) -> float:
        return float(np.dot(self.weights, self.values))

    def prob(self, mask) -> float:
        return float(self.weights[np.asarray(mask, dtype=bool)].sum())


def ess(weights) -> float:
    """Effective sample size ``(sum w)**2 / sum w**2``."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise EmptySample("no weights")
    if not np.all(np.isfinite(w)):
        raise NonfiniteWeight("weights contain NaN or infinity")
    s2 = np.dot(w, w)
    if s2 == 0:
        raise EmptySample("all weights are zero")
    return float(w.sum() ** 2 / s2)


class ECDF:
    """Right-continuous weighted empirical distribution function."""

    def __init__(self, sample: WeightedSample):
        order = np.argsort(sample.values, kind="stable")
        xs = sample.values[order]
        cum = np.cumsum(sample.weights[order])
        last = np.r_[xs[1:] != xs[:-1], True]
        self.x = xs[last]
        self.F = np.minimum(cum[last], 1.0)
        self.F[-1] = 1.0

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self.x, q, side="right")
        out = np.where(idx > 0, self.F[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def left(self, q):
        """Left limit ``F(q-)``."""
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self.x, q, side="left")
        out = np.where(idx > 0, self.F[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out


def weighted_ecdf(sample: WeightedSample) -> ECDF:
    return ECDF(sample)


class _Pooled:
    """Pooled sort of two samples, reused across bootstrap replicates."""

    def __init__(self, a: WeightedSample, b: WeightedSample):
        x = np.concatenate([a.values, b.values])
        self.order = np.argsort(x, kind="stable")
        xs = x[self.order]
        self.ends = np.flatnonzero(np.r_[xs[1:] != xs[:-1], True])
        self.gaps = np.diff(xs[self.ends])

    def diff(self, wa, wb):
        """``F_a - F_b`` at every pooled jump point."""
        signed = np.concatenate([wa, -wb])[self.order]
        return np.cumsum(signed)[self.ends]

    def ks(self, wa, wb) -> float:
        return float(min(1.0, np.abs(self.diff(wa, wb)).max()))

    def w1(self, wa, wb) -> float:
        d = self.diff(wa, wb)
        return float(np.dot(np.abs(d[:-1]), self.gaps))


def ks_distance(a: WeightedSample, b: WeightedSample) -> float:
    return _Pooled(a, b).ks(a.weights, b.weights)


def wasserstein1(a: WeightedSample, b: WeightedSample) -> float:
    return _Pooled(a, b).w1(a.weights, b.weights)


def ks_against_cdf(a: WeightedSample, cdf: Callable) -> float:
    e = ECDF(a)
    Fc = np.asarray(cdf(e.x), dtype=float)
    left = np.r_[0.0, e.F[:-1]]
    return float(max(np.max(e.F - Fc), np.max(Fc - left), 0.0))


@dataclass
class BootstrapResult:
    low: float
    high: float
    se: float
    replicates: np.ndarray


def _resample_counts(rng, sample: WeightedSample) -> np.ndarray:
    n = len(sample)
    counts = rng.multinomial(n, sample.weights)
    return counts / n


def bootstrap_ci(statistic: Callable, samples: Sequence[WeightedSample], n_boot=1000, level=0.95, seed=0):
    """Percentile interval of ``statistic(*samples)`` under the weighted bootstrap.

    Each replicate redraws every sample with replacement, with probabilities
    proportional to its weights, and gives the redrawn points equal weight.
    """
    if isinstance(samples, WeightedSample):
        samples = [samples]
    rng = generator(seed)
    reps = np.empty(n_boot)
    for r in range(n_boot):
        redrawn = [WeightedSample(s.values, _resample_counts(rng, s)) for s in samples]
        reps[r] = statistic(*redrawn)
    return _summarize(reps, level)


def _summarize(reps, level) -> BootstrapResult:
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(reps, [alpha, 1.0 - alpha])
    return BootstrapResult(float(lo), float(hi), float(reps.std(ddof=1)), reps)


def bootstrap_two_sample(a: WeightedSample, b: WeightedSample, stat="ks", n_boot=1000, level=0.95, seed=0):
    """Fast weighted bootstrap of the KS or W1 distance (one pooled sort)."""
    pooled = _Pooled(a, b)
    fn = pooled.ks if stat == "ks" else pooled.w1
    rng = generator(seed)
    reps = np.empty(n_boot)
    for r in range(n_boot):
        reps[r] = fn(_resample_counts(rng, a), _resample_counts(rng, b))
    return fn(a.weights, b.weights), _summarize(reps, level)


@dataclass
class TestReport:
    """One-sided check: ``passed`` iff ``statistic <= threshold``."""

    statistic: float
    threshold: float
    n_boot: int
    ci_low: float
    ci_high: float
    passed: bool = False

    __test__ = False  # not a pytest class

    def __post_init__(self):
        self.passed = bool(self.statistic <= self.threshold)

    def as_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "n_boot": self.n_boot,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "pass": self.passed,
        }


def two_sample_test(a, b, threshold, stat="ks", n_boot=1000, level=0.95, seed=0) -> TestReport:
    value, boot = bootstrap_two_sample(a, b, stat=stat, n_boot=n_boot, level=level, seed=seed)
    return TestReport(value, threshold, n_boot, boot.low, boot.high)


def cdf_test(a: WeightedSample, cdf, threshold, n_boot=1000, level=0.95, seed=0) -> TestReport:
    value = ks_against_cdf(a, cdf)
    boot = bootstrap_ci(lambda s: ks_against_cdf(s, cdf), [a], n_boot=n_boot, level=level, seed=seed)
    return TestReport(value, threshold, n_boot, boot.low, boot.high)


# ------------------------------------------------- modulus of continuity


def window_steps(delta: float, dt: float) -> int:
    """Largest ``k`` with ``k * dt < delta``."""
    if not 0 < delta:
        raise ValueError(f"delta must be positive, got {delta}")
    r = delta / dt
    nearest = round(r)
    if math.isclose(r, nearest, rel_tol=1e-9, abs_tol=1e-9):
        return int(nearest) - 1
    return int(math.floor(r))


def modulus_of_continuity(path, delta: float, dt: float | None = None):
    """``max |v_i - v_j|`` over grid pairs with ``|t_i - t_j| < delta``.

    Accepts a :class:`~penfbm.gaussgen.Path`, a
    :class:`~penfbm.gaussgen.PathEnsemble` (one value per path) or a raw
    array together with ``dt``.
    """
    if dt is None:
        dt = path.grid.dt
        values = path.values
    else:
        values = np.asarray(path, dtype=float)
    single = values.ndim == 1
    values = np.ascontiguousarray(np.atleast_2d(values))
    k = window_steps(delta, dt)
    out = kernels.sliding_range_max(values, k) if k > 0 else np.zeros(values.shape[0])
    return float(out[0]) if single else out
