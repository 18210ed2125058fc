"""The fBM law reweighted by ``B_H(1) - M_H(1)`` and related utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import kernels
from .ensemble import DEFAULT_ESS_FLOOR, EstimateWithError, WeightedEnsemble, build_weighted
from .gaussgen import FBMSampler, TimeGrid, check_hurst, iter_chunks
from .stats import bootstrap_ci

#: ``E[-M(1)] = E|N(0, 1)|`` for Brownian motion.
BM_EXPECTED_NEG_MIN = math.sqrt(2.0 / math.pi)


def limit_weight(path) -> float:
    """Unnormalized density ``B(1) - min B`` of one path on ``[0, 1]``."""
    v = path.values if hasattr(path, "values") else np.asarray(path, dtype=float)
    return float(v[-1] - v.min())


def _limit_weights(block, grid):
    return block[:, -1] - kernels.row_min_max(block)[0]


def sample_limit_law(
    H,
    n_steps=1024,
    n_paths=100_000,
    seed=0,
    *,
    ess_floor: float = DEFAULT_ESS_FLOOR,
    store_steps: int | None = None,
    functionals: Mapping[str, Callable] | None = None,
    method="auto",
    workers=1,
) -> WeightedEnsemble:
    """fBM paths on ``[0, 1]`` weighted by :func:`limit_weight`."""
    H = check_hurst(H)
    sampler = FBMSampler(H, TimeGrid(1.0, n_steps), method)
    ens = build_weighted(
        sampler,
        n_paths,
        seed,
        _limit_weights,
        store_steps=store_steps,
        functionals=functionals,
        ess_floor=ess_floor,
        workers=workers,
    )
    ens.info.update(H=H, n_steps=n_steps)
    return ens


@dataclass
class NormalizerEstimate:
    """Grid estimates of ``E[-M_H(1)]`` and ``E[S_H(1)]``.

    ``extrapolated`` removes the leading ``n**-H`` grid bias by Richardson
    extrapolation against the half-resolution grid of the same paths.
    """

    neg_min: EstimateWithError
    max: EstimateWithError
    extrapolated: EstimateWithError
    diff_stderr: float
    symmetric: bool
    n_steps: int

    @property
    def value(self) -> float:
        return self.neg_min.value

    @property
    def stderr(self) -> float:
        return self.neg_min.stderr

    def as_dict(self) -> dict:
        return {
            "neg_min": self.neg_min.as_dict(),
            "max": self.max.as_dict(),
            "extrapolated": self.extrapolated.as_dict(),
            "diff_stderr": self.diff_stderr,
            "symmetric": self.symmetric,
            "n_steps": self.n_steps,
        }


def normalizer_E_negMin(H, n_steps=1024, n_paths=100_000, seed=0, method="auto", workers=1) -> NormalizerEstimate:
    H = check_hurst(H)
    if n_steps % 2:
        raise ValueError("n_steps must be even (the extrapolation uses the half grid)")
    sampler = FBMSampler(H, TimeGrid(1.0, n_steps), method)
    neg_min = np.empty(n_paths)
    neg_min_half = np.empty(n_paths)
    mx = np.empty(n_paths)
    for s, block in iter_chunks(sampler, n_paths, seed, workers=workers):
        e = s + len(block)
        lo, hi = kernels.row_min_max(block)
        neg_min[s:e] = -lo
        mx[s:e] = hi
        neg_min_half[s:e] = -kernels.row_min_max(np.ascontiguousarray(block[:, ::2]))[0]
    factor = 1.0 / (2.0**H - 1.0)
    rich = neg_min + factor * (neg_min - neg_min_half)
    diff = EstimateWithError.from_samples(neg_min - mx)
    return NormalizerEstimate(
        neg_min=EstimateWithError.from_samples(neg_min),
        max=EstimateWithError.from_samples(mx),
        extrapolated=EstimateWithError.from_samples(rich),
        diff_stderr=diff.stderr,
        symmetric=abs(diff.value) <= 3.0 * diff.stderr,
        n_steps=n_steps,
    )


def normalizer(H, n_steps=1024, n_paths=100_000, seed=0, workers=1) -> EstimateWithError:
    """``E[-M_H(1)]``: closed form for H = 1/2, extrapolated Monte Carlo otherwise."""
    if check_hurst(H) == 0.5:
        return EstimateWithError(BM_EXPECTED_NEG_MIN, 0.0, 0)
    return normalizer_E_negMin(H, n_steps, n_paths, seed, workers=workers).extrapolated


def laplace_ratio(f, r: float) -> float:
    """Trapezoid ratio ``int f e^{r f} / int e^{r f}`` for samples of f on a uniform grid of [0, 1]."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("f must be a 1-d array with at least two samples")
    if not r > 0:
        raise ValueError("r must be positive")
    e = np.exp(r * (f - f.max()))
    tw = np.ones_like(f)
    tw[0] = tw[-1] = 0.5
    den = np.dot(tw, e)
    return float(np.dot(tw, f * e) / den)


@dataclass
class AsymmetryReport:
    difference: float
    p_positive: float
    p_negative: float
    ci_low: float
    ci_high: float
    level: float
    n_boot: int
    passed: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def asymmetry_test(ensemble: WeightedEnsemble, n_boot=1000, level=0.99, seed=0) -> AsymmetryReport:
    """Weighted ``P(X(1) > 0) - P(X(1) < 0)``, positive at one-sided ``level`` by bootstrap."""
    sample = ensemble.sample("end")
    sign = np.sign(sample.values)

    def stat(s):
        return float(np.dot(s.weights, sign))

    boot = bootstrap_ci(stat, [sample], n_boot=n_boot, level=2 * level - 1, seed=seed)
    d = stat(sample)
    return AsymmetryReport(
        difference=d,
        p_positive=sample.prob(sample.values > 0),
        p_negative=sample.prob(sample.values < 0),
        ci_low=boot.low,
        ci_high=boot.high,
        level=level,
        n_boot=n_boot,
        passed=bool(boot.low > 0),
    )
