"""Penalization of fBM by ``(int_0^T exp(-B_H(s)) ds)^-1``.

Includes the path weight, the normalizer ``I(T)`` and its power-law rate,
the weighted (penalized) ensemble rescaled to ``[0, 1]``, and the hard
conditioning on ``min B_H >= -1`` by rejection for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .ensemble import DEFAULT_ESS_FLOOR, EstimateWithError, WeightedEnsemble, build_weighted
from .errors import BudgetExhausted
from .gaussgen import FBMSampler, PathEnsemble, TimeGrid, check_hurst, iter_chunks
from .rng import as_seed

#: Grid resolution per unit of original time used when ``n_steps`` is not given.
STEPS_PER_UNIT = 64

#: Level below which a path counts as having left the half-line in the rejection sampler.
BARRIER = -1.0


def default_steps(T: float, steps_per_unit: int = STEPS_PER_UNIT) -> int:
    return max(1, int(round(T * steps_per_unit)))


def penalized_log_weight(values, dt: float):
    """Log of the trapezoid-rule ``1 / int exp(-B)`` per row (min-shifted)."""
    v = np.ascontiguousarray(np.atleast_2d(np.asarray(values, dtype=float)))
    return kernels.penalized_log_weights(v, dt)


def weight_penalized(path) -> float:
    """``1 / int_0^T exp(-B(s)) ds`` for one path, trapezoid rule on its grid."""
    return float(np.exp(penalized_log_weight(path.values, path.grid.dt))[0])


def _penalized_weights(block, grid):
    return np.exp(kernels.penalized_log_weights(block, grid.dt))


def estimate_I(H, T, n_steps=None, n_paths=100_000, seed=0, method="auto", workers=1) -> EstimateWithError:
    """Monte Carlo estimate of ``I(T) = E[(int_0^T exp(-B_H))^-1]``."""
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    n_steps = n_steps or default_steps(T)
    sampler = FBMSampler(H, TimeGrid(T, n_steps), method)
    w = np.empty(n_paths)
    for s, block in iter_chunks(sampler, n_paths, seed, workers=workers):
        w[s : s + len(block)] = _penalized_weights(block, sampler.grid)
    return EstimateWithError.from_samples(w)


def nested_estimates(H, horizons: Sequence[float], steps_per_unit=STEPS_PER_UNIT, n_paths=100_000, seed=0, method="auto", workers=1, survival=True):
    """``I(T)`` and ``P(min_{[0,T]} B_H >= -1)`` for several horizons from prefixes of the same paths.

    Paths are drawn once on the largest horizon; the restriction of an exact
    fBM sample to ``[0, T]`` is an exact sample there, so every estimate is
    unbiased, and the shared randomness tightens the fitted slope. Returns
    two lists of :class:`EstimateWithError` ordered by increasing horizon;
    the second is empty when ``survival`` is false.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    horizons = sorted(float(T) for T in horizons)
    steps = [default_steps(T, steps_per_unit) for T in horizons]
    if any(not math.isclose(T * steps_per_unit, k) for T, k in zip(horizons, steps)):
        raise ValueError("each horizon times steps_per_unit must be an integer")
    dt = 1.0 / steps_per_unit
    sampler = FBMSampler(H, TimeGrid(horizons[-1], steps[-1]), method)
    w = np.empty((len(horizons), n_paths))
    alive = np.empty((len(horizons), n_paths if survival else 0))
    for s, block in iter_chunks(sampler, n_paths, seed, workers=workers):
        e = s + len(block)
        run_min = np.minimum.accumulate(block, axis=1) if survival else None
        for i, k in enumerate(steps):
            part = np.ascontiguousarray(block[:, : k + 1])
            w[i, s:e] = np.exp(kernels.penalized_log_weights(part, dt))
            if survival:
                alive[i, s:e] = run_min[:, k] >= BARRIER
    alive_est = [EstimateWithError.from_samples(r) for r in alive] if survival else []
    return [EstimateWithError.from_samples(r) for r in w], alive_est


def estimate_I_nested(H, horizons: Sequence[float], steps_per_unit=STEPS_PER_UNIT, n_paths=100_000, seed=0, method="auto", workers=1):
    """``I(T)`` for several horizons from prefixes of the same paths (see :func:`nested_estimates`)."""
    return nested_estimates(H, horizons, steps_per_unit, n_paths, seed, method, workers, survival=False)[0]


@dataclass
class RateFit:
    """Least-squares line through ``(log T, log I(T))``."""

    points: list
    slope: float
    slope_stderr: float
    intercept: float
    estimates: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "points": [[float(a), float(b)] for a, b in self.points],
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "intercept": self.intercept,
            "estimates": [e.as_dict() for e in self.estimates],
        }


def fit_rate(horizons: Sequence[float], estimates: Sequence[EstimateWithError]) -> RateFit:
    """Ordinary least squares on the log-log points.

    ``slope_stderr`` propagates the Monte Carlo errors of the estimates
    (delta method, treating them as independent); with three points a
    residual-based error would have a single degree of freedom.
    """
    if len(horizons) < 3:
        raise ValueError("a rate fit needs at least three horizons")
    x = np.log(np.asarray(horizons, dtype=float))
    vals = np.array([e.value for e in estimates])
    y = np.log(vals)
    sy = np.array([e.stderr for e in estimates]) / vals
    xc = x - x.mean()
    a = xc / np.dot(xc, xc)
    slope = float(np.dot(a, y))
    intercept = float(y.mean() - slope * x.mean())
    return RateFit(
        points=list(zip(x.tolist(), y.tolist())),
        slope=slope,
        slope_stderr=float(np.sqrt(np.dot(a * a, sy * sy))),
        intercept=intercept,
        estimates=list(estimates),
    )


def molchan_rate(H, horizons=(64, 256, 1024), steps_per_unit=STEPS_PER_UNIT, n_paths=100_000, seed=0, nested=True, workers=1) -> RateFit:
    """Fit the decay exponent of ``I(T)``; it should be close to ``H - 1``."""
    if nested:
        est = estimate_I_nested(H, horizons, steps_per_unit, n_paths, seed, workers=workers)
    else:
        est = [
            estimate_I(H, T, default_steps(T, steps_per_unit), n_paths, as_seed(seed).block(i), workers=workers)
            for i, T in enumerate(sorted(horizons))
        ]
    return fit_rate(sorted(horizons), est)


def sample_penalized(
    H,
    T,
    n_steps=None,
    n_paths=100_000,
    seed=0,
    *,
    ess_floor: float = DEFAULT_ESS_FLOOR,
    store_steps: int | None = None,
    functionals: Mapping[str, Callable] | None = None,
    weight: Callable | None = None,
    method="auto",
    workers=1,
) -> WeightedEnsemble:
    """Self-normalized importance sample of the penalized process ``X_{H,T}``.

    fBM paths on ``[0, T]`` are weighted by :func:`weight_penalized` and
    rescaled to ``[0, 1]``. ``weight`` replaces the weight function
    (``(block, grid) -> weights``), e.g. a constant for sanity checks.
    """
    H = check_hurst(H)
    n_steps = n_steps or default_steps(T)
    sampler = FBMSampler(H, TimeGrid(T, n_steps), method)
    ens = build_weighted(
        sampler,
        n_paths,
        seed,
        weight or _penalized_weights,
        scale=float(T) ** H,
        store_steps=store_steps,
        functionals=functionals,
        ess_floor=ess_floor,
        workers=workers,
    )
    ens.info.update(H=H, T=float(T), n_steps=n_steps)
    return ens


def persistence_probability(H, T, n_steps=None, n_draws=100_000, seed=0, method="auto", workers=1) -> EstimateWithError:
    """Fraction of fBM paths on ``[0, T]`` whose grid minimum stays ``>= -1``."""
    n_steps = n_steps or default_steps(T)
    sampler = FBMSampler(H, TimeGrid(T, n_steps), method)
    ok = np.empty(n_draws)
    for s, block in iter_chunks(sampler, n_draws, seed, workers=workers):
        ok[s : s + len(block)] = kernels.row_min_max(block)[0] >= BARRIER
    return EstimateWithError.from_samples(ok)


def sample_conditioned_rejection(
    H, T, n_steps=None, n_paths_target=1000, max_draws=1_000_000, seed=0, *, store_steps: int | None = None, method="auto"
) -> WeightedEnsemble:
    """Paths conditioned on ``min_{[0,T]} B_H >= -1``, rescaled to ``[0, 1]``.

    Accepted paths are the first ``n_paths_target`` successes in stream order.
    ``info['acceptance_rate']`` is successes over draws up to the last
    accepted path. Raises :class:`BudgetExhausted` when ``max_draws`` runs out.
    """
    H = check_hurst(H)
    n_steps = n_steps or default_steps(T)
    if store_steps is None:
        store_steps = n_steps
    if store_steps and n_steps % store_steps:
        raise ValueError(f"store_steps={store_steps} must divide n_steps={n_steps}")
    stride = n_steps // store_steps if store_steps else 0
    sampler = FBMSampler(H, TimeGrid(T, n_steps), method)
    seed = as_seed(seed)
    scale = float(T) ** H
    kept, feats = [], {"end": [], "min": [], "max": [], "raw_min": []}
    accepted = 0
    draws = 0
    chunk = sampler.default_chunk()
    start = 0
    while accepted < n_paths_target:
        if start >= max_draws:
            raise BudgetExhausted(f"{accepted} of {n_paths_target} paths accepted after {max_draws} draws")
        c = min(chunk, max_draws - start)
        block = sampler.chunk(seed, start, c)
        lo, hi = kernels.row_min_max(block)
        idx = np.flatnonzero(lo >= BARRIER)[: n_paths_target - accepted]
        if accepted + idx.size == n_paths_target:
            draws = start + int(idx[-1]) + 1
        accepted += idx.size
        sel = block[idx] / scale
        feats["end"].append(sel[:, -1])
        feats["min"].append(lo[idx] / scale)
        feats["max"].append(hi[idx] / scale)
        feats["raw_min"].append(lo[idx])
        if stride:
            kept.append(sel[:, ::stride])
        start += c
    features = {k: np.concatenate(v) for k, v in feats.items()}
    p = n_paths_target / draws
    return WeightedEnsemble(
        weights=np.ones(n_paths_target),
        normalizer=float(n_paths_target),
        ess=float(n_paths_target),
        features=features,
        paths=PathEnsemble(TimeGrid(1.0, store_steps), np.concatenate(kept)) if stride else None,
        info={
            "H": H,
            "T": float(T),
            "n_steps": n_steps,
            "draws": draws,
            "acceptance_rate": p,
            "acceptance_stderr": math.sqrt(p * (1 - p) / draws),
        },
    )
