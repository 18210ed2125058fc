"""Weighted path ensembles and the streaming builder shared by the
penalized and limit-law samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import kernels
from .errors import DegenerateWeights
from .gaussgen import FBMSampler, PathEnsemble, TimeGrid, iter_chunks
from .stats import WeightedSample, ess, modulus_of_continuity

DEFAULT_ESS_FLOOR = 100.0


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, x) -> EstimateWithError:
        x = np.asarray(x, dtype=float)
        n = x.size
        if n < 2:
            raise ValueError("need at least two samples for a standard error")
        return cls(float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)), n)

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n": self.n}


@dataclass
class WeightedEnsemble:
    """Paths (optionally stored) with nonnegative importance weights.

    ``features`` holds per-path functionals evaluated at full resolution,
    always including ``end`` (value at the final time), ``min`` and ``max``.
    """

    weights: np.ndarray
    normalizer: float
    ess: float
    features: dict = field(default_factory=dict)
    paths: PathEnsemble | None = None
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.weights.size

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.normalizer

    def sample(self, name: str = "end") -> WeightedSample:
        return WeightedSample(self.features[name], self.weights)

    def at_time(self, t: float) -> WeightedSample:
        if self.paths is None:
            raise ValueError("ensemble was built without stored paths")
        times = self.paths.grid.times
        j = int(np.argmin(np.abs(times - t)))
        if not math.isclose(times[j], t, abs_tol=1e-12):
            raise ValueError(f"t={t} is not on the stored grid")
        return WeightedSample(self.paths.values[:, j], self.weights)

    def expect(self, values) -> float:
        """Self-normalized weighted mean of per-path ``values``."""
        return float(np.dot(self.probabilities, np.asarray(values, dtype=float)))


def modulus_functional(delta: float, n_steps: int | None = None) -> Callable:
    """Per-path ``w(delta)`` as a functional for :func:`build_weighted`.

    The grid supremum grows as the grid is refined, so ensembles on different
    grids are only comparable on a common one: with ``n_steps`` the paths are
    subsampled to that many steps on ``[0, 1]`` first (it must divide the
    ensemble's step count).
    """

    def fn(values, grid):
        if n_steps is None:
            return modulus_of_continuity(values, delta, dt=grid.dt)
        if grid.n_steps % n_steps:
            raise ValueError(f"n_steps={n_steps} must divide the grid's {grid.n_steps} steps")
        stride = grid.n_steps // n_steps
        return modulus_of_continuity(np.ascontiguousarray(values[:, ::stride]), delta, dt=grid.dt * stride)

    fn.__name__ = f"modulus_{delta:g}"
    return fn


def build_weighted(
    sampler: FBMSampler,
    count: int,
    seed,
    weight_fn: Callable[[np.ndarray, TimeGrid], np.ndarray],
    scale: float = 1.0,
    store_steps: int | None = None,
    functionals: Mapping[str, Callable] | None = None,
    ess_floor: float = DEFAULT_ESS_FLOOR,
    workers: int = 1,
) -> WeightedEnsemble:
    """Stream fBM chunks, weight them, and keep features plus optional paths.

    ``weight_fn`` sees the raw chunk on the sampler grid; features and
    stored paths use the values divided by ``scale`` on ``[0, 1]``.
    ``store_steps`` = ``None`` keeps the full grid, ``0`` keeps no paths and
    any other value subsamples to that many steps.
    """
    n = sampler.grid.n_steps
    out_grid = TimeGrid(1.0, n)
    functionals = dict(functionals or {})
    if store_steps is None:
        store_steps = n
    if store_steps and n % store_steps:
        raise ValueError(f"store_steps={store_steps} must divide n_steps={n}")
    stride = n // store_steps if store_steps else 0

    w = np.empty(count)
    feats = {k: np.empty(count) for k in ("end", "min", "max", *functionals)}
    stored = np.empty((count, store_steps + 1)) if store_steps else None
    for s, block in iter_chunks(sampler, count, seed, workers=workers):
        e = s + len(block)
        w[s:e] = weight_fn(block, sampler.grid)
        if scale != 1.0:
            block /= scale
        lo, hi = kernels.row_min_max(block)
        feats["end"][s:e] = block[:, -1]
        feats["min"][s:e] = lo
        feats["max"][s:e] = hi
        for name, fn in functionals.items():
            feats[name][s:e] = fn(block, out_grid)
        if stored is not None:
            stored[s:e] = block[:, ::stride]
    ensemble = WeightedEnsemble(
        weights=w,
        normalizer=float(w.sum()),
        ess=ess(w) if count else 0.0,
        features=feats,
        paths=PathEnsemble(TimeGrid(1.0, store_steps), stored) if stored is not None else None,
        info={"method": sampler.method},
    )
    if ensemble.ess < ess_floor:
        raise DegenerateWeights(ensemble.ess, ess_floor)
    return ensemble
