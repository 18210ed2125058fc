"""Exact fractional Brownian motion on uniform grids.

Two exact samplers are provided: Cholesky factorization of the covariance
matrix (any grid size that fits in memory) and circulant embedding of the
fractional Gaussian noise autocovariance (O(n log n) per path). Brownian
motion (H = 1/2) additionally has an independent-increments fast path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.fft

from .errors import FactorizationFailure, NegativeEigenvalue
from .rng import StreamNormals, as_seed

#: Normals per generated chunk; bounds peak memory of the streaming samplers.
CHUNK_NORMALS = 4_000_000

JITTER_START = 1e-12
JITTER_TRIES = 3
EIGEN_TOL = 1e-10

METHODS = ("cholesky", "circulant", "increments", "auto")


def check_hurst(H: float) -> float:
    H = float(H)
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst parameter must lie in (0, 1), got {H}")
    return H


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0 = t_0 < ... < t_n = horizon``."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass
class Path:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_steps + 1,):
            raise ValueError(f"expected {self.grid.n_steps + 1} values, got shape {self.values.shape}")


class PathEnsemble:
    """A stack of paths sharing one grid; behaves as a sequence of :class:`Path`."""

    def __init__(self, grid: TimeGrid, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != grid.n_steps + 1:
            raise ValueError(f"values must have shape (count, {grid.n_steps + 1}), got {values.shape}")
        self.grid = grid
        self.values = values

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return PathEnsemble(self.grid, self.values[idx])
        return Path(self.grid, self.values[idx])

    def __iter__(self):
        for row in self.values:
            yield Path(self.grid, row)

    def __repr__(self):
        return f"PathEnsemble(count={len(self)}, horizon={self.grid.horizon}, n_steps={self.grid.n_steps})"

    @classmethod
    def from_paths(cls, paths) -> PathEnsemble:
        paths = list(paths)
        if not paths:
            raise ValueError("need at least one path")
        return cls(paths[0].grid, np.stack([p.values for p in paths]))


# ------------------------------------------------------------- covariance


def fbm_covariance(H, s, t):
    """``0.5 * (t**2H + s**2H - |t - s|**2H)``; broadcasts over arrays."""
    h2 = 2.0 * check_hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be nonnegative")
    out = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def build_cov_matrix(H: float, grid: TimeGrid) -> np.ndarray:
    t = grid.times[1:]
    return fbm_covariance(H, t[:, None], t[None, :])


def reversed_covariance(H: float, grid: TimeGrid) -> np.ndarray:
    """Analytic covariance of ``t -> B_H(T) - B_H(T - t)`` on the grid (time 0 excluded)."""
    T = grid.horizon
    t = grid.times[1:]
    s_, t_ = t[:, None], t[None, :]
    R = lambda a, b: fbm_covariance(H, np.clip(a, 0.0, None), np.clip(b, 0.0, None))  # noqa: E731
    return R(T, T) - R(T, T - t_) - R(T - s_, T) + R(T - s_, T - t_)


def cholesky_factor(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying with escalating diagonal jitter."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    scale = np.trace(cov) / cov.shape[0]
    jitter = JITTER_START
    for _ in range(JITTER_TRIES):
        try:
            return np.linalg.cholesky(cov + jitter * scale * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationFailure(f"covariance not positive definite after {JITTER_TRIES} jitter attempts")


def fgn_autocovariance(H: float, n: int) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags ``0..n``."""
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * check_hurst(H)
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def circulant_eigenvalues(H: float, n: int) -> np.ndarray:
    """Eigenvalues of the size-``2n`` circulant embedding of the fGn covariance.

    Values in ``[-EIGEN_TOL * max, 0)`` are clamped to zero; anything more
    negative raises :class:`NegativeEigenvalue`.
    """
    gamma = fgn_autocovariance(H, n)
    row = np.concatenate([gamma, gamma[n - 1 : 0 : -1]])
    lam = scipy.fft.rfft(row).real
    floor = -EIGEN_TOL * lam.max()
    if lam.min() < floor:
        raise NegativeEigenvalue(f"circulant embedding eigenvalue {lam.min():.3e} for H={H}, n={n}")
    return np.clip(lam, 0.0, None)


# --------------------------------------------------------------- samplers


class FBMSampler:
    """Precomputed exact sampler; ``chunk`` produces paths for a stream range.

    ``method`` is one of ``cholesky``, ``circulant``, ``increments`` (only for
    H = 1/2) or ``auto`` (increments for H = 1/2, otherwise circulant with a
    Cholesky fallback when the embedding fails).
    """

    def __init__(self, H: float, grid: TimeGrid, method: str = "auto"):
        self.H = check_hurst(H)
        self.grid = grid
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        n = grid.n_steps
        if method == "auto":
            if self.H == 0.5:
                method = "increments"
            else:
                try:
                    self._lam = circulant_eigenvalues(self.H, n)
                    method = "circulant"
                except NegativeEigenvalue:
                    method = "cholesky"
        if method == "increments" and self.H != 0.5:
            raise ValueError("independent increments are exact only for H = 0.5")
        self.method = method
        if method == "cholesky":
            self._chol = cholesky_factor(build_cov_matrix(self.H, grid))
            self.normals_per_path = n
        elif method == "circulant":
            if not hasattr(self, "_lam"):
                self._lam = circulant_eigenvalues(self.H, n)
            m = 2 * n
            self._scale_real = np.sqrt(self._lam[[0, n]] / m)
            self._scale_cplx = np.sqrt(self._lam[1:n] / (2 * m))
            self.normals_per_path = m
        else:
            self.normals_per_path = n

    def default_chunk(self) -> int:
        return max(1, CHUNK_NORMALS // self.normals_per_path)

    def chunk(self, seed, start: int, count: int) -> np.ndarray:
        """Paths for streams ``start .. start + count - 1`` as a ``(count, n+1)`` array."""
        n = self.grid.n_steps
        z = StreamNormals(seed).fill(start, count, self.normals_per_path)
        out = np.empty((count, n + 1))
        out[:, 0] = 0.0
        if self.method == "cholesky":
            # row by row: a batched matmul may round differently with the batch shape
            for i in range(count):
                np.dot(self._chol, z[i], out=out[i, 1:])
            return out
        if self.method == "circulant":
            m = 2 * n
            half = np.empty((count, n + 1), dtype=complex)
            half[:, 0] = self._scale_real[0] * z[:, 0]
            half[:, n] = self._scale_real[1] * z[:, 1]
            half[:, 1:n].real = self._scale_cplx * z[:, 2 : n + 1]
            half[:, 1:n].imag = self._scale_cplx * z[:, n + 1 :]
            del z
            incr = scipy.fft.irfft(half, n=m, axis=1)[:, :n]
            incr *= m * self.grid.dt**self.H
        else:
            incr = z
            incr *= math.sqrt(self.grid.dt)
        np.cumsum(incr, axis=1, out=out[:, 1:])
        return out


def iter_chunks(sampler: FBMSampler, count: int, seed, chunk_size: int | None = None, workers: int = 1) -> Iterator:
    """Yield ``(start, values)`` blocks covering ``count`` paths in stream order.

    Output is identical for every ``workers``/``chunk_size`` combination
    because each path owns its stream.
    """
    seed = as_seed(seed)
    chunk_size = chunk_size or sampler.default_chunk()
    starts = list(range(0, count, chunk_size))
    sizes = [min(chunk_size, count - s) for s in starts]
    if workers <= 1 or len(starts) <= 1:
        for s, c in zip(starts, sizes):
            yield s, sampler.chunk(seed, s, c)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # bounded look-ahead keeps memory at ~workers chunks
        pending = []
        for s, c in zip(starts, sizes):
            pending.append((s, pool.submit(sampler.chunk, seed, s, c)))
            if len(pending) > workers:
                s0, fut = pending.pop(0)
                yield s0, fut.result()
        for s0, fut in pending:
            yield s0, fut.result()


def sample_fbm(H, grid: TimeGrid, count: int, seed, method: str = "auto", workers: int = 1) -> PathEnsemble:
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return PathEnsemble(grid, np.empty((0, grid.n_steps + 1)))
    sampler = FBMSampler(H, grid, method)
    out = np.empty((count, grid.n_steps + 1))
    for s, block in iter_chunks(sampler, count, seed, workers=workers):
        out[s : s + len(block)] = block
    return PathEnsemble(grid, out)


def sample_fbm_cholesky(H, grid: TimeGrid, count: int, seed, workers: int = 1) -> PathEnsemble:
    return sample_fbm(H, grid, count, seed, method="cholesky", workers=workers)


def sample_fbm_circulant(H, grid: TimeGrid, count: int, seed, workers: int = 1) -> PathEnsemble:
    """Circulant-embedding sampler; raises :class:`NegativeEigenvalue` instead of falling back."""
    return sample_fbm(H, grid, count, seed, method="circulant", workers=workers)


# ------------------------------------------------------- path transforms


def _values(path):
    return path.values if isinstance(path, (Path, PathEnsemble)) else np.asarray(path, dtype=float)


def _wrap(path, values):
    if isinstance(path, PathEnsemble):
        return PathEnsemble(path.grid, values)
    if isinstance(path, Path):
        return Path(path.grid, values)
    return values


def time_reverse(path):
    """``t_i -> v[n] - v[n - i]``; the reversed path again starts at 0."""
    v = _values(path)
    return _wrap(path, v[..., -1:] - v[..., ::-1])


def running_min(path):
    return _wrap(path, np.minimum.accumulate(_values(path), axis=-1))


def running_max(path):
    return _wrap(path, np.maximum.accumulate(_values(path), axis=-1))


def rescale(path, T: float, H: float):
    """Self-similar rescaling ``t -> T**-H * B(T t)`` onto ``[0, 1]``."""
    check_hurst(H)
    scaled = _values(path) / float(T) ** H
    if isinstance(path, (Path, PathEnsemble)):
        if not math.isclose(path.grid.horizon, T, rel_tol=1e-12):
            raise ValueError(f"path horizon {path.grid.horizon} does not match T={T}")
        grid = TimeGrid(1.0, path.grid.n_steps)
        return PathEnsemble(grid, scaled) if isinstance(path, PathEnsemble) else Path(grid, scaled)
    return scaled
