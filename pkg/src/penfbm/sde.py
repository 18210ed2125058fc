"""Brownian-case drifts and their Euler-Maruyama integration.

Three drift families on ``[0, 1]``:

* ``penalized``: ``c(t, x) = (2 Phi_{1-t}(x) - 1) / (x + 2 int_x^inf (1 - Phi_{1-t}(s)) ds)``
  evaluated at the distance ``x = X(t) - min_{s<=t} X(s)`` to the running minimum;
* ``meander``: ``exp(-x^2 / 2(1-t)) / int_0^x exp(-y^2 / 2(1-t)) dy``;
* ``bessel``: ``1 / (x + 1)`` (three-dimensional Bessel process started at 1,
  shifted to start at 0).

Also the meander transition density, the space-time harmonic function
``h(t, x) = 2 Phi_{1-t}(x) - 1``, the conditional expectation of
``B(1) - M(1)`` given the past, and the stochastic-integral representation
of the Brownian minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import kernels
from .gaussgen import PathEnsemble, TimeGrid
from .rng import StreamNormals, as_seed, generator

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)
_CF_SWITCH = 3.0
_CF_TERMS = 80


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class GaussianKernel:
    """Centred normal law with the given variance; zero variance is a point mass."""

    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"variance must be nonnegative, got {self.variance}")

    def cdf(self, x):
        return normal_cdf(self.variance, x)

    def pdf(self, x):
        return normal_pdf(self.variance, x)


def normal_cdf(variance, x):
    """``Phi_variance(x)`` via ``erfc``, accurate in both tails."""
    x = np.asarray(x, dtype=float)
    if variance < 0:
        raise ValueError(f"variance must be nonnegative, got {variance}")
    if variance == 0:
        return _out(np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5)))
    return _out(0.5 * special.erfc(-x / math.sqrt(2.0 * variance)))


def normal_pdf(variance, x):
    x = np.asarray(x, dtype=float)
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    return _out(np.exp(-0.5 * x * x / variance) / math.sqrt(2.0 * math.pi * variance))


def _check_t(t, allow_one=True):
    if not 0.0 <= t <= 1.0 or (t == 1.0 and not allow_one):
        raise ValueError(f"t must lie in [0, 1{']' if allow_one else ')'}, got {t}")


def tail_integral(t: float, x):
    """``int_x^inf (1 - Phi_{1-t}(s)) ds = sigma phi(x/sigma) - x (1 - Phi(x/sigma))``."""
    _check_t(t)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    if t == 1.0:
        return _out(np.zeros_like(x))
    s = math.sqrt(1.0 - t)
    u = x / s
    direct = s * _INV_SQRT2PI * np.exp(-0.5 * u * u) - 0.5 * x * special.erfc(u / _SQRT2)
    far = u > _CF_SWITCH
    if not np.any(far):
        return _out(direct)
    # sigma phi(u) (1 - u R(u)) with the Mills ratio R as a continued fraction;
    # avoids the cancellation of the direct form far in the tail
    uf = u[far] if u.ndim else u
    tail = np.zeros_like(uf)
    for k in range(_CF_TERMS, 1, -1):
        tail = k / (uf + tail)
    k1 = 1.0 / (uf + tail)
    value = s * _INV_SQRT2PI * np.exp(-0.5 * uf * uf) * k1 / (uf + k1)
    if u.ndim:
        direct[far] = value
        return _out(direct)
    return _out(value)


def drift_penalized(t: float, x):
    """``c(t, x)``; the denominator is rewritten as ``x erf(u) + 2 sigma phi(x/sigma)``."""
    _check_t(t)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    if t == 1.0:
        with np.errstate(divide="ignore"):
            return _out(np.where(x > 0, 1.0 / np.where(x > 0, x, 1.0), 0.0))
    s = math.sqrt(1.0 - t)
    u = x / s
    num = special.erf(u / _SQRT2)
    return _out(num / (x * num + 2.0 * s * _INV_SQRT2PI * np.exp(-0.5 * u * u)))


def meander_denominator(t: float, x):
    """``int_0^x exp(-y^2 / 2(1-t)) dy = sqrt(2 pi (1-t)) (Phi_{1-t}(x) - 1/2)``."""
    _check_t(t, allow_one=False)
    x = np.asarray(x, dtype=float)
    s = math.sqrt(1.0 - t)
    return _out(s * math.sqrt(math.pi / 2.0) * special.erf(x / (s * _SQRT2)))


def drift_meander(t: float, x):
    """``c^{me}(t, x)``; diverges like ``1/x`` as ``x -> 0+``."""
    _check_t(t, allow_one=False)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    s = math.sqrt(1.0 - t)
    return _out(np.exp(-0.5 * (x / s) ** 2) / meander_denominator(t, x))


def drift_bessel(y, t: float | None = None):
    """``1 / y``; ``t`` is accepted and ignored (the drift is time homogeneous)."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("y must be positive")
    return _out(1.0 / y)


def h_harmonic(t: float, x):
    """``P_x(B stays positive on [0, 1-t]) = 2 Phi_{1-t}(x) - 1``."""
    _check_t(t)
    return _out(2.0 * np.asarray(normal_cdf(1.0 - t, x)) - 1.0)


def meander_transition_density(t: float, x: float, s: float, y):
    """Density of ``X^{me}(t+s)`` at ``y`` given ``X^{me}(t) = x``."""
    if not (t >= 0 and s > 0 and t + s <= 1.0 + 1e-15 and x > 0):
        raise ValueError(f"need t >= 0, s > 0, t + s <= 1 and x > 0; got t={t}, s={s}, x={x}")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    rest = max(1.0 - t - s, 0.0)
    killed = np.asarray(normal_pdf(s, y - x)) - np.asarray(normal_pdf(s, y + x))
    ratio = (np.asarray(normal_cdf(rest, y)) - 0.5) / (normal_cdf(1.0 - t, x) - 0.5)
    return _out(np.maximum(killed * ratio, 0.0))


def cond_expect_endpoint_gap(t: float, b, m):
    """``E[B(1) - M(1) | F_t]`` given ``B(t) = b`` and running minimum ``M(t) = m``."""
    _check_t(t, allow_one=False)
    gap = np.asarray(b, dtype=float) - np.asarray(m, dtype=float)
    if np.any(gap < 0):
        raise ValueError("running minimum m must not exceed b")
    return _out(gap + 2.0 * np.asarray(tail_integral(t, gap)))


def zc_identity(s: float, x):
    """Both sides of ``Z(s) c(s) = (2 Phi_{1-s}(x) - 1) / E[-M(1)]`` at gap ``x``.

    Returns ``(direct, reconstructed)`` where the reconstruction multiplies
    ``Z = E[B(1) - M(1) | F_s] / E[-M(1)]`` by the drift ``c(s, x)``.
    """
    direct = (2.0 * np.asarray(normal_cdf(1.0 - s, x)) - 1.0) / SQRT_2_OVER_PI
    z = np.asarray(cond_expect_endpoint_gap(s, x, 0.0)) / SQRT_2_OVER_PI
    return _out(direct), _out(z * np.asarray(drift_penalized(s, x)))


def shiryaev_residuals(values, dt: float, expected_neg_min: float = SQRT_2_OVER_PI):
    """``M(1) - [E M(1) - 2 sum (Phi_{1-t_i}(B_i - M_i) - 1) (B_{i+1} - B_i)]`` per path.

    Left-point (Ito) sums on a uniform grid of ``[0, 1]``; ``values`` has one
    Brownian path per row starting at 0.
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    n = v.shape[1] - 1
    if not math.isclose(n * dt, 1.0, rel_tol=1e-9):
        raise ValueError("paths must live on [0, 1]")
    t = np.arange(n) * dt
    run_min = np.minimum.accumulate(v, axis=1)
    sigma = np.sqrt(1.0 - t)
    integrand = special.erfc(-(v[:, :-1] - run_min[:, :-1]) / (sigma * _SQRT2)) - 2.0
    stoch = -np.sum(integrand * np.diff(v, axis=1), axis=1)
    return run_min[:, -1] - (-expected_neg_min + stoch)


def shiryaev_residual(path, normalizer: float = SQRT_2_OVER_PI) -> float:
    return float(shiryaev_residuals(path.values, path.grid.dt, normalizer)[0])


# ------------------------------------------------------------------ Euler


@dataclass(frozen=True)
class DriftSpec:
    """Which SDE to integrate; ``start=None`` picks the kind's default."""

    kind: str
    start: float | None = None

    def __post_init__(self):
        if self.kind not in kernels.KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}; expected one of {sorted(kernels.KINDS)}")
        if self.start is not None:
            if self.kind == "meander" and not self.start > 0:
                raise ValueError("meander start must be positive")
            if self.kind == "bessel" and self.start < 0:
                raise ValueError("bessel start must be nonnegative")

    def initial(self, dt: float) -> float:
        if self.start is not None:
            return float(self.start)
        return math.sqrt(dt) if self.kind == "meander" else 0.0


@dataclass
class SDEResult:
    spec: DriftSpec
    n_steps: int
    x_end: np.ndarray
    run_min: np.ndarray
    rejected: np.ndarray
    paths: PathEnsemble | None = None

    @property
    def gap(self) -> np.ndarray:
        """``X(1) - min X`` per path."""
        return self.x_end - self.run_min

    @property
    def steps_rejected(self) -> int:
        return int(self.rejected.sum())


#: Normals per Euler chunk.
EULER_CHUNK_NORMALS = 4_000_000


def euler_simulate(spec: DriftSpec, n_steps: int, count: int, seed, zero_noise=False, store_steps: int = 0, workers=1) -> SDEResult:
    """Euler-Maruyama on ``[0, 1]`` with ``dt = 1 / n_steps``.

    Drifts are evaluated at the left time point, clamped to ``1 - dt``. For
    the penalized kind the running minimum is updated after each full step.
    Meander (and Bessel, on ``x + 1``) steps that would leave the positive
    half-line redraw their Gaussian increment up to
    :data:`~penfbm.kernels.MAX_RESAMPLE` times, then reflect; ``rejected``
    counts those steps per path. ``store_steps`` > 0 keeps trajectories
    subsampled to that many steps.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    if store_steps and n_steps % store_steps:
        raise ValueError(f"store_steps={store_steps} must divide n_steps={n_steps}")
    seed = as_seed(seed)
    dt = 1.0 / n_steps
    x0 = spec.initial(dt)
    kind = kernels.KINDS[spec.kind]
    noise = 0.0 if zero_noise else math.sqrt(dt)
    every = n_steps // store_steps if store_steps else 0
    chunk = max(1, EULER_CHUNK_NORMALS // n_steps)
    key = (seed.master_seed * 0x9E3779B97F4A7C15) & ((1 << 64) - 1)

    x_end = np.empty(count)
    run_min = np.empty(count)
    rejected = np.zeros(count, dtype=np.int64)
    traj = np.empty((count, store_steps + 1)) if store_steps else None
    normals = StreamNormals(seed)
    for s in range(0, count, chunk):
        c = min(chunk, count - s)
        if zero_noise:
            z = np.zeros((c, n_steps))
        else:
            z = normals.fill(s, c, n_steps)
        streams = np.array([(key + seed.stream_index + s + i) & ((1 << 64) - 1) for i in range(c)], dtype=np.uint64)
        tr, xe, rm, rj = kernels.euler(kind, x0, z, dt, noise, streams, every)
        x_end[s : s + c] = xe
        run_min[s : s + c] = rm
        rejected[s : s + c] = rj
        if traj is not None:
            traj[s : s + c] = tr
    paths = PathEnsemble(TimeGrid(1.0, store_steps), traj) if traj is not None else None
    return SDEResult(spec, n_steps, x_end, run_min, rejected, paths)


def drift_table(kind: str, t_grid, x_grid) -> np.ndarray:
    """Drift values on the lattice ``t_grid x x_grid`` (rows are times)."""
    t_grid = np.asarray(t_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    if kind == "penalized":
        return np.array([drift_penalized(t, x_grid) for t in t_grid])
    if kind == "meander":
        return np.array([drift_meander(t, x_grid) for t in t_grid])
    if kind == "bessel":
        return np.tile(np.asarray(drift_bessel(x_grid + 1.0)), (t_grid.size, 1))
    raise ValueError(f"unknown drift kind {kind!r}")


# -------------------------------------------------------- endpoint oracles


def rayleigh_cdf(x):
    """Endpoint law of the meander started at 0: ``1 - exp(-x^2 / 2)``."""
    x = np.asarray(x, dtype=float)
    return _out(np.where(x > 0, -np.expm1(-0.5 * x * x), 0.0))


def bessel3_endpoint_oracle(count: int, seed) -> np.ndarray:
    """Exact draws of ``X^{be}(1)``: ``|(1, 0, 0) + N(0, I_3)| - 1``."""
    g = generator(seed).standard_normal((count, 3))
    g[:, 0] += 1.0
    return np.sqrt((g * g).sum(axis=1)) - 1.0
