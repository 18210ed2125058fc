"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names at the bottom of the module point at the implementation
chosen by :mod:`penfbm._backend`; ``*_numba`` and ``*_numpy`` stay importable
for equivalence tests and the benchmark script.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage, special

from ._backend import BACKEND, njit

PENALIZED, MEANDER, BESSEL = 0, 1, 2
KINDS = {"penalized": PENALIZED, "meander": MEANDER, "bessel": BESSEL}

#: Resampling attempts before a step that would leave (0, inf) is reflected.
MAX_RESAMPLE = 100

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------- weights


@njit
def penalized_log_weights_numba(values, dt):
    count, npts = values.shape
    out = np.empty(count)
    for i in range(count):
        m = values[i, 0]
        for j in range(1, npts):
            if values[i, j] < m:
                m = values[i, j]
        s = 0.5 * (math.exp(m - values[i, 0]) + math.exp(m - values[i, npts - 1]))
        for j in range(1, npts - 1):
            s += math.exp(m - values[i, j])
        out[i] = m - math.log(s * dt)
    return out


def penalized_log_weights_numpy(values, dt):
    m = values.min(axis=1)
    e = np.exp(m[:, None] - values)
    s = e.sum(axis=1) - 0.5 * (e[:, 0] + e[:, -1])
    return m - np.log(s * dt)


# ------------------------------------------------------------- extrema


@njit
def row_min_max_numba(values):
    count, npts = values.shape
    mins = np.empty(count)
    maxs = np.empty(count)
    for i in range(count):
        lo = values[i, 0]
        hi = lo
        for j in range(1, npts):
            v = values[i, j]
            if v < lo:
                lo = v
            elif v > hi:
                hi = v
        mins[i] = lo
        maxs[i] = hi
    return mins, maxs


def row_min_max_numpy(values):
    return values.min(axis=1), values.max(axis=1)


@njit
def sliding_range_max_numba(values, k):
    # max over windows values[i, j:j+k+1] of (max - min), monotone deques
    count, npts = values.shape
    out = np.zeros(count)
    qmax = np.empty(npts, dtype=np.int64)
    qmin = np.empty(npts, dtype=np.int64)
    for i in range(count):
        hmax = 0
        tmax = 0
        hmin = 0
        tmin = 0
        best = 0.0
        for j in range(npts):
            v = values[i, j]
            while tmax > hmax and values[i, qmax[tmax - 1]] <= v:
                tmax -= 1
            qmax[tmax] = j
            tmax += 1
            while tmin > hmin and values[i, qmin[tmin - 1]] >= v:
                tmin -= 1
            qmin[tmin] = j
            tmin += 1
            if qmax[hmax] < j - k:
                hmax += 1
            if qmin[hmin] < j - k:
                hmin += 1
            r = values[i, qmax[hmax]] - values[i, qmin[hmin]]
            if r > best:
                best = r
        out[i] = best
    return out


def sliding_range_max_numpy(values, k):
    size = int(min(k + 1, values.shape[1]))
    hi = ndimage.maximum_filter1d(values, size=size, axis=1, mode="nearest")
    lo = ndimage.minimum_filter1d(values, size=size, axis=1, mode="nearest")
    return (hi - lo).max(axis=1)


# ---------------------------------------------------------------- drifts


@njit
def _drift_penalized_scalar(t, x):
    v = 1.0 - t
    if v <= 0.0:
        return 1.0 / x if x > 0.0 else 0.0
    s = math.sqrt(v)
    u = x / s
    num = math.erf(u / _SQRT2)
    den = x * num + 2.0 * s * _INV_SQRT2PI * math.exp(-0.5 * u * u)
    return num / den


@njit
def _drift_meander_scalar(t, x):
    v = 1.0 - t
    if v <= 0.0:
        return 0.0
    s = math.sqrt(v)
    u = x / s
    return 2.0 * _INV_SQRT2PI * math.exp(-0.5 * u * u) / (s * math.erf(u / _SQRT2))


def _drift_penalized_array(t, x):
    v = 1.0 - t
    s = math.sqrt(v)
    u = x / s
    num = special.erf(u / _SQRT2)
    return num / (x * num + 2.0 * s * _INV_SQRT2PI * np.exp(-0.5 * u * u))


def _drift_meander_array(t, x):
    s = math.sqrt(1.0 - t)
    u = x / s
    return 2.0 * _INV_SQRT2PI * np.exp(-0.5 * u * u) / (s * special.erf(u / _SQRT2))


# --------------------------------------------------- resampling normals

_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


@njit
def _splitmix64(z):
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@njit
def _resample_normal(stream, step, attempt):
    h = _splitmix64(_splitmix64(np.uint64(stream)) + np.uint64(step) * np.uint64(128) + np.uint64(attempt))
    h2 = _splitmix64(h)
    u1 = (h >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    u2 = (h2 >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def _splitmix64_array(z):
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def _resample_normal_array(streams, step, attempt):
    with np.errstate(over="ignore"):
        h = _splitmix64_array(
            _splitmix64_array(streams.astype(np.uint64)) + np.uint64(step) * np.uint64(128) + np.uint64(attempt)
        )
        h2 = _splitmix64_array(h)
    u1 = (h >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    u2 = (h2 >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(2.0 * np.pi * u2)


# ------------------------------------------------------------ Euler scheme


@njit
def euler_numba(kind, x0, z, dt, noise_scale, streams, store_every):
    """Euler-Maruyama for the three drift families.

    ``z`` holds standard normals, one row per path; increments are
    ``noise_scale * z``. For meander and Bessel the positivity guard applies
    to ``x`` and ``x + 1`` respectively.
    """
    count, n = z.shape
    nstore = n // store_every + 1 if store_every > 0 else 0
    traj = np.empty((count, nstore))
    x_end = np.empty(count)
    run_min = np.empty(count)
    rejected = np.zeros(count, dtype=np.int64)
    shift = 1.0 if kind == BESSEL else 0.0
    tmax = 1.0 - dt
    for i in range(count):
        x = x0
        m = x0
        if nstore > 0:
            traj[i, 0] = x0
        for k in range(n):
            t = k * dt
            if t > tmax:
                t = tmax
            if kind == PENALIZED:
                drift = _drift_penalized_scalar(t, x - m)
            elif kind == MEANDER:
                drift = _drift_meander_scalar(t, x)
            else:
                drift = 1.0 / (x + 1.0)
            base = x + drift * dt
            xn = base + noise_scale * z[i, k]
            if kind != PENALIZED and xn + shift <= 0.0:
                rejected[i] += 1
                a = 0
                while xn + shift <= 0.0 and a < MAX_RESAMPLE and noise_scale > 0.0:
                    xn = base + noise_scale * _resample_normal(streams[i], k, a)
                    a += 1
                if xn + shift <= 0.0:
                    xn = abs(xn + shift) - shift
            x = xn
            if x < m:
                m = x
            if nstore > 0 and (k + 1) % store_every == 0:
                traj[i, (k + 1) // store_every] = x
        x_end[i] = x
        run_min[i] = m
    return traj, x_end, run_min, rejected


def euler_numpy(kind, x0, z, dt, noise_scale, streams, store_every):
    count, n = z.shape
    nstore = n // store_every + 1 if store_every > 0 else 0
    traj = np.empty((count, nstore))
    x = np.full(count, float(x0))
    m = x.copy()
    rejected = np.zeros(count, dtype=np.int64)
    shift = 1.0 if kind == BESSEL else 0.0
    if nstore > 0:
        traj[:, 0] = x0
    for k in range(n):
        t = min(k * dt, 1.0 - dt)
        if kind == PENALIZED:
            drift = _drift_penalized_array(t, x - m)
        elif kind == MEANDER:
            drift = _drift_meander_array(t, x)
        else:
            drift = 1.0 / (x + 1.0)
        base = x + drift * dt
        xn = base + noise_scale * z[:, k]
        if kind != PENALIZED:
            bad = np.flatnonzero(xn + shift <= 0.0)
            if bad.size:
                rejected[bad] += 1
                a = 0
                while bad.size and a < MAX_RESAMPLE and noise_scale > 0.0:
                    xn[bad] = base[bad] + noise_scale * _resample_normal_array(streams[bad], k, a)
                    bad = bad[xn[bad] + shift <= 0.0]
                    a += 1
                if bad.size:
                    xn[bad] = np.abs(xn[bad] + shift) - shift
        x = xn
        np.minimum(m, x, out=m)
        if nstore > 0 and (k + 1) % store_every == 0:
            traj[:, (k + 1) // store_every] = x
    return traj, x, m, rejected


if BACKEND == "numba":
    penalized_log_weights = penalized_log_weights_numba
    row_min_max = row_min_max_numba
    sliding_range_max = sliding_range_max_numba
    euler = euler_numba
else:
    penalized_log_weights = penalized_log_weights_numpy
    row_min_max = row_min_max_numpy
    sliding_range_max = sliding_range_max_numpy
    euler = euler_numpy
