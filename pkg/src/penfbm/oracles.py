"""Independent reference computations used to validate the closed forms
and samplers: adaptive quadrature, reflection-principle probabilities and
exact Brownian endpoint/minimum draws."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .rng import generator

_QUAD = dict(epsabs=1e-14, epsrel=1e-13, limit=200)


def _sf(variance, s):
    return 0.5 * special.erfc(s / math.sqrt(2.0 * variance))


def tail_integral_quad(t: float, x: float) -> float:
    """``int_x^inf (1 - Phi_{1-t}(s)) ds`` by adaptive quadrature."""
    if t >= 1.0:
        return 0.0
    var = 1.0 - t
    upper = x + 40.0 * math.sqrt(var)
    return integrate.quad(lambda s: _sf(var, s), x, upper, **{**_QUAD, "epsabs": 0.0})[0]


def meander_denominator_quad(t: float, x: float) -> float:
    """``int_0^x exp(-y^2 / 2(1-t)) dy`` by adaptive quadrature."""
    var = 1.0 - t
    return integrate.quad(lambda y: math.exp(-0.5 * y * y / var), 0.0, x, **_QUAD)[0]


def drift_penalized_quad(t: float, x: float) -> float:
    num = 1.0 - 2.0 * _sf(1.0 - t, x)
    return num / (x + 2.0 * tail_integral_quad(t, x))


def drift_meander_quad(t: float, x: float) -> float:
    return math.exp(-0.5 * x * x / (1.0 - t)) / meander_denominator_quad(t, x)


def stay_above_probability(level: float) -> float:
    """``P(min_{[0,1]} B >= -level) = 2 Phi(level) - 1`` (reflection principle)."""
    return float(special.erf(level / math.sqrt(2.0)))


def brownian_endpoint_and_min(start, duration: float, count: int, seed):
    """Exact joint draws of ``(B(duration), min B)`` for BM started at ``start``.

    The minimum of a Brownian bridge from ``a`` to ``b`` over time ``d`` is
    ``(a + b - sqrt((b - a)^2 - 2 d log U)) / 2`` with ``U`` uniform.
    """
    rng = generator(seed)
    end = start + math.sqrt(duration) * rng.standard_normal(count)
    u = rng.random(count)
    low = 0.5 * (start + end - np.sqrt((end - start) ** 2 - 2.0 * duration * np.log1p(-u)))
    return end, low


def forward_endpoint_gap(t: float, b: float, m: float, count: int, seed) -> np.ndarray:
    """Draws of ``B(1) - M(1)`` given ``B(t) = b`` and ``M(t) = m``."""
    end, low = brownian_endpoint_and_min(b, 1.0 - t, count, seed)
    return end - np.minimum(m, low)
