"""Dilogarithm and the covariance function G(t) = gamma^2/4 + Li2(t^2)/4
of log-moduli of correlated complex Gaussians, with its first two derivatives."""

import math

import numpy as np

from ..errors import DomainError

EULER_GAMMA = 0.57721566490153286061
PI2_6 = math.pi**2 / 6.0


def _li2_series(x: float) -> float:
    # sum x^k / k^2 for 0 <= x <= 1/2: converges like 2^-k
    total = 0.0
    term = x
    k = 1
    while True:
        add = term / (k * k)
        total += add
        if add < 1e-17 * total or term == 0.0:
            return total
        k += 1
        term *= x


def dilog(x: float) -> float:
    """Li2(x) = -int_0^x log(1-s)/s ds on [0, 1]."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"dilog defined here on [0, 1], got {x}")
    if x <= 0.5:
        return _li2_series(x)
    if x == 1.0:
        return PI2_6
    return PI2_6 - math.log(x) * math.log1p(-x) - _li2_series(1.0 - x)


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t < 1.0:
        raise DomainError(f"t must lie in [0, 1), got {t}")
    return t


def G(t: float) -> float:
    """Covariance of log|X| and log|Y| for unit complex Gaussians with |corr| = t."""
    t = _check_t(t)
    return EULER_GAMMA**2 / 4.0 + dilog(t * t) / 4.0


def G1(t: float) -> float:
    """G'(t) = -log(1 - t^2) / (2t)."""
    t = _check_t(t)
    if t < 1e-4:
        s = t * t
        return t * (0.5 + s / 4.0 + s * s / 6.0)
    return -math.log1p(-t * t) / (2.0 * t)


def G2(t: float) -> float:
    """G''(t) = 1/(1 - t^2) + log(1 - t^2) / (2 t^2)."""
    t = _check_t(t)
    s = t * t
    if t < 1e-4:
        return 0.5 + 0.75 * s + 5.0 * s * s / 6.0
    return 1.0 / (1.0 - s) + math.log1p(-s) / (2.0 * s)


G_vec = np.vectorize(G, otypes=[float])
G1_vec = np.vectorize(G1, otypes=[float])
G2_vec = np.vectorize(G2, otypes=[float])
