"""Scaling limits of the conditional kernel near the conditioning point.

Scaled coordinates: a point u of the Moebius chart centred at xi is written
u = z / sqrt(N); ``z`` below always denotes the scaled variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SingularRadiusError
from ..poly_core import FS_NORMAL, from_chart
from .bergman import BergmanKernel, deflated, kernel_derivs, normalized_P, su2_kernel

_SERIES_CUTOFF = 1e-6


def _E(x):
    """expm1(x)/x, analytic at 0."""
    x = np.asarray(x, dtype=np.complex128)
    small = np.abs(x) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x / 2.0 + x * x / 6.0, np.expm1(safe) / safe)


def universal_P(u, v):
    """|1 - exp(-u conj v)| exp(-|u-v|^2/2) / sqrt((1 - exp(-|u|^2))(1 - exp(-|v|^2))).

    Evaluated as |E(-u conj v)| exp(-|u-v|^2/2) / sqrt(E(-|u|^2) E(-|v|^2)) with
    E(x) = expm1(x)/x, which removes the 0/0 at u, v -> 0.
    """
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    num = np.abs(_E(-u * np.conj(v))) * np.exp(-0.5 * np.abs(u - v) ** 2)
    den = np.sqrt((_E(-np.abs(u) ** 2) * _E(-np.abs(v) ** 2)).real)
    out = num / den
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PotentialJet:
    """2-jet at xi of phi_N = log ||sigma_N||^-2 in the normal chart, plus scaling data."""

    N: int
    phi0: float
    dphi: complex
    d2phi: complex
    ddbar_phi: float
    gamma: float = 0.0

    def dphi_at(self, uhat):
        """d phi_N / du at the (unscaled) chart point ``uhat``, from the jet."""
        return self.dphi + self.d2phi * uhat + self.ddbar_phi * np.conj(uhat)

    def dgamma_at(self, uhat):
        """d/du of the leading harmonic part gamma_N."""
        return self.dphi + self.d2phi * uhat

    def harmonic_part(self, uhat):
        """(gamma_N, its harmonic conjugate) as Re/Im of phi0 + 2 dphi u + d2phi u^2."""
        F = self.phi0 + 2 * self.dphi * uhat + self.d2phi * uhat**2
        return np.real(F), np.imag(F)


def potential_jet_fs(N: int, xi: complex, gamma: float = 0.0) -> PotentialJet:
    """Jet for sigma = 1 with the Fubini-Study metric.

    In the chart z = (u + xi)/(1 - conj(xi) u):
    phi_N = N [log(1+|xi|^2) + log(1+|u|^2) - log|1 - conj(xi) u|^2].
    """
    xc = complex(xi).conjugate()
    return PotentialJet(N, N * math.log1p(abs(xi) ** 2), N * xc, N * xc**2, float(N), gamma)


def _AB(z, w, pot: PotentialJet):
    s = 1.0 / math.sqrt(pot.N)
    zh, wh = z * s, w * s
    A = (pot.dphi_at(zh) + pot.dgamma_at(zh)) * s - np.conj(z) + 2 * np.conj(w)
    B = np.conj(pot.dphi_at(wh) + pot.dgamma_at(wh)) * s - w + 2 * z
    return A, B


def asymptotic_T(z, w, pot: PotentialJet):
    """T(z, w) of the off-diagonal expansion of d_z d_wbar of the conditional kernel:

    (1 - e^{-z wbar}) [1 + A B / 4] + e^{-z wbar} [1 - z wbar + z A / 2 + wbar B / 2]
    with A = (phi_z + gamma_z) N^{-1/2} - zbar + 2 wbar and
    B = (phi_wbar + gamma_wbar) N^{-1/2} - w + 2z, derivatives taken at the
    unscaled points.
    """
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    A, B = _AB(z, w, pot)
    x = z * np.conj(w)
    e = np.exp(-x)
    out = -np.expm1(-x) * (1 + 0.25 * A * B) + e * (1 - x + 0.5 * z * A + 0.5 * np.conj(w) * B)
    return out if out.ndim else complex(out)


def _wirtinger_dz(f, z, h):
    """d/dz = (d/dx - i d/dy)/2 by central differences."""
    fx = (f(z + h) - f(z - h)) / (2 * h)
    fy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    return 0.5 * (fx - 1j * fy)


def _check_r(r):
    if np.any(np.asarray(r) <= 0):
        raise SingularRadiusError("log T(z,z) is singular at r = 0")


def dlog_T_diagonal(r, theta, pot: PotentialJet):
    """d/dz log T(z, z) at z = r e^{i theta} for the printed T."""
    _check_r(r)
    z = np.asarray(r) * np.exp(1j * np.asarray(theta))

    def logT(x):
        return np.log(np.abs(asymptotic_T(x, x, pot)))

    return _wirtinger_dz(logT, z, 1e-6 * np.maximum(np.abs(z), 1e-3))


def exact_log_T(K_xi: BergmanKernel, pot: PotentialJet, z):
    """log T(z, z) from the exact conditional kernel, up to an additive constant:
    log d_u d_ubar K^xi at the unscaled chart point, minus phi_N there."""
    xi = K_xi.xi
    uh = np.asarray(z, dtype=np.complex128) / math.sqrt(pot.N)
    zz, dz = from_chart(uh, xi, FS_NORMAL)
    d = kernel_derivs(K_xi, zz, zz)
    D11 = np.abs(d.values[..., 1, 1]) * np.abs(dz) ** 2
    phi = pot.N * np.log1p(np.abs(zz) ** 2)
    return np.log(D11) + d.log_scale - phi


def exact_dlog_T_diagonal(K_xi: BergmanKernel, r, theta, pot: PotentialJet):
    """d/dz of :func:`exact_log_T` at z = r e^{i theta} (scaled variable)."""
    _check_r(r)
    z = np.asarray(r) * np.exp(1j * np.asarray(theta))
    return _wirtinger_dz(lambda x: exact_log_T(K_xi, pot, x), z, 1e-5 * np.maximum(np.abs(z), 1e-3))


def fit_dlog_T_constant(r, theta, values, N: int, gamma: float = 0.0) -> float:
    """Least-squares C_N in  d/dz log T ~ r^-1 e^{-i theta} / (1 + C_N r^-2 N^{-1+2 Gamma})."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    values = np.asarray(values, dtype=np.complex128)
    x = r**-2 * float(N) ** (-1 + 2 * gamma)
    y = (np.exp(-1j * theta) / (r * values) - 1).real
    return float(np.sum(x * y) / np.sum(x * x))


def scaling_grid(radius: float = 2.0, step: float = 0.25) -> np.ndarray:
    """Square-lattice points of spacing ``step`` in the closed disk |u| <= radius."""
    g = np.arange(-radius, radius + step / 2, step)
    pts = (g[:, None] + 1j * g[None, :]).ravel()
    return pts[np.abs(pts) <= radius + 1e-12]


def scaling_limit_error(N: int, xi: complex, radius: float = 2.0, step: float = 0.25):
    """(sup |P_N^xi - P_universal|, sup |P_N^xi(z,z) - 1|) over scaled grid pairs.

    P_N^xi is the normalized kernel of the exact su2 conditional kernel at the
    chart points u / sqrt(N) centred at xi.
    """
    G = scaling_grid(radius, step)
    U, V = (a.ravel() for a in np.meshgrid(G, G))
    K = deflated(su2_kernel(N), xi)
    s = 1.0 / math.sqrt(N)
    z, _ = from_chart(U * s, xi, FS_NORMAL)
    w, _ = from_chart(V * s, xi, FS_NORMAL)
    err = float(np.max(np.abs(normalized_P(K, z, w) - universal_P(U, V))))
    zd, _ = from_chart(G * s, xi, FS_NORMAL)
    diag = float(np.max(np.abs(normalized_P(K, zd, zd) - 1.0)))
    return err, diag
