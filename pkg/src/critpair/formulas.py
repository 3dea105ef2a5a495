"""Contour-integral formulas for the mean and variance of the number of
critical points in a disk, evaluated from exact kernel derivatives.

Radii are chart radii: the disk is {|u| < r} in the Moebius chart u centred
at xi (``fs_normal``) or u = z - xi (``euclidean``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContourCollisionError, KernelDegeneracyError, PreconditionError, QuadratureError
from .kernels.bergman import BergmanKernel, kernel_derivs
from .poly_core import FS_NORMAL, ComplexPolynomial, from_chart, log_derivative

IMAG_WARN = 1e-6
IMAG_FAIL = 1e-3
DIAG_THRESHOLD = 1e-12
NEGATIVE_TOL = 1e-6


@dataclass(frozen=True)
class QuadratureSpec:
    """Periodic trapezoid on ``nodes`` equispaced angles per circle.

    ``offset_pair`` shifts the second grid of the double integral by half a
    step so that theta1 = theta2 never occurs. ``richardson`` combines the
    results at nodes and 2*nodes as (4 V_2n - V_n)/3.
    """

    nodes: int = 256
    rule: str = "trapezoid_periodic"
    offset_pair: bool = True
    richardson: bool = False

    def __post_init__(self):
        if self.nodes < 16 or self.nodes % 2:
            raise PreconditionError("nodes must be an even integer >= 16")
        if self.rule != "trapezoid_periodic":
            raise PreconditionError(f"unsupported rule {self.rule!r}")

    def doubled(self) -> QuadratureSpec:
        return QuadratureSpec(2 * self.nodes, self.rule, self.offset_pair, False)


def pairing_radii(N: int, eps: float, gamma: float = 0.0):
    """(R-, R+) = N^(-1+Gamma-eps), N^(-1+Gamma+eps) as unscaled chart radii."""
    return N ** (-1.0 + gamma - eps), N ** (-1.0 + gamma + eps)


def scaled_radius(r, N: int, inverse: bool = False):
    """Unscaled chart radius r to the scaled variable r * sqrt(N) (or back)."""
    return r / math.sqrt(N) if inverse else r * math.sqrt(N)


def _check_radius(r, center, coord_mode):
    if not r > 0:
        raise PreconditionError("r must be positive")
    if coord_mode == FS_NORMAL and r * abs(center) >= 1:
        raise PreconditionError(
            f"chart radius {r} reaches the antipode of the centre (needs r < 1/|center| = {1 / abs(center):.6g})"
        )


def _contour(xi, r, M, coord_mode, offset=0.0):
    theta = 2 * np.pi * (np.arange(M) + offset) / M
    e = np.exp(1j * theta)
    z, dz = from_chart(r * e, xi, coord_mode)
    return theta, e, z, dz


def _check_real(value: complex, what: str) -> float:
    scale = max(1.0, abs(value.real))
    if abs(value.imag) > IMAG_FAIL * scale:
        raise QuadratureError(f"{what}: imaginary part {value.imag:.3g} is not negligible")
    if abs(value.imag) > IMAG_WARN * scale:
        warnings.warn(f"{what}: discarding imaginary part {value.imag:.3g}", RuntimeWarning, stacklevel=3)
    return float(value.real)


def _diag_terms(K, z):
    d = kernel_derivs(K, z, z)
    F = d.values[..., 1, 1]
    if np.any(~(F.real > 0)) or np.any(~np.isfinite(F)):
        raise KernelDegeneracyError("D11(z,z) is not positive on the contour")
    return d


def _expected_raw(K, xi, r, M, coord_mode):
    _, e, z, dz = _contour(xi, r, M, coord_mode)
    v = _diag_terms(K, z).values
    integrand = v[..., 2, 1] / v[..., 1, 1] * dz * e
    return r / M * np.sum(integrand)


def expected_count(K_xi: BergmanKernel, xi: complex, r: float, q: QuadratureSpec = QuadratureSpec(),
                   coord_mode: str = FS_NORMAL) -> float:
    """E[N_r] = (1/2 pi i) contour integral of d_z log D11(z,z) dz over |u| = r."""
    _check_radius(r, xi, coord_mode)
    val = _expected_raw(K_xi, xi, r, q.nodes, coord_mode)
    if q.richardson:
        val2 = _expected_raw(K_xi, xi, r, 2 * q.nodes, coord_mode)
        val = (4 * val2 - val) / 3
    return _check_real(complex(val), "expected_count")


def variance_integrand(K, z, w, tz):
    """d_z d_w 4 G(P(z,w)) = L_z L_w Q / (1 - Q) with Q = P^2, L = log Q.

    ``tz`` is the contour tangent dz/dtheta at z; it enters only the
    limiting value -c conj(t)/t used where 1 - Q < 1e-12.
    """
    d = kernel_derivs(K, z, w)
    dz, dw = _diag_terms(K, z), _diag_terms(K, w)
    off, vz, vw = d.values, dz.values, dw.values
    D11 = off[..., 1, 1]
    log_q = (
        2 * (np.log(np.abs(D11)) + d.log_scale)
        - np.log(vz[..., 1, 1].real) - dz.log_scale
        - np.log(vw[..., 1, 1].real) - dw.log_scale
    )
    Q = np.exp(log_q)
    Lz = off[..., 2, 1] / D11 - vz[..., 2, 1] / vz[..., 1, 1]
    Lw = np.conj(off[..., 1, 2] / D11) - vw[..., 2, 1] / vw[..., 1, 1]
    one_minus = -np.expm1(log_q)
    near = one_minus < DIAG_THRESHOLD
    with np.errstate(divide="ignore", invalid="ignore"):
        reg = Lz * Lw * Q / one_minus
    if np.any(near):
        c = (vz[..., 2, 2] * vz[..., 1, 1] - vz[..., 2, 1] * vz[..., 1, 2]) / vz[..., 1, 1] ** 2
        t = np.broadcast_to(tz, c.shape)
        reg = np.where(near, -c * np.conj(t) / t, reg)
    return reg


def _variance_raw(K, xi, r, M, offset_pair, coord_mode):
    th1, e1, z1, dz1 = _contour(xi, r, M, coord_mode)
    th2, e2, z2, dz2 = _contour(xi, r, M, coord_mode, 0.5 if offset_pair else 0.0)
    Z, W = z1[:, None], z2[None, :]
    tz = (1j * r * e1 * dz1)[:, None]
    I = variance_integrand(K, Z, W, tz)
    weight = (dz1 * e1)[:, None] * (dz2 * e2)[None, :]
    return (r / M) ** 2 * np.sum(I * weight)


def variance_count(K_xi: BergmanKernel, xi: complex, r: float, q: QuadratureSpec = QuadratureSpec(),
                   coord_mode: str = FS_NORMAL) -> float:
    """Var[N_r] = (1/2 pi i)^2 double contour integral of d_z d_w Cov(log|p'(z)|^2, log|p'(w)|^2)."""
    _check_radius(r, xi, coord_mode)
    val = _variance_raw(K_xi, xi, r, q.nodes, q.offset_pair, coord_mode)
    if q.richardson:
        val2 = _variance_raw(K_xi, xi, r, 2 * q.nodes, q.offset_pair, coord_mode)
        val = (4 * val2 - val) / 3
    out = _check_real(complex(val), "variance_count")
    if out < -NEGATIVE_TOL:
        raise QuadratureError(f"variance_count is negative ({out:.3g})")
    return out


def argument_principle_count(p: ComplexPolynomial, center: complex, r: float,
                             q: QuadratureSpec = QuadratureSpec(), coord_mode: str = "euclidean",
                             max_nodes: int = 1 << 16) -> float:
    """Winding number (1/2 pi i) contour integral of p'/p over |u| = r.

    Nodes are doubled until the value is stable and within 1e-6 of an integer;
    failure to get there means a root lies too close to the contour.
    """
    _check_radius(r, center, coord_mode)
    M = q.nodes
    prev = None
    while M <= max_nodes:
        _, e, z, dz = _contour(center, r, M, coord_mode)
        ld = log_derivative(p, z)
        if not np.all(np.isfinite(ld)):
            raise ContourCollisionError("polynomial vanishes on the contour")
        val = complex(r / M * np.sum(ld * dz * e))
        if prev is not None and abs(val - prev) < 1e-9 and abs(val.real - round(val.real)) < 1e-6:
            return val.real
        prev = val
        M *= 2
    raise ContourCollisionError("winding-number quadrature did not converge: root near the contour")
