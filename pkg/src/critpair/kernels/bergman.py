"""Finite-N Bergman kernels, their conditional (deflated) versions and mixed
Wirtinger derivatives d_z^a d_wbar^b K(z, w) for a, b <= 2.

Derivative arrays are returned as ``exp(log_scale) * values`` so that
(1+|z|^2)^N never overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from ..errors import DegenerateDiagonalError
from .logcomplex import CANCELLATION_THRESHOLD, LogComplex

SU2_EXACT = "su2_exact"
RADIAL_SUM = "radial_sum"
DEFLATED = "deflated"

ORDER = 3  # derivative orders 0, 1, 2 in each variable


@dataclass(frozen=True, eq=False)
class BergmanKernel:
    """Kernel of kind ``su2_exact`` ((1 + z wbar)^N), ``radial_sum``
    (sum exp(2 b_j) (z wbar)^j) or ``deflated`` (``base`` conditioned at ``xi``)."""

    kind: str
    N: int
    basis_norms: Optional[np.ndarray] = None
    base: Optional["BergmanKernel"] = None
    xi: Optional[complex] = None
    rank_one: bool = False

    @property
    def is_deflated(self) -> bool:
        return self.kind == DEFLATED


def su2_kernel(N: int) -> BergmanKernel:
    return BergmanKernel(SU2_EXACT, N)


def radial_kernel(basis_norms) -> BergmanKernel:
    b = np.asarray(basis_norms, dtype=float)
    return BergmanKernel(RADIAL_SUM, b.size - 1, basis_norms=b)


def deflated(base: BergmanKernel, xi: complex, rank_one: bool = False) -> BergmanKernel:
    """K^xi(z, w) = K(z, w) - K(z, xi) K(xi, w) / K(xi, xi).

    For an su2 base the closed form in the Moebius coordinate is used unless
    ``rank_one`` forces the generic subtraction.
    """
    if base.is_deflated:
        raise ValueError("base kernel is already deflated")
    return BergmanKernel(DEFLATED, base.N, base=base, xi=complex(xi), rank_one=rank_one)


def kernel_for(ensemble) -> BergmanKernel:
    """Kernel of a GaussianEnsemble or ConditionalEnsemble."""
    if hasattr(ensemble, "deflation_vector"):
        return deflated(kernel_for(ensemble.base), ensemble.xi)
    if ensemble.kind == "su2":
        return su2_kernel(ensemble.N)
    return radial_kernel(ensemble.basis_norms)


@dataclass(frozen=True, eq=False)
class KernelDerivatives:
    """``D[a][b] = exp(log_scale) * values[..., a, b]``."""

    log_scale: np.ndarray
    values: np.ndarray
    cancelled: np.ndarray

    def D(self, a: int, b: int) -> LogComplex:
        return LogComplex.from_complex(self.values[..., a, b], self.log_scale)

    def __getitem__(self, a):
        return [self.D(a, b) for b in range(ORDER)]


# ----------------------------------------------------------------- helpers

def _log1p_c(y):
    """Complex log(1 + y) accurate for small |y|."""
    y = np.asarray(y, dtype=np.complex128)
    x, t = y.real, y.imag
    re = 0.5 * np.log1p(2 * x + x * x + t * t)
    im = np.arctan2(t, 1 + x)
    return re + 1j * im


def _bmul(X, Y):
    """Truncated product of bivariate jets (coefficient arrays [..., 3, 3])."""
    out = np.zeros(np.broadcast_shapes(X.shape, Y.shape), np.complex128)
    for i in range(ORDER):
        for j in range(ORDER):
            for i1 in range(i + 1):
                for j1 in range(j + 1):
                    out[..., i, j] += X[..., i1, j1] * Y[..., i - i1, j - j1]
    return out


_FACT = np.array([1.0, 1.0, 2.0])
_JET_TO_DERIV = np.outer(_FACT, _FACT)


def _falling(n, k):
    out = 1.0
    for i in range(k):
        out *= n - i
    return out


# ----------------------------------------------------------------- su2 closed form

def _su2_derivs(N, z, w):
    x = z * np.conj(w)
    q = 1.0 + x
    wb = np.conj(w)
    zero = q == 0
    qs = np.where(zero, 1.0, q)
    logq = np.log(qs)
    log_scale = np.where(zero, 0.0, N * logq.real)
    phase = np.exp(1j * N * logq.imag)
    # f^(m)(x) / |q|^N
    fm = []
    for m in range(2 * ORDER - 1):
        reg = _falling(N, m) * phase * qs ** (-m)
        if np.any(zero):
            direct = _falling(N, m) * (1.0 if N == m else 0.0)
            reg = np.where(zero, direct, reg)
        fm.append(reg)
    vals = np.zeros(x.shape + (ORDER, ORDER), np.complex128)
    for a in range(ORDER):
        for b in range(ORDER):
            acc = 0
            for k in range(min(a, b) + 1):
                acc = acc + math.comb(a, k) * _falling(b, k) * z ** (b - k) * wb ** (a - k) * fm[a + b - k]
            vals[..., a, b] = acc
    return log_scale, vals


# ----------------------------------------------------------------- radial sums

@njit(cache=True)
def _radial_derivs_kernel(twob, z, w):
    n = twob.shape[0] - 1
    S = z.shape[0]
    log_scale = np.empty(S)
    vals = np.zeros((S, 3, 3), np.complex128)
    ff = np.zeros((n + 1, 3))
    for j in range(n + 1):
        ff[j, 0] = 1.0
        ff[j, 1] = j
        ff[j, 2] = j * (j - 1)
    for s in range(S):
        az = abs(z[s])
        aw = abs(w[s])
        lz = np.log(az) if az > 0 else -np.inf
        lw = np.log(aw) if aw > 0 else -np.inf
        pz = np.angle(z[s])
        pw = -np.angle(w[s])
        m = -np.inf
        for j in range(n + 1):
            for a in range(min(j, 2) + 1):
                for b in range(min(j, 2) + 1):
                    e = twob[j] + np.log(ff[j, a] * ff[j, b])
                    if j - a > 0:
                        e += (j - a) * lz
                    if j - b > 0:
                        e += (j - b) * lw
                    if e > m:
                        m = e
        log_scale[s] = m
        for a in range(3):
            for b in range(3):
                sr = 0.0
                si = 0.0
                cr = 0.0
                ci = 0.0
                for j in range(max(a, b), n + 1):
                    e = twob[j] + np.log(ff[j, a] * ff[j, b]) - m
                    if j - a > 0:
                        e += (j - a) * lz
                    if j - b > 0:
                        e += (j - b) * lw
                    if e == -np.inf:
                        continue
                    mag = np.exp(e)
                    ph = (j - a) * pz + (j - b) * pw
                    tr = mag * np.cos(ph)
                    ti = mag * np.sin(ph)
                    t = sr + tr
                    if abs(sr) >= abs(tr):
                        cr += (sr - t) + tr
                    else:
                        cr += (tr - t) + sr
                    sr = t
                    t = si + ti
                    if abs(si) >= abs(ti):
                        ci += (si - t) + ti
                    else:
                        ci += (ti - t) + si
                    si = t
                vals[s, a, b] = complex(sr + cr, si + ci)
    return log_scale, vals


def _radial_derivs(basis_norms, z, w):
    shape = np.broadcast_shapes(np.shape(z), np.shape(w))
    zf = np.broadcast_to(z, shape).astype(np.complex128).ravel()
    wf = np.broadcast_to(w, shape).astype(np.complex128).ravel()
    ls, vals = _radial_derivs_kernel(2.0 * basis_norms, zf, wf)
    return ls.reshape(shape), vals.reshape(shape + (ORDER, ORDER))


# ----------------------------------------------------------------- deflation

def _su2_deflated_derivs(N, xi, z, w):
    """Closed form K^xi(z,w) = a(z) conj(a(w)) ((1 + u(z) conj(u(w)))^N - 1) with
    a(z) = (1 + conj(xi) z)^N / (1+|xi|^2)^(N/2) and u the Moebius coordinate,
    expanded in bivariate Taylor jets."""
    xc = np.conj(xi)
    S = 1.0 + abs(xi) ** 2
    wb = np.conj(w)
    cz = 1.0 + xc * z
    cw = 1.0 + xi * wb
    shape = np.broadcast_shapes(np.shape(z), np.shape(w))

    # (1 + rho h)^N jets of the frame factors
    rz, rw = xc / cz, xi / cw
    A = np.stack([np.ones_like(rz), N * rz, 0.5 * N * (N - 1) * rz**2], axis=-1)
    B = np.stack([np.ones_like(rw), N * rw, 0.5 * N * (N - 1) * rw**2], axis=-1)
    AB = A[..., :, None] * B[..., None, :]
    L0 = N * (np.log(cz) + np.log(cw)) - N * math.log(S)

    U = np.stack([(z - xi) / cz, S / cz**2, -xc * S / cz**3], axis=-1)
    V = np.stack([(wb - xc) / cw, S / cw**2, -xi * S / cw**3], axis=-1)
    Y = U[..., :, None] * V[..., None, :]
    y0 = Y[..., 0, 0]
    q0 = 1.0 + y0
    E = N * _log1p_c(y0)
    delta = Y / q0[..., None, None]
    delta[..., 0, 0] = 0.0

    big = E.real > 1.0
    sG = np.where(big, E.real, 0.0)
    lead = np.exp(E - sG)  # q0^N / exp(sG)
    G0 = np.where(big, lead - np.exp(-sG), np.expm1(np.where(big, 0.0, E)))
    Gj = np.zeros(shape + (ORDER, ORDER), np.complex128)
    power = delta
    for k in range(1, 5):
        Gj += math.comb(N, k) * power
        power = _bmul(power, delta)
    Gj *= lead[..., None, None]
    Gj[..., 0, 0] = G0

    J = _bmul(np.broadcast_to(AB, shape + (ORDER, ORDER)), Gj)
    log_scale = L0.real + sG
    vals = J * np.exp(1j * L0.imag)[..., None, None] * _JET_TO_DERIV
    return log_scale, vals


def _rank_one_deflated(base: BergmanKernel, xi, z, w):
    ls1, v1 = _derivs(base, z, w)
    lsz, vz = _derivs(base, z, xi)
    lsw, vw = _derivs(base, xi, w)
    lsx, vx = _derivs(base, np.asarray(xi), np.asarray(xi))
    ls2 = lsz + lsw - lsx
    m = np.maximum(ls1, ls2)
    t1 = v1 * np.exp(ls1 - m)[..., None, None]
    t2 = (vz[..., :, 0, None] * vw[..., None, 0, :]) / vx[..., 0, 0, None, None]
    t2 = t2 * np.exp(ls2 - m)[..., None, None]
    out = t1 - t2
    cancelled = np.abs(out) < CANCELLATION_THRESHOLD * np.maximum(np.abs(t1), np.abs(t2))
    return m, out, cancelled


def _derivs(K: BergmanKernel, z, w):
    if K.kind == SU2_EXACT:
        return _su2_derivs(K.N, z, w)
    if K.kind == RADIAL_SUM:
        return _radial_derivs(K.basis_norms, z, w)
    raise ValueError(f"unexpected kernel kind {K.kind!r}")


def kernel_derivs(K: BergmanKernel, z, w) -> KernelDerivatives:
    """Mixed Wirtinger derivatives at (z, w); scalars or broadcastable arrays."""
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    shape = np.broadcast_shapes(z.shape, w.shape)
    if K.kind == DEFLATED:
        if K.base.kind == SU2_EXACT and not K.rank_one:
            ls, vals = _su2_deflated_derivs(K.N, K.xi, z, w)
            cancelled = np.zeros(vals.shape, bool)
        else:
            ls, vals, cancelled = _rank_one_deflated(K.base, K.xi, z, w)
    else:
        ls, vals = _derivs(K, z, w)
        cancelled = np.zeros(vals.shape, bool)
    ls = np.broadcast_to(ls, shape)
    return KernelDerivatives(np.array(ls), np.array(vals), np.asarray(cancelled))


def kernel_eval(K: BergmanKernel, z, w) -> LogComplex:
    return kernel_derivs(K, z, w).D(0, 0)


def normalized_P(K: BergmanKernel, z, w):
    """|D11(z,w)| / sqrt(D11(z,z) D11(w,w)), evaluated in the log domain."""
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    off = kernel_derivs(K, z, w)
    dz = kernel_derivs(K, z, z)
    dw = kernel_derivs(K, w, w)
    with np.errstate(divide="ignore"):
        lo = np.log(np.abs(off.values[..., 1, 1])) + off.log_scale
        lz = np.log(np.abs(dz.values[..., 1, 1])) + dz.log_scale
        lw = np.log(np.abs(dw.values[..., 1, 1])) + dw.log_scale
    if np.any(~np.isfinite(lz)) or np.any(~np.isfinite(lw)):
        raise DegenerateDiagonalError("second-derivative kernel vanishes on the diagonal")
    out = np.exp(lo - 0.5 * (lz + lw))
    return out if out.ndim else float(out)
