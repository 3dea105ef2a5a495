"""Compiled inner loops for polynomial evaluation and Aberth-Ehrlich iteration.

Coefficients are ascending (``c[j]`` multiplies ``z**j``) complex128 arrays.
"""

import numpy as np
from numba import njit

_SPLIT = 134217729.0  # 2**27 + 1
_U = 2.0**-53

STATUS_CONVERGED = 0
STATUS_MAXITER = 1
STATUS_STAGNATED = 2


@njit(cache=True)
def newton_ratio(c, n, z):
    """Return ``(p(z)/p'(z), backward_error)``.

    For ``|z| > 1`` the reversed polynomial in ``1/z`` is evaluated, so
    nothing overflows for roots of large modulus.
    """
    az = abs(z)
    if az <= 1.0:
        p = c[n]
        dp = 0j
        s = abs(c[n])
        for j in range(n - 1, -1, -1):
            dp = dp * z + p
            p = p * z + c[j]
            s = s * az + abs(c[j])
        if s == 0.0:
            return 0j, 0.0
        if dp == 0:
            return complex(1e300, 0.0), abs(p) / s
        return p / dp, abs(p) / s
    w = 1.0 / z
    aw = abs(w)
    q = c[0]
    dq = 0j
    s = abs(c[0])
    for j in range(1, n + 1):
        dq = dq * w + q
        q = q * w + c[j]
        s = s * aw + abs(c[j])
    if s == 0.0:
        return 0j, 0.0
    den = n * q - w * dq
    if den == 0:
        return complex(1e300, 0.0), abs(q) / s
    return z * q / den, abs(q) / s


@njit(cache=True)
def backward_errors(c, n, z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        _, be = newton_ratio(c, n, z[i])
        out[i] = be
    return out


@njit(cache=True)
def aberth(c, z, maxit, stop, stall_window, stall_factor):
    """In-place Gauss-Seidel Aberth iteration on the start points ``z``.

    Returns ``(iterations, status, converged_mask)``. A root is frozen one
    update after its backward error drops below ``stop``. Stagnation means the
    worst unconverged backward error failed to shrink by ``stall_factor``
    over ``stall_window`` iterations.
    """
    n = z.shape[0]
    conv = np.zeros(n, np.bool_)
    history = np.full(maxit + 1, np.inf)
    it = 0
    while it < maxit:
        worst = 0.0
        nconv = 0
        for i in range(n):
            if conv[i]:
                nconv += 1
                continue
            r, be = newton_ratio(c, n, z[i])
            if be < stop:
                conv[i] = True
            elif be > worst:
                worst = be
            sr = 0.0
            si = 0.0
            zi = z[i]
            for j in range(n):
                if j != i:
                    dr = zi.real - z[j].real
                    di = zi.imag - z[j].imag
                    m2 = dr * dr + di * di
                    if m2 != 0.0:
                        sr += dr / m2
                        si -= di / m2
            s = complex(sr, si)
            den = 1.0 - r * s
            if den != 0:
                z[i] = zi - r / den
            else:
                z[i] = zi - r
        it += 1
        if nconv == n:
            return it, STATUS_CONVERGED, conv
        history[it] = worst
        if it > stall_window and worst > stall_factor * history[it - stall_window]:
            return it, STATUS_STAGNATED, conv
    for i in range(n):
        if not conv[i]:
            return it, STATUS_MAXITER, conv
    return it, STATUS_CONVERGED, conv


@njit(cache=True)
def newton_polygon_start(logabs, n):
    """Start points on circles whose radii come from the upper convex hull of
    ``(j, log|c_j|)``; one circle per hull edge, with that edge's root count."""
    hull = np.empty(n + 1, np.int64)
    h = 0
    for j in range(n + 1):
        if logabs[j] == -np.inf:
            continue
        while h >= 2:
            i0 = hull[h - 2]
            i1 = hull[h - 1]
            if (logabs[i1] - logabs[i0]) * (j - i0) <= (logabs[j] - logabs[i0]) * (i1 - i0):
                h -= 1
            else:
                break
        hull[h] = j
        h += 1
    z = np.empty(n, np.complex128)
    k = 0
    golden = 2.399963229728653  # golden angle, keeps circles' phases incommensurate
    for e in range(h - 1):
        i0 = hull[e]
        i1 = hull[e + 1]
        m = i1 - i0
        rad = np.exp((logabs[i0] - logabs[i1]) / m)
        phase0 = golden * e + 0.4
        for t in range(m):
            ang = 2.0 * np.pi * t / m + phase0 + 1e-3 * np.sin(7.0 * t + e)
            z[k] = rad * complex(np.cos(ang), np.sin(ang))
            k += 1
    return z


@njit(cache=True)
def _two_sum(a, b):
    s = a + b
    t = s - a
    return s, (a - (s - t)) + (b - t)


@njit(cache=True)
def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True)
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


@njit(cache=True)
def comp_horner(c, n, x):
    """Compensated Horner scheme (error-free transformations on real and
    imaginary parts); as accurate as Horner run in doubled precision."""
    sr = c[n].real
    si = c[n].imag
    xr = x.real
    xi = x.imag
    rr = 0.0
    ri = 0.0
    for j in range(n - 1, -1, -1):
        p1, e1 = _two_prod(sr, xr)
        p2, e2 = _two_prod(si, xi)
        p3, e3 = _two_prod(sr, xi)
        p4, e4 = _two_prod(si, xr)
        p5, e5 = _two_sum(p1, -p2)
        p6, e6 = _two_sum(p3, p4)
        s1, e7 = _two_sum(p5, c[j].real)
        s2, e8 = _two_sum(p6, c[j].imag)
        err_r = e1 - e2 + e5 + e7
        err_i = e3 + e4 + e6 + e8
        nr = rr * xr - ri * xi + err_r
        ni = rr * xi + ri * xr + err_i
        rr = nr
        ri = ni
        sr = s1
        si = s2
    return complex(sr + rr, si + ri)


@njit(cache=True)
def horner(c, n, x):
    p = c[n]
    for j in range(n - 1, -1, -1):
        p = p * x + c[j]
    return p


@njit(cache=True)
def min_pair_distance(z):
    n = z.shape[0]
    best = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            d = abs(z[i] - z[j]) / max(1.0, abs(z[i]))
            if d < best:
                best = d
    return best


@njit(cache=True)
def newton_ratios(c, n, z):
    """Vectorized :func:`newton_ratio`: arrays of p/p' and backward errors."""
    r = np.empty(z.shape[0], np.complex128)
    be = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        r[i], be[i] = newton_ratio(c, n, z[i])
    return r, be


@njit(cache=True)
def horner_many(c, n, z, compensated):
    out = np.empty(z.shape[0], np.complex128)
    for i in range(z.shape[0]):
        out[i] = comp_horner(c, n, z[i]) if compensated else horner(c, n, z[i])
    return out
