"""Complex polynomials: evaluation, derivatives, critical equations and roots."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _aberth
from .errors import ConvergenceError, InvalidReferenceSectionError, NoRootsError, PreconditionError

DEFAULT_TOL = 1e-10
COMPENSATED_MIN_DEGREE = 256
MAX_ITER = 200
STALL_WINDOW = 20
STALL_FACTOR = 1e-2

EUCLIDEAN = "euclidean"
FS_NORMAL = "fs_normal"
COORD_MODES = (EUCLIDEAN, FS_NORMAL)


@dataclass(frozen=True, eq=False)
class ComplexPolynomial:
    """Polynomial ``sum(coeffs[j] * z**j)`` with formal degree ``N``.

    Trailing zeros are allowed; ``numerical_degree`` is the largest index with a
    non-zero coefficient.
    """

    coeffs: np.ndarray
    N: int = -1

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128).ravel()
        if c.size == 0:
            c = np.zeros(1, np.complex128)
        N = self.N
        if N < 0:
            N = c.size - 1
        if c.size < N + 1:
            c = np.concatenate([c, np.zeros(N + 1 - c.size, np.complex128)])
        elif c.size > N + 1:
            if np.any(c[N + 1:] != 0):
                raise ValueError(f"coefficients beyond formal degree {N} are non-zero")
            c = c[: N + 1]
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "N", int(N))

    @classmethod
    def from_roots(cls, roots, leading=1.0) -> ComplexPolynomial:
        c = np.array([leading], dtype=np.complex128)
        for r in np.atleast_1d(np.asarray(roots, dtype=np.complex128)):
            c = np.convolve(c, np.array([-r, 1.0]))
        return cls(c)

    @classmethod
    def constant(cls, value, N=0) -> ComplexPolynomial:
        return cls(np.array([value], dtype=np.complex128), N)

    @property
    def numerical_degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def __call__(self, z):
        return evaluate(self, z)

    def __mul__(self, other):
        if isinstance(other, ComplexPolynomial):
            return ComplexPolynomial(np.convolve(self.coeffs, other.coeffs), self.N + other.N)
        return ComplexPolynomial(self.coeffs * other, self.N)

    __rmul__ = __mul__

    def __sub__(self, other: ComplexPolynomial) -> ComplexPolynomial:
        N = max(self.N, other.N)
        a = np.zeros(N + 1, np.complex128)
        a[: self.N + 1] += self.coeffs
        a[: other.N + 1] -= other.coeffs
        return ComplexPolynomial(a, N)

    def __repr__(self):
        return f"ComplexPolynomial(N={self.N}, coeffs={np.array2string(self.coeffs, precision=4)})"


def evaluate(p: ComplexPolynomial, z):
    """Evaluate ``p`` at a scalar or array ``z``.

    Uses compensated Horner for degree >= 256, plain Horner otherwise.
    """
    n = p.numerical_degree
    c = p.coeffs
    compensated = n >= COMPENSATED_MIN_DEGREE
    if np.ndim(z) == 0:
        kern = _aberth.comp_horner if compensated else _aberth.horner
        return complex(kern(c, n, complex(z)))
    zz = np.asarray(z, dtype=np.complex128)
    return _aberth.horner_many(c, n, zz.ravel(), compensated).reshape(zz.shape)


def log_derivative(p: ComplexPolynomial, z) -> np.ndarray:
    """p'(z)/p(z), overflow-safe for large |z| (reversed evaluation)."""
    zz = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    n = p.numerical_degree
    ratio, _ = _aberth.newton_ratios(p.coeffs, n, zz.ravel())
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 1.0 / ratio
    return out.reshape(zz.shape)


def evaluation_scale(p: ComplexPolynomial, z) -> np.ndarray:
    """``sum |c_j| |z|**j``: the scale against which backward errors are measured."""
    a = np.abs(p.coeffs[::-1])
    return np.polyval(a, np.abs(np.asarray(z)))


def derivative(p: ComplexPolynomial) -> ComplexPolynomial:
    if p.N == 0:
        return ComplexPolynomial(np.zeros(1, np.complex128), 0)
    j = np.arange(1, p.N + 1)
    return ComplexPolynomial(p.coeffs[1:] * j, p.N - 1)


def critical_polynomial(s: ComplexPolynomial, sigma: ComplexPolynomial) -> ComplexPolynomial:
    """``s' sigma - s sigma'``: its zeros away from those of ``sigma`` solve d(s/sigma) = 0."""
    if sigma.is_zero:
        raise InvalidReferenceSectionError("reference section sigma is identically zero")
    if sigma.numerical_degree == 0:
        return derivative(s) * complex(sigma.coeffs[0])
    a = np.convolve(derivative(s).coeffs, sigma.coeffs)
    b = np.convolve(s.coeffs, derivative(sigma).coeffs)
    N = max(s.N + sigma.N - 1, 0)
    out = np.zeros(N + 1, np.complex128)
    out[: a.size] += a
    out[: b.size] -= b
    return ComplexPolynomial(out, N)


@dataclass(frozen=True, eq=False)
class RootSet:
    roots: np.ndarray
    multiplicity: np.ndarray
    residuals: np.ndarray
    method: str = "aberth"
    iterations: int = 0
    converged: bool = True

    @property
    def total(self) -> int:
        return int(self.multiplicity.sum())

    def expanded(self) -> np.ndarray:
        """Roots repeated according to multiplicity."""
        return np.repeat(self.roots, self.multiplicity)

    def __len__(self):
        return self.roots.size


def _cluster(z: np.ndarray, tol: float):
    """Greedy agglomeration: clusters merge while their centroids lie within
    ``10 * tol**(1/m)`` (relative to max(1, |z|)), m being the merged size."""
    groups = [[i] for i in range(z.size)]
    if z.size < 2 or _aberth.min_pair_distance(z) >= 10.0 * math.sqrt(tol):
        return groups
    cents = list(z)
    while True:
        best = None
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                m = len(groups[a]) + len(groups[b])
                d = abs(cents[a] - cents[b]) / max(1.0, abs(cents[a]))
                if d < 10.0 * tol ** (1.0 / m) and (best is None or d < best[0]):
                    best = (d, a, b)
        if best is None:
            return groups
        _, a, b = best
        groups[a] = groups[a] + groups[b]
        cents[a] = z[groups[a]].mean()
        del groups[b], cents[b]


def _finish(c, n, z, zero_count, tol, method, iterations):
    groups = _cluster(z, tol)
    if len(groups) == z.size:
        roots = z.copy()
        mult = np.ones(z.size, dtype=np.int64)
    else:
        roots = np.array([z[g].mean() for g in groups], dtype=np.complex128)
        mult = np.array([len(g) for g in groups], dtype=np.int64)
    res = _aberth.backward_errors(c, n, roots) if roots.size else np.zeros(0)
    if zero_count:
        roots = np.concatenate([[0j], roots])
        mult = np.concatenate([[zero_count], mult])
        res = np.concatenate([[0.0], res])
    order = np.lexsort((roots.imag, roots.real))
    return RootSet(roots[order], mult[order], res[order], method, iterations)


def _companion_roots(c: np.ndarray) -> np.ndarray:
    n = c.size - 1
    comp = np.zeros((n, n), np.complex128)
    comp[0, :] = -c[n - 1::-1] / c[n]
    comp[np.arange(1, n), np.arange(n - 1)] = 1.0
    bal, _ = scipy.linalg.matrix_balance(comp)
    return scipy.linalg.eigvals(bal, check_finite=False)


def roots(p: ComplexPolynomial, tol: float = DEFAULT_TOL) -> RootSet:
    """All roots of ``p`` with multiplicities.

    Aberth-Ehrlich from Newton-polygon start circles; on stagnation or iteration
    exhaustion, balanced companion-matrix eigenvalues polished by Aberth.
    """
    nd = p.numerical_degree
    if nd < 1:
        raise NoRootsError("polynomial of numerical degree 0 has no roots")
    c = np.array(p.coeffs[: nd + 1])
    nz = np.flatnonzero(c)
    zero_count = int(nz[0])
    c = c[zero_count:]
    c = c / np.abs(c).max()
    n = c.size - 1
    if n == 0:
        return RootSet(np.array([0j]), np.array([zero_count]), np.zeros(1))
    stop = max(2.0 * n * 2.0**-53, 1e-15)
    if n == 1:
        z = np.array([-c[0] / c[1]])
        return _finish(c, n, z, zero_count, tol, "direct", 0)
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(c))
    z = _aberth.newton_polygon_start(logabs, n)
    its, status, _ = _aberth.aberth(c, z, MAX_ITER, stop, STALL_WINDOW, STALL_FACTOR)
    method = "aberth"
    if status != _aberth.STATUS_CONVERGED:
        method = "companion"
        z = _companion_roots(c).astype(np.complex128)
        more, status, _ = _aberth.aberth(c, z, MAX_ITER, stop, STALL_WINDOW, STALL_FACTOR)
        its += more
    rs = _finish(c, n, z, zero_count, tol, method, its)
    if not np.all(np.isfinite(rs.roots)) or np.any(rs.residuals > tol):
        best = RootSet(rs.roots, rs.multiplicity, rs.residuals, method, its, converged=False)
        raise ConvergenceError(
            f"root finding failed (degree {nd}, worst residual {np.nanmax(rs.residuals):.3g})", best
        )
    return rs


def to_chart(z, center, coord_mode: str = EUCLIDEAN):
    """Local coordinate of ``z`` centred at ``center``."""
    z = np.asarray(z, dtype=np.complex128)
    if coord_mode == EUCLIDEAN:
        return z - center
    if coord_mode == FS_NORMAL:
        return (z - center) / (1.0 + np.conj(center) * z)
    raise ValueError(f"unknown coord_mode {coord_mode!r}")


def from_chart(u, center, coord_mode: str = EUCLIDEAN):
    """Inverse of :func:`to_chart`; returns ``(z, dz/du)``."""
    u = np.asarray(u, dtype=np.complex128)
    if coord_mode == EUCLIDEAN:
        return u + center, np.ones_like(u)
    if coord_mode == FS_NORMAL:
        den = 1.0 - np.conj(center) * u
        return (u + center) / den, (1.0 + abs(center) ** 2) / den**2
    raise ValueError(f"unknown coord_mode {coord_mode!r}")


class DiskCount(int):
    """Integer root count; ``boundary_ambiguous`` is set when a root lies within
    a relative 1e-9 of the circle."""

    boundary_ambiguous: bool = False

    def __new__(cls, value, ambiguous=False):
        obj = super().__new__(cls, value)
        obj.boundary_ambiguous = bool(ambiguous)
        return obj


def count_in_disk(rs: RootSet, center, radius: float, coord_mode: str = EUCLIDEAN) -> DiskCount:
    if not radius > 0:
        raise PreconditionError("radius must be positive")
    if rs.roots.size == 0:
        return DiskCount(0)
    u = np.abs(to_chart(rs.roots, center, coord_mode))
    inside = u < radius
    ambiguous = np.any(np.abs(u - radius) <= 1e-9 * radius)
    return DiskCount(int(rs.multiplicity[inside].sum()), ambiguous)
