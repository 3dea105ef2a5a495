"""Hermitian Gaussian polynomial ensembles on the Riemann sphere and their
conditioning on a prescribed zero.

Coefficients are stored in the monomial basis. ``basis_norms[j]`` is the log of
the factor that makes ``z**j`` a unit vector, so a sample is
``sum a_j exp(basis_norms[j]) z**j`` with i.i.d. standard complex Gaussians
``a_j``. The frame-relative Bergman kernel is then
``K(z, w) = sum exp(2*basis_norms[j]) (z conj(w))**j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import betaln, gammaln, logsumexp

from .errors import (
    ConfigError,
    InvalidReferenceSectionError,
    PotentialSingularityError,
    PreconditionError,
    WeightInadmissibleError,
)
from .kernels.logcomplex import LogComplex
from .poly_core import ComplexPolynomial, derivative, evaluate, evaluation_scale
from .rng import SeededRng, complex_normal

SU2 = "su2"
RADIAL = "radial"

LAPLACIAN = "laplacian"
LEBESGUE = "lebesgue"

DEFINITION = "definition"
PROOF = "proof"

_SCAN_T = np.linspace(-60.0, 60.0, 2401)
_TAIL_DROP = 45.0


@dataclass(frozen=True)
class RadialWeight:
    """Radial metric potential ``phi(r)``, with ``|z**j|_h^2 = r**(2j) exp(-N phi(r))``.

    ``measure`` selects the area density used for the inner product:
    ``"laplacian"`` is the curvature form mu(r) = (phi'' + phi'/r)/2 and
    ``"lebesgue"`` is mu = 1. ``exact_log_moments(N, j)``, when given, returns
    log m_j in closed form for the laplacian measure.
    """

    phi: Callable
    dphi: Optional[Callable] = None
    d2phi: Optional[Callable] = None
    measure: str = LAPLACIAN
    name: str = "custom"
    exact_log_moments: Optional[Callable] = None

    def first_derivative(self, r):
        if self.dphi is not None:
            return self.dphi(r)
        h = 1e-5 * np.maximum(1.0, r)
        return (self.phi(r + h) - self.phi(np.abs(r - h))) / (2 * h)

    def second_derivative(self, r):
        if self.d2phi is not None:
            return self.d2phi(r)
        h = 1e-4 * np.maximum(1.0, r)
        return (self.phi(r + h) - 2 * self.phi(r) + self.phi(np.abs(r - h))) / h**2

    def density(self, r):
        r = np.asarray(r, dtype=float)
        if self.measure == LEBESGUE:
            return np.ones_like(r)
        if self.measure != LAPLACIAN:
            raise ValueError(f"unknown measure {self.measure!r}")
        d2 = self.second_derivative(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            d1r = np.where(r > 0, self.first_derivative(r) / np.where(r > 0, r, 1.0), d2)
        mu = 0.5 * (d2 + d1r)
        # roundoff-level negatives from cancellation in the far tail count as zero
        noise = 1e-12 * (np.abs(d2) + np.abs(d1r))
        return np.where((mu < 0) & (mu >= -noise), 0.0, mu)


def _fs_phi(r):
    return np.log1p(np.square(r))


def _fs_dphi(r):
    return 2 * r / (1 + np.square(r))


def _fs_d2phi(r):
    r2 = np.square(r)
    return 2 * (1 - r2) / (1 + r2) ** 2


def _fs_moments(N, j):
    return betaln(j + 1, N + 1 - j)


def _planar_moments(N, j):
    return gammaln(j + 1) - (j + 1) * math.log(N)


PRESETS = {
    "fs": RadialWeight(_fs_phi, _fs_dphi, _fs_d2phi, LAPLACIAN, "fs", _fs_moments),
    "gaussian-planar": RadialWeight(
        np.square, lambda r: 2 * np.asarray(r, dtype=float), lambda r: np.full(np.shape(r), 2.0),
        LAPLACIAN, "gaussian-planar", _planar_moments,
    ),
}


def preset(name: str, measure: str = LAPLACIAN) -> RadialWeight:
    try:
        w = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown weight preset {name!r}; choose from {sorted(PRESETS)}") from None
    if measure != w.measure:
        w = RadialWeight(w.phi, w.dphi, w.d2phi, measure, w.name, None)
    return w


@dataclass(frozen=True, eq=False)
class GaussianEnsemble:
    N: int
    kind: str
    basis_norms: np.ndarray
    weight: Optional[RadialWeight] = None

    def __post_init__(self):
        b = np.asarray(self.basis_norms, dtype=float)
        if b.shape != (self.N + 1,) or not np.all(np.isfinite(b)):
            raise ValueError("basis_norms must be N+1 finite values")
        b.setflags(write=False)
        object.__setattr__(self, "basis_norms", b)

    @property
    def metric_weight(self) -> RadialWeight:
        """The radial metric: Fubini-Study for su2."""
        return self.weight if self.weight is not None else PRESETS["fs"]

    def log_kernel_diag(self, z) -> np.ndarray:
        """log K(z, z) for scalar or array z."""
        z = np.asarray(z, dtype=np.complex128)
        j = np.arange(self.N + 1)
        with np.errstate(divide="ignore"):
            la = np.log(np.abs(z))[..., None]
        t = 2 * self.basis_norms + np.where(j == 0, 0.0, 2 * j * la)
        return logsumexp(t, axis=-1)


def make_su2(N: int) -> GaussianEnsemble:
    if N < 1:
        raise PreconditionError("N must be >= 1")
    j = np.arange(N + 1)
    b = 0.5 * (gammaln(N + 1) - gammaln(j + 1) - gammaln(N - j + 1))
    return GaussianEnsemble(N, SU2, b)


def _quad_log_moment(j: int, N: int, base: np.ndarray, h_of_t: Callable, nodes: int) -> float:
    L = base + 2 * j * _SCAN_T
    M = L.max()
    if not np.isfinite(M) or L[-1] > M - _TAIL_DROP:
        raise WeightInadmissibleError(j, f"radial moment m_{j} diverges (integrand does not decay)")
    idx = np.flatnonzero(L > M - _TAIL_DROP)
    lo = _SCAN_T[max(idx[0] - 1, 0)]
    hi = _SCAN_T[min(idx[-1] + 1, _SCAN_T.size - 1)]
    prev = None
    n = max(int(nodes), 16)
    while True:
        t = np.linspace(lo, hi, n)
        v = h_of_t(t) + 2 * j * t
        w = np.full(n, (hi - lo) / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        val = logsumexp(v, b=w)
        if prev is not None and abs(val - prev) < 1e-12:
            return val
        if n > 1 << 17:
            return val
        prev = val
        n = 2 * n - 1


def radial_log_moments(N: int, w: RadialWeight, quad_nodes: int = 257, exact: bool = True) -> np.ndarray:
    """log m_j = log int_0^inf r^(2j+1) exp(-N phi(r)) mu(r) dr, j = 0..N."""
    j = np.arange(N + 1)
    if exact and w.exact_log_moments is not None and w.measure == LAPLACIAN:
        return np.asarray(w.exact_log_moments(N, j), dtype=float)

    def h_of_t(t):
        r = np.exp(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            mu = w.density(r)
            if np.any(mu < 0) or np.any(np.isnan(mu)):
                raise WeightInadmissibleError(0, "area density is negative: phi is not subharmonic")
            return 2 * t - N * w.phi(r) + np.log(mu)

    base = h_of_t(_SCAN_T)
    return np.array([_quad_log_moment(int(k), N, base, h_of_t, quad_nodes) for k in j])


def make_radial(N: int, w: RadialWeight, quad_nodes: int = 257, exact: bool = True) -> GaussianEnsemble:
    """Ensemble orthonormal for the radial weight: basis_norms = -log(m_j)/2.

    Closed-form moments are used when the weight provides them, unless
    ``exact=False`` forces the log-domain trapezoid in t = log r.
    """
    if N < 1:
        raise PreconditionError("N must be >= 1")
    return GaussianEnsemble(N, RADIAL, -0.5 * radial_log_moments(N, w, quad_nodes, exact), w)


def _coefficient_scale(e: GaussianEnsemble) -> np.ndarray:
    return np.exp(e.basis_norms - e.basis_norms.max())


def sample(e: GaussianEnsemble, rng: SeededRng) -> ComplexPolynomial:
    """One draw; coefficients are normalized so the largest basis factor is 1."""
    return ComplexPolynomial(complex_normal(rng, e.N + 1) * _coefficient_scale(e), e.N)


@dataclass(frozen=True, eq=False)
class ConditionalEnsemble:
    """``base`` conditioned on p(xi) = 0.

    ``deflation_vector`` holds the coefficients of v(z) = K(z, xi)/K(xi, xi)
    as a LogComplex array.
    """

    base: GaussianEnsemble
    xi: complex
    deflation_vector: LogComplex

    @property
    def N(self) -> int:
        return self.base.N


def _j_log_abs(N: int, x: complex) -> np.ndarray:
    j = np.arange(N + 1)
    if x == 0:
        return np.where(j == 0, 0.0, -np.inf)
    return j * math.log(abs(x))


def condition_at(e: GaussianEnsemble, xi: complex) -> ConditionalEnsemble:
    xi = complex(xi)
    jl = _j_log_abs(e.N, xi)
    log_kxx = logsumexp(2 * e.basis_norms + 2 * jl)
    j = np.arange(e.N + 1)
    v = LogComplex(2 * e.basis_norms + jl - log_kxx, -j * np.angle(xi))
    return ConditionalEnsemble(e, xi, v)


def sample_conditional(ce: ConditionalEnsemble, rng: SeededRng) -> ComplexPolynomial:
    """p = p~ - p~(xi) v with p~ an unconditional draw (same stream usage as ``sample``)."""
    e = ce.base
    a = complex_normal(rng, e.N + 1)
    bshift = e.basis_norms - e.basis_norms.max()
    c = a * np.exp(bshift)
    # p~(xi) = exp(A) * S, evaluated with the largest term factored out
    lt = bshift + _j_log_abs(e.N, ce.xi)
    A = lt.max()
    j = np.arange(e.N + 1)
    rot = np.exp(1j * j * np.angle(ce.xi))
    S = np.sum(a * np.exp(lt - A) * rot)
    v = ce.deflation_vector
    vc = np.exp(v.log_mod) * np.exp(1j * v.phase)
    p = c - S * np.exp(A) * vc if np.isfinite(A) else c.copy()
    # one refinement pass removes the cancellation left in low-order
    # coefficients when |xi| is small
    with np.errstate(divide="ignore"):
        lt = np.log(np.abs(p)) + _j_log_abs(e.N, ce.xi)
    A = lt.max()
    if np.isfinite(A):
        S = np.sum(p / np.where(p == 0, 1, np.abs(p)) * np.exp(lt - A) * rot)
        p = p - S * np.exp(A) * vc
    return ComplexPolynomial(p, e.N)


def conditional_residual(p: ComplexPolynomial, xi: complex) -> float:
    """|p(xi)| relative to the evaluation scale sum |c_j||xi|^j."""
    s = float(evaluation_scale(p, xi))
    return abs(evaluate(p, xi)) / s if s > 0 else 0.0


@dataclass(frozen=True, eq=False)
class ReferenceSection:
    sigma: ComplexPolynomial
    ensemble: GaussianEnsemble

    def __post_init__(self):
        if self.sigma.is_zero:
            raise InvalidReferenceSectionError("reference section sigma is identically zero")
        if self.sigma.numerical_degree > self.ensemble.N:
            raise PreconditionError("deg sigma exceeds N")

    @classmethod
    def trivial(cls, ensemble: GaussianEnsemble) -> ReferenceSection:
        """sigma = 1 in the affine chart (the frame z0^N)."""
        return cls(ComplexPolynomial.constant(1.0, ensemble.N), ensemble)


def _sigma_at(rs: ReferenceSection, z: complex) -> complex:
    val = evaluate(rs.sigma, z)
    if abs(val) <= 1e-14 * float(evaluation_scale(rs.sigma, z)):
        raise PotentialSingularityError(f"sigma vanishes at z = {z}")
    return val


def _convention_factor(convention: str) -> float:
    if convention == DEFINITION:
        return 1.0
    if convention == PROOF:
        return -2.0
    raise ValueError(f"unknown convention {convention!r}")


def phi_sigma(rs: ReferenceSection, z: complex, convention: str = DEFINITION) -> float:
    """log ||sigma(z)||_{h^N} = log|sigma(z)| - (N/2) phi(|z|).

    ``convention="proof"`` returns log ||sigma||^{-2} instead.
    """
    z = complex(z)
    s = _sigma_at(rs, z)
    N = rs.ensemble.N
    val = math.log(abs(s)) - 0.5 * N * float(rs.ensemble.metric_weight.phi(abs(z)))
    return _convention_factor(convention) * val


def metric_dz(w: RadialWeight, z: complex) -> complex:
    """Wirtinger d/dz of phi(|z|) = phi'(r) conj(z) / (2r)."""
    r = abs(z)
    if r == 0:
        return 0j
    return complex(w.first_derivative(r)) * z.conjugate() / (2 * r)


def dphi_sigma(rs: ReferenceSection, z: complex, convention: str = DEFINITION) -> complex:
    """Wirtinger d/dz of :func:`phi_sigma`: sigma'/(2 sigma) - (N/2) d phi/dz."""
    z = complex(z)
    s = _sigma_at(rs, z)
    ds = evaluate(derivative(rs.sigma), z)
    N = rs.ensemble.N
    val = ds / (2 * s) - 0.5 * N * metric_dz(rs.ensemble.metric_weight, z)
    return _convention_factor(convention) * val


def efield_condition_margin(rs: ReferenceSection, xi: complex, gamma: float) -> float:
    """|d phi_sigma(xi)| / N^(1 - gamma), in the definition convention."""
    if not 0 <= gamma < 0.5:
        raise PreconditionError("Gamma must satisfy 0 <= Gamma < 1/2")
    N = rs.ensemble.N
    return abs(dphi_sigma(rs, xi)) / N ** (1.0 - gamma)
