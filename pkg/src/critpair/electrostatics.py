"""Electrostatic picture of a polynomial: the co-field of its zero divisor,
equilibrium residuals and gradient-descent flow lines of log|p|^2."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import PoleEvaluationError, PreconditionError, ZeroCollisionError
from .poly_core import (
    FS_NORMAL,
    ComplexPolynomial,
    critical_polynomial,
    evaluate,
    evaluation_scale,
    log_derivative,
    roots,
    to_chart,
)

INFINITY = "inf"

ZERO = "zero"
CRITICAL = "critical"
MAX_STEPS = "max_steps"
LEFT_DOMAIN = "left_domain"


@dataclass(frozen=True)
class ChargeConfiguration:
    """Point charges (location, integer charge); a location equal to the
    string ``"inf"`` marks the point at infinity."""

    charges: tuple

    def __post_init__(self):
        cs = []
        for loc, m in self.charges:
            if int(m) != m or m == 0:
                raise PreconditionError("charges must be non-zero integers")
            cs.append((loc if loc == INFINITY else complex(loc), int(m)))
        object.__setattr__(self, "charges", tuple(cs))

    @classmethod
    def from_polynomial(cls, p: ComplexPolynomial) -> ChargeConfiguration:
        """Zeros with multiplicity and a balancing charge -deg p at infinity.

        Zeros carry positive charge so that the chart field equals p'/p.
        """
        rs = roots(p)
        ch = [(complex(z), int(m)) for z, m in zip(rs.roots, rs.multiplicity)]
        return cls(tuple(ch) + ((INFINITY, -p.numerical_degree),))

    @property
    def finite(self):
        return [(z, m) for z, m in self.charges if z != INFINITY]

    @property
    def neutral(self) -> bool:
        return sum(m for _, m in self.charges) == 0

    def __add__(self, other: ChargeConfiguration) -> ChargeConfiguration:
        return ChargeConfiguration(self.charges + other.charges)


def field(cc: ChargeConfiguration, z) -> complex:
    """Co-field sum m_j / (z - z_j) over finite charges (infinity adds nothing in the chart)."""
    z = complex(z)
    total = 0j
    for loc, m in cc.finite:
        if loc == z:
            raise PoleEvaluationError(f"field evaluated at the charge {loc}")
        total += m / (z - loc)
    return total


def equilibrium_residual(p: ComplexPolynomial, c) -> float:
    """|p'(c)/p(c)|, zero exactly at the holomorphic critical points."""
    c = complex(c)
    if abs(evaluate(p, c)) <= 1e-300 or not np.isfinite(log_derivative(p, c)[0]):
        raise ZeroCollisionError(f"p vanishes at {c}")
    return float(abs(log_derivative(p, c)[0]))


@dataclass
class FlowLine:
    points: list
    terminal: str
    terminal_index: Optional[int]
    seed_point: complex
    log_values: list = dc_field(default_factory=list)
    diagnostic: str = ""


def _log_abs2(p, z):
    v = evaluate(p, z)
    return 2.0 * math.log(abs(v)) if v != 0 else -math.inf


def _direction(p, z):
    """-conj(2 p'/p): Euclidean descent direction of log|p|^2."""
    return -np.conj(2.0 * log_derivative(p, z)[0])


def flow_trace(p: ComplexPolynomial, seed, step: float = 0.02, max_steps: int = 2000,
               zeros: Optional[np.ndarray] = None, crits: Optional[np.ndarray] = None,
               window: Optional[tuple] = None, tol: float = 1e-6) -> FlowLine:
    """Follow dz/dt = -conj(2 p'/p) from ``seed`` with normalized RK4 steps.

    Steps are capped at min(step, 0.1 * distance to the nearest zero or
    critical point) and halved until log|p|^2 decreases. Termination: within
    10*tol of a zero, within tol of a critical point, ``max_steps`` reached,
    or leaving ``window`` = (xmin, xmax, ymin, ymax).
    """
    seed = complex(seed)
    if abs(evaluate(p, seed)) == 0:
        raise ZeroCollisionError("flow seed is a zero of p")
    if zeros is None:
        zeros = roots(p).roots
    if crits is None:
        crits = roots(critical_polynomial(p, ComplexPolynomial.constant(1.0))).roots \
            if p.numerical_degree >= 2 else np.zeros(0, complex)
    z = seed
    pts = [z]
    vals = [_log_abs2(p, z)]

    def unit(x):
        d = _direction(p, x)
        a = abs(d)
        return d / a if a > 0 and np.isfinite(a) else 0j

    for _ in range(max_steps):
        dz0 = np.min(np.abs(zeros - z)) if zeros.size else np.inf
        dc = np.min(np.abs(crits - z)) if crits.size else np.inf
        if dz0 < 10 * tol:
            return FlowLine(pts, ZERO, int(np.argmin(np.abs(zeros - z))), seed, vals)
        if dc < tol:
            return FlowLine(pts, CRITICAL, int(np.argmin(np.abs(crits - z))), seed, vals)
        h = min(step, 0.1 * min(dz0, dc))
        while True:
            k1 = unit(z)
            k2 = unit(z + 0.5 * h * k1)
            k3 = unit(z + 0.5 * h * k2)
            k4 = unit(z + h * k3)
            znew = z + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
            v = _log_abs2(p, znew)
            if v < vals[-1]:
                break
            h *= 0.5
            if h < 1e-15 * max(1.0, abs(z)):
                return FlowLine(pts, MAX_STEPS, None, seed, vals,
                                "step underflow: stalled on a separatrix or at a saddle")
        z = znew
        pts.append(z)
        vals.append(v)
        if window is not None:
            x0, x1, y0, y1 = window
            if not (x0 <= z.real <= x1 and y0 <= z.imag <= y1):
                return FlowLine(pts, LEFT_DOMAIN, None, seed, vals)
    return FlowLine(pts, MAX_STEPS, None, seed, vals, "max_steps reached")


@dataclass
class FigureData:
    window: tuple
    zeros: np.ndarray
    critical_points: np.ndarray
    flow_lines: list
    xi: Optional[complex] = None
    annulus: Optional[tuple] = None  # (inner, outer) chart radii around xi
    coord_mode: str = FS_NORMAL

    def annulus_count(self) -> Optional[int]:
        """Critical points with inner <= |u| < outer in the chart around xi."""
        if self.xi is None or self.annulus is None:
            return None
        u = np.abs(to_chart(self.critical_points, self.xi, self.coord_mode))
        return int(np.sum((u >= self.annulus[0]) & (u < self.annulus[1])))


def boundary_seeds(window: tuple, per_side: int) -> list:
    x0, x1, y0, y1 = window
    if per_side <= 0:
        return []
    t = (np.arange(per_side) + 0.5) / per_side
    xs = x0 + (x1 - x0) * t
    ys = y0 + (y1 - y0) * t
    return ([complex(x, y1) for x in xs] + [complex(x1, y) for y in ys[::-1]]
            + [complex(x, y0) for x in xs[::-1]] + [complex(x0, y) for y in ys])


def flow_figure(p: ComplexPolynomial, window: Sequence[float] = (-1.6, 1.6, -1.6, 1.6),
                seeds_per_side: int = 10, xi: Optional[complex] = None, eps_tilde: float = 0.1,
                step: float = 0.02, max_steps: int = 2000, coord_mode: str = FS_NORMAL) -> FigureData:
    """Zeros, critical points and descent flow lines from a boundary seed grid,
    with the annulus N^(-1-eps), N^(-1+eps) around ``xi`` when given."""
    window = tuple(float(x) for x in window)
    zeros = roots(p).expanded()
    crits = roots(critical_polynomial(p, ComplexPolynomial.constant(1.0))).expanded() \
        if p.numerical_degree >= 2 else np.zeros(0, complex)
    lines = []
    for s in boundary_seeds(window, seeds_per_side):
        if abs(evaluate(p, s)) <= 1e-14 * evaluation_scale(p, s):
            continue
        lines.append(flow_trace(p, s, step, max_steps, zeros, crits, None, 1e-6))
    annulus = None
    if xi is not None:
        N = p.N
        annulus = (N ** (-1 - eps_tilde), N ** (-1 + eps_tilde))
    return FigureData(window, zeros, crits, lines, None if xi is None else complex(xi), annulus, coord_mode)
