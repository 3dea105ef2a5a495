"""Complex numbers stored as (log-modulus, phase), overflow-safe for (1+|z|^2)^N."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CANCELLATION_THRESHOLD = 1e-12


def wrap_phase(theta):
    """Map angles into (-pi, pi]."""
    t = np.remainder(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    t = np.where(t == -np.pi, np.pi, t)
    return t if t.ndim else float(t)


@dataclass(frozen=True)
class LogComplex:
    """``exp(log_mod + i*phase)``; ``log_mod = -inf`` encodes zero.

    Fields may be scalars or equally shaped arrays.
    """

    log_mod: float | np.ndarray
    phase: float | np.ndarray = 0.0

    def __post_init__(self):
        lm = np.asarray(self.log_mod, dtype=float)
        ph = np.where(np.isneginf(lm), 0.0, wrap_phase(np.broadcast_to(self.phase, lm.shape)))
        object.__setattr__(self, "log_mod", lm if lm.ndim else float(lm))
        object.__setattr__(self, "phase", ph if np.ndim(ph) else float(ph))

    @classmethod
    def from_complex(cls, x, log_scale=0.0) -> LogComplex:
        """Represent ``x * exp(log_scale)``."""
        x = np.asarray(x, dtype=np.complex128)
        with np.errstate(divide="ignore"):
            lm = np.log(np.abs(x)) + log_scale
        return cls(lm, np.angle(x))

    @property
    def is_zero(self):
        return np.isneginf(self.log_mod)

    def to_complex(self):
        """Plain complex value (may overflow to inf for huge moduli)."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_mod) * np.exp(1j * np.asarray(self.phase))

    def __mul__(self, other: LogComplex) -> LogComplex:
        return LogComplex(np.add(self.log_mod, other.log_mod), np.add(self.phase, other.phase))

    def __truediv__(self, other: LogComplex) -> LogComplex:
        if np.any(other.is_zero):
            raise ZeroDivisionError("division by LogComplex zero")
        return LogComplex(np.subtract(self.log_mod, other.log_mod), np.subtract(self.phase, other.phase))

    def conj(self) -> LogComplex:
        return LogComplex(self.log_mod, np.negative(self.phase))

    def __pow__(self, n: float) -> LogComplex:
        """Principal power; for integer n the phase is exact up to wrapping."""
        return LogComplex(np.multiply(self.log_mod, n), np.multiply(self.phase, n))

    def add(self, other: LogComplex, sign: float = 1.0):
        """Return ``(self + sign*other, cancelled)``.

        ``cancelled`` flags results whose modulus is below 1e-12 of the larger
        operand: such values have lost most of their relative precision.
        """
        m = np.maximum(self.log_mod, other.log_mod)
        m_safe = np.where(np.isneginf(m), 0.0, m)
        a = np.exp(self.log_mod - m_safe) * np.exp(1j * np.asarray(self.phase))
        b = np.exp(other.log_mod - m_safe) * np.exp(1j * np.asarray(other.phase))
        s = a + sign * b
        out = LogComplex.from_complex(s, m_safe)
        big = np.maximum(np.abs(a), np.abs(b))
        cancelled = (np.abs(s) < CANCELLATION_THRESHOLD * big) & (big > 0)
        return out, cancelled if np.ndim(cancelled) else bool(cancelled)

    def __add__(self, other: LogComplex) -> LogComplex:
        return self.add(other, 1.0)[0]

    def __sub__(self, other: LogComplex) -> LogComplex:
        return self.add(other, -1.0)[0]

    def isclose(self, other: LogComplex, rtol=1e-12) -> bool:
        """Relative equality measured on the log scale and the phase."""
        both_zero = self.is_zero & other.is_zero
        dl = np.abs(np.subtract(self.log_mod, other.log_mod))
        dp = np.abs(wrap_phase(np.subtract(self.phase, other.phase)))
        ok = both_zero | ((dl <= rtol) & (dp <= rtol))
        return bool(np.all(ok))
