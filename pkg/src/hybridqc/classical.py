"""Classical particle driven by a potential and by the measured quantum
position.

The force routine evaluates the noisy backreaction through the record term
``<x> + (hbar sigma / lam) eta`` so that ``-lam * x_bar`` from
:func:`hybridqc.sse.record_sample` and :func:`hybrid_force` are the same
floating-point number.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NumericalBlowup
from .sse import record_term

BLOWUP_BOUND = 1e9
MAX_POLY_DEGREE = 6


class PotentialKind(str, enum.Enum):
    FREE = "free"
    HARMONIC = "harmonic"
    POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class PotentialSpec:
    """``V(X)``: free, harmonic ``stiffness X^2 / 2`` or ``sum_k c_k X^k``."""

    kind: PotentialKind = PotentialKind.FREE
    stiffness: float = 0.0
    coefficients: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.stiffness < 0:
            raise InvalidParameter("stiffness must be non-negative")
        if len(self.coefficients) > MAX_POLY_DEGREE + 1:
            raise InvalidParameter(f"polynomial degree exceeds {MAX_POLY_DEGREE}")

    @classmethod
    def free(cls):
        return cls(PotentialKind.FREE)

    @classmethod
    def harmonic(cls, stiffness):
        return cls(PotentialKind.HARMONIC, stiffness=stiffness)

    @classmethod
    def polynomial(cls, coefficients):
        return cls(PotentialKind.POLYNOMIAL, coefficients=tuple(coefficients))

    def energy(self, X):
        if self.kind is PotentialKind.FREE:
            return np.zeros_like(np.asarray(X, dtype=float))
        if self.kind is PotentialKind.HARMONIC:
            return 0.5 * self.stiffness * np.asarray(X) ** 2
        return np.polynomial.polynomial.polyval(X, self.coefficients)


@dataclass(frozen=True)
class ClassicalState:
    X: float
    P: float

    def __post_init__(self):
        if not (np.isfinite(self.X) and np.isfinite(self.P)):
            raise NumericalBlowup("classical state is not finite")


def potential_force(V, X):
    """Conservative force ``-V'(X)``; works elementwise on arrays."""
    if V.kind is PotentialKind.FREE:
        return np.zeros_like(np.asarray(X, dtype=float)) if np.ndim(X) else 0.0
    if V.kind is PotentialKind.HARMONIC:
        return -V.stiffness * X
    deriv = np.polynomial.polynomial.polyder(V.coefficients) if len(V.coefficients) > 1 else [0.0]
    return -np.polynomial.polynomial.polyval(X, deriv)


def hybrid_force(lam, x_expect, sigma, hbar, noise):
    """Backreaction ``-lam <x> - hbar sigma dW/dt`` of the measured oscillator."""
    if not noise.dt > 0:
        raise InvalidParameter("dt must be positive")
    return record_force(lam, x_expect, sigma, hbar, noise.dW, noise.dt)


def record_force(lam, x_expect, sigma, hbar, dW, dt):
    """Array form of :func:`hybrid_force`."""
    if lam == 0:
        return -(hbar * sigma) * (dW / dt) + 0.0 * np.asarray(x_expect)
    return -lam * record_term(lam, x_expect, sigma, hbar, dW, dt)


def classical_update(X, P, M, force, dt, bound=BLOWUP_BOUND, step=None):
    """Semi-implicit Euler on arrays: kick the momentum, then drift."""
    P_new = P + force * dt
    X_new = X + (P_new / M) * dt
    if np.any(~(np.abs(X_new) <= bound)) or np.any(~(np.abs(P_new) <= bound)):
        raise NumericalBlowup(f"classical state exceeded bound {bound:g}", step)
    return X_new, P_new


def classical_step(state, M, F_total, dt, bound=BLOWUP_BOUND):
    if not dt > 0 or not M > 0:
        raise InvalidParameter("dt and M must be positive")
    X, P = classical_update(state.X, state.P, M, F_total, dt, bound)
    return ClassicalState(float(X), float(P))
