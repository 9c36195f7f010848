"""Truncated harmonic-oscillator Hilbert space.

States live in the number basis ``|0>, ..., |dim-1>``. Position, momentum
and the free Hamiltonian are built from the truncated ladder matrices; since
``x`` and ``p`` are tridiagonal, :class:`Operators` also exposes banded
``apply_*`` kernels that act on stacks of state vectors with shape
``(..., dim)``. Those kernels use only elementwise arithmetic, so a row of a
batch evolves bit-for-bit like the same state stepped alone.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .errors import (DegenerateSuperposition, InvalidParameter, NonHermitian,
                     TruncationError)

TOP_LEVEL_TOL = 1e-6
LEAKAGE_TOL = 1e-8
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class FockBasis:
    dim: int = 64
    m: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidParameter(f"dim must be an integer >= 2, got {self.dim}")
        for name in ("m", "omega", "hbar"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be positive")

    @property
    def x_scale(self):
        """Ground-state position spread sqrt(hbar / 2 m omega)."""
        return np.sqrt(self.hbar / (2 * self.m * self.omega))

    @property
    def p_scale(self):
        return np.sqrt(self.hbar * self.m * self.omega / 2)

    @property
    def zero_point_variance(self):
        return self.hbar / (2 * self.m * self.omega)

    def alpha(self, x0, p0):
        """Complex coherent amplitude for phase-space point (x0, p0)."""
        return x0 / (2 * self.x_scale) + 1j * p0 / (2 * self.p_scale)


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray
    role: str = "generic"

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidParameter("operator must be a square matrix")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self):
        return self.entries.shape[0]

    def is_hermitian(self, tol=HERMITIAN_TOL):
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= tol)

    def __add__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.entries + other.entries)
        return OperatorMatrix(self.entries + other * np.eye(self.dim))

    def __mul__(self, c):
        return OperatorMatrix(c * self.entries)

    __rmul__ = __mul__


@dataclass(frozen=True)
class QuantumState:
    """Unit-norm amplitude vector.

    ``leakage`` is the probability lost to truncation when the state was
    built from an infinite-dimensional expression; ``prenorm`` is the norm
    the vector had before the final renormalization.
    """

    amplitudes: np.ndarray
    leakage: float = 0.0
    prenorm: float = 1.0

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 1:
            raise InvalidParameter("amplitudes must be a vector")
        nrm = np.linalg.norm(a)
        if not nrm > 0:
            raise DegenerateSuperposition("zero state vector")
        if abs(nrm - 1.0) > 1e-10:
            a = a / nrm
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self):
        return self.amplitudes.shape[0]

    def top_occupation(self):
        return float(np.sum(np.abs(self.amplitudes[-2:]) ** 2))

    def density_matrix(self):
        return np.outer(self.amplitudes, self.amplitudes.conj())


def row_sum(v):
    """Sum over the last axis by pairwise folding with elementwise adds.

    Unlike ``np.sum(axis=-1)``, the rounding of each row does not depend on
    how many rows are stacked together.
    """
    v = np.asarray(v)
    while v.shape[-1] > 1:
        n = v.shape[-1]
        h = n // 2
        head = v[..., :h] + v[..., h:2 * h]
        v = np.concatenate([head, v[..., 2 * h:]], axis=-1) if n % 2 else head
    return v[..., 0]


def check_truncation(amplitudes, tol=TOP_LEVEL_TOL, step=None):
    """Raise if the top two Fock levels of any row hold more than ``tol``."""
    top = np.sum(np.abs(amplitudes[..., -2:]) ** 2, axis=-1)
    if np.any(top >= tol):
        raise TruncationError(
            f"top-level occupation {float(np.max(top)):.3e} exceeds {tol:g}", step)


class Operators:
    """Position, momentum and free Hamiltonian on a :class:`FockBasis`."""

    def __init__(self, basis):
        self.basis = basis
        n = basis.dim
        # <k-1| a |k> = sqrt(k), k = 1..n-1
        self.ladder = np.sqrt(np.arange(1, n, dtype=float))
        self.x_band = basis.x_scale * self.ladder
        self.p_band = basis.p_scale * self.ladder
        self.energies = basis.hbar * basis.omega * (np.arange(n) + 0.5)
        a = np.diag(self.ladder, 1)
        ad = a.T
        self.x = OperatorMatrix(basis.x_scale * (a + ad), "position")
        self.p = OperatorMatrix(1j * basis.p_scale * (ad - a), "momentum")
        self.h0 = OperatorMatrix(np.diag(self.energies), "hamiltonian0")
        self.identity = OperatorMatrix(np.eye(n), "generic")

    def apply_x(self, psi):
        out = np.zeros_like(psi)
        out[..., :-1] = self.x_band * psi[..., 1:]
        out[..., 1:] += self.x_band * psi[..., :-1]
        return out

    def apply_p(self, psi):
        out = np.zeros_like(psi)
        out[..., :-1] = -1j * self.p_band * psi[..., 1:]
        out[..., 1:] += 1j * self.p_band * psi[..., :-1]
        return out

    def apply_h0(self, psi):
        return self.energies * psi

    def free_phase(self, dt):
        """Diagonal of ``exp(-i H0 dt / hbar)``, cached for the last ``dt``."""
        cached = self.__dict__.get("_phase")
        if cached is None or cached[0] != dt:
            cached = (dt, np.exp(-1j * self.energies * dt / self.basis.hbar))
            self._phase = cached
        return cached[1]

    def hamiltonian(self, X=0.0, lam=0.0):
        """Dense ``H0 + lam * X * x`` (the mean-field / chain Hamiltonian)."""
        return self.h0.entries + lam * X * self.x.entries

    @cached_property
    def position_spectrum(self):
        vals, vecs = np.linalg.eigh(self.x.entries)
        return vals, vecs

    def propagator(self, dt, X=0.0, lam=0.0):
        """Exact ``exp(-i (H0 + lam X x) dt / hbar)`` via the spectral route."""
        if lam * X == 0.0:
            return np.diag(np.exp(-1j * self.energies * dt / self.basis.hbar))
        vals, vecs = np.linalg.eigh(self.hamiltonian(X, lam))
        return (vecs * np.exp(-1j * vals * dt / self.basis.hbar)) @ vecs.conj().T


def build_operators(basis):
    return Operators(basis)


def fock_state(basis, n):
    amps = np.zeros(basis.dim, dtype=complex)
    amps[n] = 1.0
    return QuantumState(amps)


def coherent_amplitudes(alpha, dim):
    """Untruncated-normalization coherent amplitudes e^{-|a|^2/2} a^n / sqrt(n!)."""
    c = np.empty(dim, dtype=complex)
    c[0] = np.exp(-abs(alpha) ** 2 / 2)
    for k in range(1, dim):
        c[k] = c[k - 1] * alpha / np.sqrt(k)
    return c


def coherent_state(basis, x0, p0):
    alpha = basis.alpha(x0, p0)
    c = coherent_amplitudes(alpha, basis.dim)
    leakage = max(0.0, 1.0 - float(np.sum(np.abs(c) ** 2)))
    if leakage > LEAKAGE_TOL:
        raise TruncationError(
            f"coherent state at ({x0}, {p0}) leaks {leakage:.2e} beyond dim={basis.dim}")
    state = QuantumState(c, leakage=leakage)
    check_truncation(state.amplitudes)
    return state


def coherent_orbit(basis, x0, p0, t):
    """Closed-form free evolution of a coherent state (up to global phase)."""
    w = basis.omega
    mw = basis.m * w
    xt = x0 * np.cos(w * t) + p0 / mw * np.sin(w * t)
    pt = p0 * np.cos(w * t) - mw * x0 * np.sin(w * t)
    return coherent_state(basis, xt, pt)


def squeezed_state(basis, x_variance, x0=0.0, p0=0.0, pad=48):
    """Minimum-uncertainty Gaussian packet with Var(x) = ``x_variance``.

    Built as D(alpha) S(r)|0> in an enlarged basis and truncated back.
    """
    if not x_variance > 0:
        raise InvalidParameter("x_variance must be positive")
    big = FockBasis(basis.dim + pad, basis.m, basis.omega, basis.hbar)
    n = big.dim
    r = -0.5 * np.log(x_variance / basis.zero_point_variance)
    amps = np.zeros(n, dtype=complex)
    # S(r)|0>: amplitudes on even levels, (-tanh r)^k sqrt((2k)!) / (2^k k!)
    t = np.tanh(r)
    c = 1.0 / np.sqrt(np.cosh(r))
    amps[0] = c
    for k in range(1, n // 2):
        c = c * (-t) * np.sqrt((2 * k) * (2 * k - 1)) / (2 * k)
        amps[2 * k] = c
    alpha = basis.alpha(x0, p0)
    if alpha != 0:
        a = np.diag(np.sqrt(np.arange(1, n)), 1)
        amps = expm(alpha * a.T - np.conj(alpha) * a) @ amps
    kept = amps[: basis.dim]
    leakage = max(0.0, 1.0 - float(np.sum(np.abs(kept) ** 2)))
    if leakage > LEAKAGE_TOL:
        raise TruncationError(f"squeezed packet leaks {leakage:.2e} beyond dim={basis.dim}")
    state = QuantumState(kept, leakage=leakage)
    check_truncation(state.amplitudes)
    return state


def superpose(states, amps):
    if len(states) == 0 or len(states) != len(amps):
        raise InvalidParameter("need equally many states and amplitudes (at least one)")
    vec = sum(complex(a) * s.amplitudes for s, a in zip(states, amps))
    prenorm = float(np.linalg.norm(vec))
    if prenorm < 1e-12:
        raise DegenerateSuperposition(f"superposition norm {prenorm:.3e} vanishes")
    return QuantumState(vec / prenorm, prenorm=prenorm)


def _as_matrix(op):
    if isinstance(op, OperatorMatrix):
        if not op.is_hermitian():
            raise NonHermitian(f"{op.role} operator is not Hermitian")
        return op.entries
    m = np.asarray(op, dtype=complex)
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise NonHermitian("operator is not Hermitian")
    return m


def _amps(psi):
    return psi.amplitudes if isinstance(psi, QuantumState) else np.asarray(psi)


def expect(op, psi):
    v = _amps(psi)
    val = np.vdot(v, _as_matrix(op) @ v)
    assert abs(val.imag) < 1e-10, f"Hermitian expectation has imaginary part {val.imag}"
    return float(val.real)


def variance(op, psi):
    m = _as_matrix(op)
    v = _amps(psi)
    mv = m @ v
    mean = np.vdot(v, mv).real
    var = float(np.vdot(mv, mv).real - mean ** 2)
    assert var >= -1e-12, f"negative variance {var}"
    return max(var, 0.0)
