"""Ito stochastic nonlinear Schroedinger equation for a continuously
measured oscillator position, and the associated measurement record.

Two coefficient conventions are supported:

``PAPER_LITERAL``
    drift ``lam^2 / (4 hbar^2 sigma^2)``, diffusion ``lam / (2 hbar sigma)``.
``CHAIN_CONSISTENT``
    drift ``lam^2 / (8 hbar^2 sigma^2)``, diffusion ``lam / (2 hbar sigma)``.
    This is the continuum limit of the Gaussian Kraus chain in
    :mod:`hybridqc.chain` and satisfies ``2 drift = diffusion^2``, so the
    Ito norm change has zero drift.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NumericalBlowup
from .hilbert import QuantumState, check_truncation, row_sum

PRENORM_BOUNDS = (0.5, 2.0)


class Convention(str, enum.Enum):
    CHAIN_CONSISTENT = "chain_consistent"
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class SdeCoefficients:
    c_drift: float
    c_diff: float
    convention: Convention
    lam: float = 0.0
    hbar: float = 1.0


@dataclass(frozen=True)
class NoiseIncrement:
    dW: float
    dt: float

    @property
    def rate(self):
        """White-noise sample eta = dW / dt."""
        return self.dW / self.dt


def make_coefficients(lam, sigma, hbar=1.0, convention=Convention.CHAIN_CONSISTENT):
    convention = Convention(convention)
    if not hbar > 0:
        raise InvalidParameter("hbar must be positive")
    if lam == 0:
        return SdeCoefficients(0.0, 0.0, convention, 0.0, hbar)
    if not sigma > 0:
        raise InvalidParameter(f"sigma must be positive when lambda != 0, got {sigma}")
    c_diff = lam / (2 * hbar * sigma)
    if convention is Convention.PAPER_LITERAL:
        c_drift = lam ** 2 / (4 * hbar ** 2 * sigma ** 2)
    else:
        c_drift = lam ** 2 / (8 * hbar ** 2 * sigma ** 2)
    return SdeCoefficients(c_drift, c_diff, convention, lam, hbar)


FREE_STEPS = ("exact", "euler")


def sse_update(psi, X, coeffs, ops, dW, dt, free_step="exact"):
    """Euler-Maruyama step on a stack of states ``psi`` with shape (n, dim).

    The coupling and measurement terms are stepped by Euler-Maruyama from
    the start-of-step state; the free evolution ``exp(-i H0 dt / hbar)`` is
    diagonal and applied exactly afterwards, so ``lam = 0`` is exactly
    unitary. ``free_step="euler"`` instead puts ``H0`` into the explicit
    Euler bracket, the textbook form. ``X`` and ``dW`` broadcast against
    the leading axis. Returns the
    renormalized states, the pre-normalization norms and the start-of-step
    ``<x>`` used in the update.
    """
    new, prenorm, xm, _ = sse_kernel(psi, X, coeffs, ops, dW, dt, free_step)
    return new, prenorm, xm


def sse_kernel(psi, X, coeffs, ops, dW, dt, free_step="exact"):
    """:func:`sse_update` that also returns the start-of-step Var(x)."""
    X = np.asarray(X, dtype=float)[..., None]
    dW = np.asarray(dW, dtype=float)[..., None]
    xpsi = ops.apply_x(psi)
    xm = row_sum((psi.conj() * xpsi).real)
    y = xpsi - xm[..., None] * psi
    y2 = ops.apply_x(y) - xm[..., None] * y
    if free_step not in FREE_STEPS:
        raise InvalidParameter(f"free_step must be one of {FREE_STEPS}")
    ham = (coeffs.lam * X) * xpsi
    if free_step == "euler":
        ham = ham + ops.apply_h0(psi)
    new = (psi + ((-1j / coeffs.hbar) * dt) * ham
           - (coeffs.c_drift * dt) * y2 + coeffs.c_diff * dW * y)
    prenorm = np.sqrt(row_sum((new.conj() * new).real))
    var = row_sum((y.conj() * y).real)
    new = new / prenorm[..., None]
    if free_step == "exact":
        new = ops.free_phase(dt) * new
    return new, prenorm, xm, var


def check_prenorm(prenorm, step=None):
    lo, hi = PRENORM_BOUNDS
    bad = ~((prenorm > lo) & (prenorm < hi))
    if np.any(bad):
        raise NumericalBlowup(
            f"pre-normalization norm {float(np.asarray(prenorm)[bad].flat[0]):.4g} "
            f"outside {PRENORM_BOUNDS}", step)


def sse_step(psi, X, coeffs, ops, noise, free_step="exact"):
    """Advance a single :class:`QuantumState` by one Ito step."""
    if not noise.dt > 0:
        raise InvalidParameter("dt must be positive")
    new, prenorm, _ = sse_update(psi.amplitudes[None, :], X, coeffs, ops,
                                 noise.dW, noise.dt, free_step)
    check_prenorm(prenorm)
    check_truncation(new)
    return QuantumState(new[0], prenorm=float(prenorm[0]))


def record_sample(psi, lam, sigma, hbar, noise, ops=None, x_mean=None):
    """Measured value ``x_bar = <x> + (hbar sigma / lam) dW / dt``.

    Pass ``x_mean`` to reuse an already computed start-of-step ``<x>``.
    """
    if lam == 0:
        raise InvalidParameter("measurement record is undefined for lambda = 0")
    if x_mean is None:
        v = psi.amplitudes
        x_mean = float(row_sum((v.conj() * ops.apply_x(v)).real))
    return record_term(lam, x_mean, sigma, hbar, noise.dW, noise.dt)


def record_term(lam, x_expect, sigma, hbar, dW, dt):
    return x_expect + (hbar * sigma / lam) * (dW / dt)
