"""Naive mean-field baseline: the classical particle feels ``-lam <x>`` and
the oscillator evolves unitarily under ``H0 + lam X x``. No noise, no
collapse."""

from dataclasses import dataclass

import numpy as np

from .classical import ClassicalState, PotentialKind, classical_update, potential_force
from .coupler import initial_state, state_moments
from .errors import HybridError, UnsupportedPotential
from .hilbert import Operators, QuantumState, check_truncation
from .record import RowBuffer, TrajectoryRecord


@dataclass(frozen=True)
class MeanFieldState:
    psi: QuantumState
    classical: ClassicalState


def _exact_step(psi, X, ops, lam, dt):
    return ops.propagator(dt, X, lam) @ psi


def meanfield_step(state, config, dt, ops=None):
    ops = ops or Operators(config.basis)
    v = state.psi.amplitudes
    xm = float(np.vdot(v, ops.apply_x(v)).real)
    X, P = state.classical.X, state.classical.P
    new = _exact_step(v, X, ops, config.lam, dt)
    check_truncation(new)
    if config.classical.frozen:
        cls = state.classical
    else:
        force = potential_force(config.classical.potential, X) - config.lam * xm
        Xn, Pn = classical_update(X, P, config.classical.M, force, dt)
        cls = ClassicalState(float(Xn), float(Pn))
    return MeanFieldState(QuantumState(new), cls)


def run_meanfield(config, seed=None):
    """Deterministic trajectory in the same record layout as the hybrid run.

    ``x_bar`` holds ``<x>`` (the mean-field "record"), ``dW`` is zero and
    ``prenorm`` is one.
    """
    ops = Operators(config.basis)
    num = config.numerics
    dt, n_steps = num.dt, num.n_steps
    lam = config.lam
    V, M = config.classical.potential, config.classical.M
    psi = initial_state(config).amplitudes.copy()
    X, P = float(config.classical.X0), float(config.classical.P0)
    buf = RowBuffer(1, n_steps, num.output_stride, dt)
    for k in range(n_steps):
        xm, pm, var = (a[0] for a in state_moments(psi[None], ops))
        row = buf.row_of(k)
        if row is not None:
            buf.put_state(row, X, P, xm, pm, var)
            buf.put_step(row, xm, 1.0, 0.0)
        try:
            psi = _exact_step(psi, X, ops, lam, dt)
            check_truncation(psi, step=k)
            if not config.classical.frozen:
                X, P = classical_update(X, P, M, potential_force(V, X) - lam * xm, dt, step=k)
        except HybridError as exc:
            exc.step = getattr(exc, "step", None) or k
            raise
    xm, pm, var = (a[0] for a in state_moments(psi[None], ops))
    buf.put_state(buf.n_rows - 1, X, P, xm, pm, var)
    cols = {c: v[0] for c, v in buf.columns().items()}
    return TrajectoryRecord(cols, config.config_hash(), config.seed if seed is None else seed,
                            0, config.convention.value, "meanfield", QuantumState(psi))


def ehrenfest_oracle(config, initial, t_grid, substeps=10):
    """First-moment ODE for harmonic or free ``V``, integrated by RK4.

    ``initial`` is ``(X, P, <x>, <p>)``; the step is ``dt / substeps``.
    Returns an array of shape (len(t_grid), 4).
    """
    pot = config.classical.potential
    if pot.kind is PotentialKind.POLYNOMIAL:
        raise UnsupportedPotential("closed first-moment equations need a free or harmonic V")
    k = pot.stiffness if pot.kind is PotentialKind.HARMONIC else 0.0
    M, lam = config.classical.M, config.lam
    m, w = config.basis.m, config.basis.omega
    frozen = config.classical.frozen
    A = np.array([
        [0.0, 1.0 / M, 0.0, 0.0],
        [-k, 0.0, -lam, 0.0],
        [0.0, 0.0, 0.0, 1.0 / m],
        [-lam, 0.0, -m * w ** 2, 0.0],
    ])
    if frozen:
        A[0, :] = 0.0
        A[1, :] = 0.0
    h = config.numerics.dt / substeps
    y = np.asarray(initial, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty((len(t_grid), 4))
    out[0] = y
    t = t_grid[0]
    for i in range(1, len(t_grid)):
        n = max(1, int(np.ceil((t_grid[i] - t) / h - 1e-9)))
        hh = (t_grid[i] - t) / n
        for _ in range(n):
            k1 = A @ y
            k2 = A @ (y + hh / 2 * k1)
            k3 = A @ (y + hh / 2 * k2)
            k4 = A @ (y + hh * k3)
            y = y + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t_grid[i]
        out[i] = y
    return out
