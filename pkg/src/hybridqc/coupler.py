"""Lockstep integration of the measured oscillator and the classical
particle, sharing one Gaussian increment per step.

Per step, with start-of-step values throughout: draw ``dW``; form ``<x>``;
emit the record ``x_bar``; advance the quantum state with the current ``X``;
advance ``(X, P)`` under ``-V'(X) - lam <x> - hbar sigma dW/dt``.
"""

import numpy as np

from .classical import classical_update, potential_force, record_force
from .errors import HybridError, InvalidParameter
from .hilbert import (Operators, check_truncation, coherent_state, row_sum,
                      squeezed_state, superpose)
from .record import BatchRecord, RowBuffer
from .sse import check_prenorm, make_coefficients, record_term, sse_kernel

NOISE_BLOCK = 512


def trajectory_generator(master_seed, index):
    """Counter-based stream keyed by ``(master_seed, index)``."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return np.random.Generator(np.random.Philox(ss))


class NoiseStreams:
    """One independent standard-normal stream per trajectory."""

    def __init__(self, master_seed, indices):
        self.gens = [trajectory_generator(master_seed, i) for i in indices]
        self.draws = np.zeros(len(self.gens), dtype=np.int64)

    def block(self, k):
        self.draws += k
        return np.stack([g.standard_normal(k) for g in self.gens])


def packet_state(basis, packet):
    if packet.x_variance is None:
        return coherent_state(basis, packet.x0, packet.p0)
    return squeezed_state(basis, packet.x_variance, packet.x0, packet.p0)


def initial_state(config):
    states = [packet_state(config.basis, p) for p in config.packets]
    if len(states) == 1 and config.amplitudes[0] != 0:
        return states[0]
    return superpose(states, config.amplitudes)


def state_moments(psi, ops):
    """<x>, <p>, Var(x) for a stack of states."""
    xpsi = ops.apply_x(psi)
    xm = row_sum((psi.conj() * xpsi).real)
    pm = row_sum((psi.conj() * ops.apply_p(psi)).real)
    var = row_sum((xpsi.conj() * xpsi).real) - xm ** 2
    return xm, pm, np.maximum(var, 0.0)


def _momentum(psi, ops):
    return row_sum((psi.conj() * ops.apply_p(psi)).real)


def run_hybrid_batch(config, indices, master_seed=None, psi0=None, ops=None, snapshot_steps=()):
    """Integrate trajectories ``indices`` of ``config`` side by side.

    Every row of the batch is computed with elementwise kernels only, so a
    trajectory's numbers do not depend on which batch it ran in. States at
    the steps listed in ``snapshot_steps`` are kept in ``.snapshots``.
    """
    seed = config.seed if master_seed is None else master_seed
    indices = np.asarray(indices, dtype=np.int64)
    n = len(indices)
    ops = ops or Operators(config.basis)
    lam, sigma, hbar = config.lam, config.sigma, config.hbar
    coeffs = make_coefficients(lam, sigma, hbar, config.convention)
    num = config.numerics
    dt, n_steps = num.dt, num.n_steps
    sqdt = np.sqrt(dt)
    V = config.classical.potential
    M = config.classical.M
    frozen = config.classical.frozen

    if psi0 is None:
        psi0 = initial_state(config).amplitudes
    psi = np.array(np.broadcast_to(psi0, (n, config.basis.dim)), dtype=complex)
    X = np.full(n, float(config.classical.X0))
    P = np.full(n, float(config.classical.P0))
    buf = RowBuffer(n, n_steps, num.output_stride, dt)
    streams = NoiseStreams(seed, indices)
    z = None
    snapshot_steps = set(snapshot_steps)
    snapshots = {}
    for k in range(n_steps):
        if k in snapshot_steps:
            snapshots[k] = psi.copy()
        j = k % NOISE_BLOCK
        if j == 0:
            z = streams.block(min(NOISE_BLOCK, n_steps - k))
        dW = sqdt * z[:, j]
        try:
            new, prenorm, xm, var = sse_kernel(psi, X, coeffs, ops, dW, dt)
            check_prenorm(prenorm, k)
            check_truncation(new, step=k)
        except HybridError as exc:
            exc.step = getattr(exc, "step", None) or k
            raise
        x_bar = record_term(lam, xm, sigma, hbar, dW, dt) if lam != 0 else xm.copy()
        row = buf.row_of(k)
        if row is not None:
            buf.put_state(row, X, P, xm, _momentum(psi, ops), np.maximum(var, 0.0))
            buf.put_step(row, x_bar, prenorm, dW)
        if not frozen:
            force = potential_force(V, X) + record_force(lam, xm, sigma, hbar, dW, dt)
            X, P = classical_update(X, P, M, force, dt, step=k)
        psi = new
    if n_steps in snapshot_steps:
        snapshots[n_steps] = psi.copy()
    xm, pm, var = state_moments(psi, ops)
    buf.put_state(buf.n_rows - 1, X, P, xm, pm, var)
    out = BatchRecord(buf.columns(), psi, X, P, indices, config.config_hash(), seed,
                      config.convention.value, config.mode.value, None, streams.draws.copy())
    out.snapshots = snapshots
    return out


def run_trajectory(config, seed=None, index=0):
    """Single hybrid trajectory; ``seed`` defaults to ``config.seed``."""
    from .config import Mode
    if config.mode is not Mode.HYBRID:
        raise InvalidParameter(f"run_trajectory needs mode=hybrid, got {config.mode.value}")
    return run_hybrid_batch(config, [index], seed).record(0)


def thermal_sigma(M, gamma, kBT, hbar=1.0):
    """Measurement width matching a Langevin bath: sqrt(2 M gamma kBT) / hbar."""
    for name, val in (("M", M), ("gamma", gamma), ("kBT", kBT), ("hbar", hbar)):
        if not val > 0:
            raise InvalidParameter(f"{name} must be positive")
    return np.sqrt(2.0 * M * gamma * kBT) / hbar
