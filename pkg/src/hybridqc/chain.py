"""Discrete measurement chain: exact unitary slice followed by a Gaussian
Kraus operator ``exp(-(x - x_bar)^2 / 4 Delta^2)``, with ``x_bar`` drawn from
its exact outcome distribution.

States are carried in the eigenbasis of the truncated position operator,
where the Kraus operator is diagonal. The outcome density is the Gaussian
mixture ``sum_s |<x_s|psi>|^2 N(x_bar; x_s, Delta^2)``, so sampling an
eigenvalue and then adding ``Delta * xi`` is exact.
"""

from dataclasses import dataclass

import numpy as np

from .classical import classical_update, potential_force
from .errors import DegenerateState, HybridError, InvalidParameter, TruncationError
from .hilbert import Operators, QuantumState, TOP_LEVEL_TOL
from .record import BatchRecord, RowBuffer
from .coupler import initial_state, trajectory_generator

NOISE_BLOCK = 512


@dataclass(frozen=True)
class KrausWidth:
    delta_sq: float
    delta_t: float

    @property
    def delta(self):
        return np.sqrt(self.delta_sq)


@dataclass(frozen=True)
class PositionSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def of(cls, ops):
        vals, vecs = ops.position_spectrum
        return cls(vals, vecs)


def width_from_continuum(lam, sigma, hbar, delta_t):
    """Kraus variance with ``Delta^2 delta_t = hbar^2 sigma^2 / lam^2`` fixed."""
    if lam == 0 or not sigma > 0 or not hbar > 0 or not delta_t > 0:
        raise InvalidParameter("need lam != 0 and positive sigma, hbar, delta_t")
    return KrausWidth((hbar * sigma / lam) ** 2 / delta_t, delta_t)


def kraus_diagonal(xs, x_bar, delta_sq):
    """Diagonal of the Gaussian Kraus operator, normalized to integrate to one."""
    return np.exp(-(xs - x_bar) ** 2 / (4 * delta_sq)) / np.sqrt(4 * np.pi * delta_sq)


class ChainKernel:
    """Cached spectral data for one configuration's chain."""

    def __init__(self, basis, lam, sigma, dt):
        self.ops = Operators(basis)
        self.spectrum = PositionSpectrum.of(self.ops)
        self.xs = self.spectrum.eigenvalues
        self.V = self.spectrum.eigenvectors
        self.Vh = self.V.conj().T
        self.lam, self.sigma, self.dt, self.hbar = lam, sigma, dt, basis.hbar
        self.width = width_from_continuum(lam, sigma, basis.hbar, dt) if lam != 0 else None
        self._u_cache = {}

    def to_x(self, psi):
        return psi @ self.V.conj()

    def to_fock(self, phi):
        return phi @ self.V.T

    def unitary_x(self, X):
        """Slice propagator in the position eigenbasis, cached per X value."""
        key = float(X)
        u = self._u_cache.get(key)
        if u is None:
            u = self.Vh @ self.ops.propagator(self.dt, key, self.lam) @ self.V
            if len(self._u_cache) < 8:
                self._u_cache[key] = u
        return u

    def evolve(self, phi, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 0 or np.all(X == X.flat[0]):
            return phi @ self.unitary_x(X.flat[0]).T
        return np.stack([self.unitary_x(x) @ p for x, p in zip(X, phi)])

    def measure(self, phi, u, xi):
        """Sample outcomes and apply the Kraus update to each row.

        Returns the renormalized rows, ``x_bar``, the log outcome density and
        the chosen eigenvalue index.
        """
        prob = (phi.conj() * phi).real
        cum = np.cumsum(prob, axis=-1)
        s = np.minimum(np.sum(cum < (u * cum[..., -1])[..., None], axis=-1), len(self.xs) - 1)
        d2 = self.width.delta_sq
        x_bar = self.xs[s] + np.sqrt(d2) * xi
        expo = -(self.xs - x_bar[..., None]) ** 2 / (4 * d2)
        shift = np.max(expo, axis=-1)
        new = phi * np.exp(expo - shift[..., None])
        nrm2 = np.sum((new.conj() * new).real, axis=-1)
        if np.any(~(nrm2 > 1e-300)):
            raise DegenerateState("post-measurement state vanished")
        # density of x_bar: sum_s |phi_s|^2 N(x_bar; x_s, Delta^2)
        log_density = np.log(nrm2) + 2 * shift - 0.5 * np.log(2 * np.pi * d2)
        return new / np.sqrt(nrm2)[..., None], x_bar, log_density, s

    def check_truncation(self, phi, step=None):
        top = np.sum(np.abs(phi @ self.V[-2:, :].T) ** 2, axis=-1)
        if np.any(top >= TOP_LEVEL_TOL):
            raise TruncationError(f"top-level occupation {float(np.max(top)):.3e}", step)

    def moments(self, phi, with_p=True):
        prob = (phi.conj() * phi).real
        xm = prob @ self.xs
        var = np.maximum(prob @ self.xs ** 2 - xm ** 2, 0.0)
        if not with_p:
            return xm, None, var
        psi = self.to_fock(phi)
        pm = np.sum((psi.conj() * self.ops.apply_p(psi)).real, axis=-1)
        return xm, pm, var


def chain_step(psi, X, width, spectrum, ops, rng, lam=1.0, dt=None):
    """One unitary slice plus one sampled Gaussian measurement.

    ``rng`` is a numpy Generator; returns the new state and ``x_bar``.
    """
    vals, vecs = spectrum.eigenvalues, spectrum.eigenvectors
    dt = width.delta_t if dt is None else dt
    phi = vecs.conj().T @ (ops.propagator(dt, X, lam) @ psi.amplitudes)
    prob = np.abs(phi) ** 2
    s = min(int(np.searchsorted(np.cumsum(prob), rng.random() * prob.sum(), side="right")),
            len(vals) - 1)
    x_bar = vals[s] + width.delta * rng.standard_normal()
    new = phi * np.exp(-(vals - x_bar) ** 2 / (4 * width.delta_sq))
    nrm = np.linalg.norm(new)
    if not nrm > 1e-300:
        raise DegenerateState("post-measurement state vanished")
    out = vecs @ (new / nrm)
    if np.sum(np.abs(out[-2:]) ** 2) >= TOP_LEVEL_TOL:
        raise TruncationError("top-level occupation after measurement")
    return QuantumState(out, prenorm=float(nrm)), float(x_bar)


def run_chain_batch(config, indices, master_seed=None, psi0=None, kernel=None):
    """Chain trajectories side by side; classical force is ``-V'(X) - lam x_bar``."""
    seed = config.seed if master_seed is None else master_seed
    indices = np.asarray(indices, dtype=np.int64)
    n = len(indices)
    lam, sigma, hbar = config.lam, config.sigma, config.hbar
    num = config.numerics
    dt, n_steps = num.dt, num.n_steps
    kernel = kernel or ChainKernel(config.basis, lam, sigma, dt)
    V = config.classical.potential
    M = config.classical.M
    frozen = config.classical.frozen

    if psi0 is None:
        psi0 = initial_state(config).amplitudes
    phi = kernel.to_x(np.array(np.broadcast_to(psi0, (n, config.basis.dim)), dtype=complex))
    X = np.full(n, float(config.classical.X0))
    P = np.full(n, float(config.classical.P0))
    log_weight = np.zeros(n)
    buf = RowBuffer(n, n_steps, num.output_stride, dt)
    gens = [trajectory_generator(seed, i) for i in indices]
    draws = np.zeros(n, dtype=np.int64)
    for k in range(n_steps):
        j = k % NOISE_BLOCK
        if j == 0:
            kk = min(NOISE_BLOCK, n_steps - k)
            u_blk = np.stack([g.random(kk) for g in gens])
            xi_blk = np.stack([g.standard_normal(kk) for g in gens])
            draws += 2 * kk
        row = buf.row_of(k)
        try:
            if row is not None:
                xm, pm, var = kernel.moments(phi)
                buf.put_state(row, X, P, xm, pm, var)
            phi = kernel.evolve(phi, X)
            if lam != 0:
                phi, x_bar, logd, _ = kernel.measure(phi, u_blk[:, j], xi_blk[:, j])
                log_weight += logd
                force = -lam * x_bar
            else:
                x_bar = kernel.moments(phi, with_p=False)[0]
                force = -(hbar * sigma / np.sqrt(dt)) * xi_blk[:, j]
            kernel.check_truncation(phi, step=k)
        except HybridError as exc:
            exc.step = getattr(exc, "step", None) or k
            raise
        if row is not None:
            buf.put_step(row, x_bar, np.ones(n), np.sqrt(dt) * xi_blk[:, j])
        if not frozen:
            X, P = classical_update(X, P, M, potential_force(V, X) + force, dt, step=k)
    xm, pm, var = kernel.moments(phi)
    buf.put_state(buf.n_rows - 1, X, P, xm, pm, var)
    return BatchRecord(buf.columns(), kernel.to_fock(phi), X, P, indices,
                       config.config_hash(), seed, config.convention.value, "chain",
                       log_weight, draws)


def run_chain(config, seed=None, index=0):
    return run_chain_batch(config, [index], seed).record(0)
