"""Weak-error estimation for the SDE integrator against the measurement
chain.

The chain's ensemble-mean state obeys a closed linear map per slice
(exact unitary, then Gaussian dephasing in the position eigenbasis), so
its mean observables are computed deterministically here. The SDE side is
Monte Carlo with a martingale control variate: each increment ``dW_k`` is
weighted by the linear response of ``<x>(T)`` to a kick in ``(<x>, <p>)``
at ``t_k``. The weights are non-anticipating, so the control variate has
mean zero and removes most of the sampling noise without biasing the
estimate.
"""

import math

import numpy as np

from .chain import ChainKernel
from .coupler import NoiseStreams, initial_state
from .hilbert import Operators
from .sse import check_prenorm, make_coefficients, sse_kernel


def chain_mean_density(config, n_steps=None, X=None):
    """Ensemble-average density matrix of the chain after ``n_steps`` slices.

    Classical position is held at ``X`` (default ``config.classical.X0``).
    """
    num = config.numerics
    n_steps = num.n_steps if n_steps is None else n_steps
    X = config.classical.X0 if X is None else X
    kernel = ChainKernel(config.basis, config.lam, config.sigma, num.dt)
    psi = kernel.to_x(initial_state(config).amplitudes)
    rho = np.outer(psi, psi.conj())
    U = kernel.unitary_x(X)
    if config.lam != 0:
        d2 = kernel.width.delta_sq
        xs = kernel.xs
        damp = np.exp(-(xs[:, None] - xs[None, :]) ** 2 / (8 * d2))
    else:
        damp = 1.0
    for _ in range(n_steps):
        rho = damp * (U @ rho @ U.conj().T)
    return kernel.V @ rho @ kernel.V.conj().T


def chain_mean_position(config, n_steps=None):
    rho = chain_mean_density(config, n_steps)
    ops = Operators(config.basis)
    return float(np.trace(ops.x.entries @ rho).real)


def sde_mean_position(config, n, master_seed=None, chunk=2000, control_variate=True):
    """Monte Carlo E[<x>(T)] for the SDE with frozen classical position.

    Returns ``(mean, standard_error)``.
    """
    seed = config.seed if master_seed is None else master_seed
    ops = Operators(config.basis)
    coeffs = make_coefficients(config.lam, config.sigma, config.hbar, config.convention)
    num = config.numerics
    dt, n_steps = num.dt, num.n_steps
    T = n_steps * dt
    w, m = config.basis.omega, config.basis.m
    X = float(config.classical.X0)
    psi0 = initial_state(config).amplitudes
    vals = []
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        psi = np.array(np.broadcast_to(psi0, (len(idx), psi0.size)), dtype=complex)
        streams = NoiseStreams(seed, idx)
        z = streams.block(n_steps)
        cv = np.zeros(len(idx))
        for k in range(n_steps):
            dW = math.sqrt(dt) * z[:, k]
            if control_variate:
                xpsi = ops.apply_x(psi)
                ppsi = ops.apply_p(psi)
                xm = np.sum((psi.conj() * xpsi).real, axis=-1)
                pm = np.sum((psi.conj() * ppsi).real, axis=-1)
                dx = xpsi - xm[:, None] * psi
                dp = ppsi - pm[:, None] * psi
                vx = np.sum((dx.conj() * dx).real, axis=-1)
                cxp = np.sum((dx.conj() * dp).real, axis=-1)
                tau = T - k * dt
                gain = 2 * coeffs.c_diff * (math.cos(w * tau) * vx
                                            + math.sin(w * tau) / (m * w) * cxp)
                cv += gain * dW
            psi, prenorm, _, _ = sse_kernel(psi, X, coeffs, ops, dW, dt)
            check_prenorm(prenorm, k)
        xT = np.sum((psi.conj() * ops.apply_x(psi)).real, axis=-1)
        vals.append(xT - cv)
    y = np.concatenate(vals)
    return float(y.mean()), float(y.std(ddof=1) / math.sqrt(len(y)))


def weak_order(config, dts, n, master_seed=None):
    """Fit the exponent of |E_sde[<x>(T)] - E_chain[<x>(T)]| against dt.

    Returns a dict with per-dt errors, standard errors and the fitted slope.
    """
    errs, ses = [], []
    for dt in dts:
        cfg = config.with_(**{"numerics.dt": dt, "numerics.output_stride": 1})
        ref = chain_mean_position(cfg)
        est, se = sde_mean_position(cfg, n, master_seed)
        errs.append(est - ref)
        ses.append(se)
    errs = np.array(errs)
    slope = np.polyfit(np.log(dts), np.log(np.abs(errs)), 1)[0]
    return {"dt": list(dts), "error": errs.tolist(), "se": ses, "exponent": float(slope)}
