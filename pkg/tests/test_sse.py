import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridqc import (Convention, InvalidParameter, NoiseIncrement, NumericalBlowup,
                      QuantumState, coherent_state, make_coefficients, record_sample, sse_step)
from hybridqc.hilbert import fock_state
from hybridqc.sse import sse_update


def test_coefficient_table():
    zero = make_coefficients(0.0, 1.0)
    assert (zero.c_drift, zero.c_diff) == (0.0, 0.0)
    pl = make_coefficients(1.0, 1.0, 1.0, Convention.PAPER_LITERAL)
    assert (pl.c_drift, pl.c_diff) == (0.25, 0.5)
    cc = make_coefficients(1.0, 1.0, 1.0, Convention.CHAIN_CONSISTENT)
    assert (cc.c_drift, cc.c_diff) == (0.125, 0.5)


def test_coefficient_errors():
    with pytest.raises(InvalidParameter):
        make_coefficients(1.0, 0.0)
    with pytest.raises(InvalidParameter):
        make_coefficients(1.0, -1.0)
    with pytest.raises(ValueError):
        make_coefficients(1.0, 1.0, convention="stratonovich")


@given(st.floats(-10, 10).filter(lambda v: abs(v) > 1e-3), st.floats(0.1, 10),
       st.floats(0.1, 3))
def test_convention_identities(lam, sigma, hbar):
    cc = make_coefficients(lam, sigma, hbar, "chain_consistent")
    pl = make_coefficients(lam, sigma, hbar, "paper_literal")
    assert 2 * cc.c_drift == pytest.approx(cc.c_diff ** 2, rel=1e-14)
    assert pl.c_drift == pytest.approx(pl.c_diff ** 2, rel=1e-14)


def _literal_step(psi, X, c, ops, dW, dt, free_step):
    """The update formula evaluated amplitude by amplitude."""
    n = len(psi)
    band = ops.x_band
    e = ops.energies

    def x_of(v):
        out = [0j] * n
        for k in range(n):
            s = 0j
            if k + 1 < n:
                s += band[k] * v[k + 1]
            if k > 0:
                s += band[k - 1] * v[k - 1]
            out[k] = s
        return out

    xv = x_of(psi)
    xm = sum((psi[k].conjugate() * xv[k]).real for k in range(n))
    y = [xv[k] - xm * psi[k] for k in range(n)]
    xy = x_of(y)
    y2 = [xy[k] - xm * y[k] for k in range(n)]
    new = []
    for k in range(n):
        h = c.lam * X * xv[k] + (e[k] * psi[k] if free_step == "euler" else 0)
        new.append(psi[k] - 1j / c.hbar * h * dt - c.c_drift * y2[k] * dt + c.c_diff * y[k] * dW)
    nrm = math.sqrt(sum(abs(v) ** 2 for v in new))
    new = [v / nrm for v in new]
    if free_step == "exact":
        new = [new[k] * complex(math.cos(e[k] * dt / c.hbar), -math.sin(e[k] * dt / c.hbar))
               for k in range(n)]
    return np.array(new)


@pytest.mark.parametrize("free_step", ["euler", "exact"])
@pytest.mark.parametrize("X", [0.0, 0.8])
def test_step_matches_scalar_evaluation(basis, ops, free_step, X):
    psi = coherent_state(basis, 0.0, 0.0)
    c = make_coefficients(1.0, 1.0)
    noise = NoiseIncrement(0.0213, 1e-3)
    out = sse_step(psi, X, c, ops, noise, free_step=free_step)
    ref = _literal_step(list(psi.amplitudes), X, c, ops, noise.dW, noise.dt, free_step)
    assert np.max(np.abs(out.amplitudes - ref)) < 1e-12


def test_unitary_limit_euler_step(basis, ops):
    psi = coherent_state(basis, 1.0, 0.0)
    dt = 1e-3
    exact = np.exp(-1j * ops.energies * dt) * psi.amplitudes
    for free_step in ("euler", "exact"):
        out = sse_step(psi, 0.0, make_coefficients(0.0, 1.0), ops,
                       NoiseIncrement(0.05, dt), free_step=free_step)
        assert 1 - abs(np.vdot(exact, out.amplitudes)) < 10 * dt ** 2
    out = sse_step(psi, 0.0, make_coefficients(0.0, 1.0), ops, NoiseIncrement(0.05, dt))
    assert 1 - abs(np.vdot(exact, out.amplitudes)) < 1e-14


def test_position_eigenstate_is_not_measured(ops):
    vals, vecs = ops.position_spectrum
    # eigenvectors of the truncated x fill the top levels, so bypass the
    # truncation guard and use the raw update
    psi = QuantumState(vecs[:, 20]).amplitudes
    c = make_coefficients(1.0, 1.0)
    out, prenorm, xm = sse_update(psi[None], 0.0, c, ops, 0.3, 1e-3)
    unitary = np.exp(-1j * ops.energies * 1e-3) * psi
    assert xm[0] == pytest.approx(vals[20], abs=1e-10)
    assert np.max(np.abs(out[0] - unitary)) < 1e-10
    assert prenorm[0] == pytest.approx(1.0, abs=1e-10)


@given(st.floats(-0.2, 0.2), st.floats(-2, 2))
def test_post_step_norm(dW, X):
    from hybridqc import FockBasis, Operators
    basis = FockBasis()
    ops = Operators(basis)
    psi = coherent_state(basis, 1.0, -0.5)
    for conv in Convention:
        out = sse_step(psi, X, make_coefficients(1.0, 1.0, 1.0, conv), ops,
                       NoiseIncrement(dW, 1e-3))
        assert np.linalg.norm(out.amplitudes) == pytest.approx(1.0, abs=1e-12)


def test_blowup_on_huge_increment(basis, ops):
    psi = superpose_cat(basis)
    with pytest.raises(NumericalBlowup):
        sse_step(psi, 0.0, make_coefficients(1.0, 1.0), ops, NoiseIncrement(5.0, 1e-3))


def superpose_cat(basis):
    from hybridqc import superpose
    return superpose([coherent_state(basis, -3, 0), coherent_state(basis, 3, 0)], [1, 1])


def test_record_sample_examples(basis, ops):
    ground = coherent_state(basis, 0.0, 0.0)
    assert record_sample(ground, 1.0, 1.0, 1.0, NoiseIncrement(0.0, 1e-3), ops) == 0.0
    psi = coherent_state(basis, 2.0, 0.0)
    assert record_sample(psi, 1.0, 1.0, 1.0, NoiseIncrement(1e-3, 1e-3), ops) == pytest.approx(3.0)
    with pytest.raises(InvalidParameter):
        record_sample(psi, 0.0, 1.0, 1.0, NoiseIncrement(1e-3, 1e-3), ops)


def test_record_noise_variance(ops):
    lam, sigma, hbar, dt = 2.0, 0.7, 1.0, 1e-3
    rng = np.random.default_rng(5)
    n = 20000
    dW = math.sqrt(dt) * rng.standard_normal(n)
    from hybridqc.sse import record_term
    diff = record_term(lam, 0.4, sigma, hbar, dW, dt) - 0.4
    target = (hbar * sigma / lam) ** 2 / dt
    se = target * math.sqrt(2 / (n - 1))
    assert abs(diff.var(ddof=1) - target) < 3 * se


def _prenorm_changes(ops, convention, n=100000, dt=1e-3):
    from hybridqc import FockBasis
    psi = coherent_state(FockBasis(), 1.0, 0.0).amplitudes
    stack = np.broadcast_to(psi, (n, psi.size))
    dW = math.sqrt(dt) * np.random.default_rng(9).standard_normal(n)
    _, prenorm, _ = sse_update(stack, 0.0, make_coefficients(1.0, 1.0, 1.0, convention),
                               ops, dW, dt)
    d = prenorm - 1
    return d.mean(), d.std(ddof=1) / math.sqrt(n)


def test_norm_martingale_chain_consistent(ops):
    mean, se = _prenorm_changes(ops, Convention.CHAIN_CONSISTENT)
    assert abs(mean) < 3 * se


def test_norm_drift_paper_literal(ops):
    # the printed coefficients lose norm at rate (c_drift - c_diff^2 / 2) Var(x)
    mean, se = _prenorm_changes(ops, Convention.PAPER_LITERAL)
    assert mean == pytest.approx(-0.125 * 0.5 * 1e-3, rel=0.05)
    assert abs(mean) > 10 * se


def test_noise_increment_rate():
    assert NoiseIncrement(0.01, 1e-3).rate == pytest.approx(10.0)


def test_fock_state_helper(basis):
    assert fock_state(basis, 3).amplitudes[3] == 1
