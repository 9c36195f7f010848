import math

import numpy as np
import pytest

from hybridqc import (ClassicalParams, ClassicalState, Coupling, FockBasis, HybridConfig, Mode,
                      Numerics, Operators, Packet, PotentialSpec, UnsupportedPotential,
                      coherent_state, ehrenfest_oracle, initial_state, run_ensemble,
                      run_meanfield)
from hybridqc.ensemble import BranchSpec
from hybridqc.hilbert import coherent_orbit
from hybridqc.meanfield import MeanFieldState, _exact_step, meanfield_step


def mf_config(lam=0.1, k=1.0, x0=1.0, X0=0.0, t_final=5.0, stride=100, **kw):
    return HybridConfig(Coupling(lam, 1.0),
                        classical=ClassicalParams(potential=PotentialSpec.harmonic(k), X0=X0),
                        packets=(Packet(x0, 0.0),), numerics=Numerics(1e-3, t_final, stride),
                        mode=Mode.MEANFIELD, **kw)


def test_decoupled_unitary():
    basis = FockBasis()
    cfg = HybridConfig(Coupling(0.0, 1.0), packets=(Packet(1.0, 0.0),),
                       numerics=Numerics(1e-3, 10.0, 1000), mode=Mode.MEANFIELD)
    rec = run_meanfield(cfg)
    exact = coherent_orbit(basis, 1.0, 0.0, 10.0).amplitudes
    assert abs(np.vdot(exact, rec.final_state.amplitudes)) >= 1 - 1e-6


def test_symmetric_superposition_force_vanishes():
    cfg = HybridConfig(Coupling(1.0, 1.0),
                       classical=ClassicalParams(potential=PotentialSpec.harmonic(2.0)),
                       packets=(Packet(-5.0, 0.0), Packet(5.0, 0.0)), amplitudes=(1.0, 1.0),
                       numerics=Numerics(1e-3, 0.01, 1), mode=Mode.MEANFIELD)
    rec = run_meanfield(cfg)
    assert abs(-cfg.lam * rec.x_expect[0]) < 1e-6
    assert rec.X[1] == 0.0 and abs(rec.P[1]) < 1e-9


def test_matches_ehrenfest_oracle():
    # semi-implicit Euler lags by O(dt * force); keep the classical drive weak
    cfg = mf_config(lam=0.08)
    rec = run_meanfield(cfg)
    oracle = ehrenfest_oracle(cfg, (0.0, 0.0, 1.0, 0.0), rec.t)
    assert np.max(np.abs(rec.X - oracle[:, 0])) < 1e-4
    assert np.max(np.abs(rec.P - oracle[:, 1])) < 1e-4
    assert np.max(np.abs(rec.x_expect - oracle[:, 2])) < 1e-4
    assert np.max(np.abs(rec.p_expect - oracle[:, 3])) < 1e-4


def test_exact_step_norm(ops):
    psi = coherent_state(FockBasis(), 1.0, 0.0).amplitudes
    for _ in range(1000):
        psi = _exact_step(psi, 0.7, ops, 0.5, 1e-3)
        assert abs(np.linalg.norm(psi) - 1) < 1e-12


def test_meanfield_step_matches_run():
    cfg = mf_config(lam=0.5, t_final=0.01, stride=1)
    ops = Operators(cfg.basis)
    state = MeanFieldState(initial_state(cfg), ClassicalState(0.0, 0.0))
    for _ in range(10):
        state = meanfield_step(state, cfg, 1e-3, ops)
    rec = run_meanfield(cfg)
    assert state.classical.X == pytest.approx(rec.X[-1], abs=1e-14)
    assert np.allclose(state.psi.amplitudes, rec.final_state.amplitudes, atol=1e-12)


def test_oracle_decoupled_orbits():
    cfg = mf_config(lam=0.0, k=4.0)
    t = np.linspace(0, 5, 51)
    out = ehrenfest_oracle(cfg, (1.0, 0.0, 0.5, 0.2), t)
    assert np.allclose(out[:, 0], np.cos(2 * t), atol=1e-9)
    assert np.allclose(out[:, 2], 0.5 * np.cos(t) + 0.2 * np.sin(t), atol=1e-9)


@pytest.mark.parametrize("lam", [0.3, 0.6])
def test_oracle_normal_modes(lam):
    cfg = mf_config(lam=lam, k=1.0)
    t = np.linspace(0, 10, 101)
    sym = ehrenfest_oracle(cfg, (1.0, 0.0, 1.0, 0.0), t)
    anti = ehrenfest_oracle(cfg, (1.0, 0.0, -1.0, 0.0), t)
    assert np.allclose(sym[:, 0], np.cos(math.sqrt(1 + lam) * t), atol=1e-8)
    assert np.allclose(anti[:, 0], np.cos(math.sqrt(1 - lam) * t), atol=1e-8)


def test_oracle_beat_period():
    lam = 0.05
    cfg = mf_config(lam=lam, k=1.0).with_(numerics=Numerics(1e-2, 1.0, 1))
    t = np.linspace(0, 2 * math.pi / lam, 20001)
    out = ehrenfest_oracle(cfg, (1.0, 0.0, 0.0, 0.0), t)
    energy_X = 0.5 * out[:, 1] ** 2 + 0.5 * out[:, 0] ** 2
    # all energy moves to the oscillator after half a beat period
    t_min = t[np.argmin(energy_X)]
    assert t_min == pytest.approx(math.pi / lam, rel=0.02)


def test_oracle_rejects_anharmonic():
    cfg = mf_config().with_(classical=ClassicalParams(potential=PotentialSpec.polynomial([0, 0, 0, 0, 1])))
    with pytest.raises(UnsupportedPotential):
        ehrenfest_oracle(cfg, (0, 0, 0, 0), [0, 1])


def test_hybrid_embeds_meanfield_for_single_packet():
    # small sigma, single coherent packet: ensemble means follow the mean-field orbit
    cfg = HybridConfig(Coupling(0.2, 0.2),
                       classical=ClassicalParams(potential=PotentialSpec.harmonic(2.0), X0=0.5),
                       packets=(Packet(1.0, 0.0),), numerics=Numerics(1e-3, 2.0, 100))
    mf = run_meanfield(cfg.with_(mode=Mode.MEANFIELD))
    s = run_ensemble(cfg, 400, 3, spec=BranchSpec.from_config(cfg))
    for key, col in (("X", mf.X), ("x_expect", mf.x_expect)):
        err = np.abs(s.moments[key] - col)
        assert np.all(err[1:] <= 4 * s.moment_se[key][1:] + 1e-3), key
