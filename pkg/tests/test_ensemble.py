import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridqc import (BranchSpec, ClassicalParams, Coupling, FockBasis, HybridConfig,
                      InvalidParameter, Mode, Numerics, Packet, PotentialSpec,
                      coherent_state, initial_state, lindblad_oracle, localization_time,
                      run_ensemble, run_hybrid_batch, run_trajectory, superpose, trace_distance)
from hybridqc.convergence import chain_mean_density
from hybridqc.ensemble import (dephasing_rate, ensemble_vs_oracle, localize_rows,
                               track_centers, validate_density_matrix, wilson_interval)
from hybridqc.errors import DimensionMismatch, EnsembleFailure, InvalidDensityMatrix
from hybridqc.hilbert import coherent_orbit
from hybridqc.sse import make_coefficients


def cat_config(amps=(1.0, 1.0), sep=10.0, **kw):
    h = sep / 2
    cfg = HybridConfig(Coupling(1.0, 1.0),
                       classical=ClassicalParams(potential=PotentialSpec.harmonic(2.0)),
                       packets=(Packet(-h, 0.0), Packet(h, 0.0)), amplitudes=amps,
                       numerics=Numerics(1e-3, 1.0, 1), seed=5)
    return cfg.with_(**kw) if kw else cfg


def test_branch_spec_defaults_and_validation():
    spec = BranchSpec(((-5, 0), (5, 0)))
    assert spec.classification_radius == pytest.approx(3 * math.sqrt(0.5))
    assert spec.min_separation == 10
    with pytest.raises(InvalidParameter):
        BranchSpec(((-1, 0), (1, 0)))


def test_single_packet_localized_at_zero():
    cfg = HybridConfig(Coupling(1.0, 1.0), packets=(Packet(2.0, 0.0),),
                       classical=ClassicalParams(frozen=True), numerics=Numerics(1e-3, 0.3, 1))
    rec = run_trajectory(cfg)
    spec = BranchSpec.from_config(cfg)
    assert localization_time(rec, spec, cfg.basis, cfg.lam) == (0.0, 0)
    s = run_ensemble(cfg, 50, 1)
    assert s.branch_counts == [50] and s.unresolved == 0


def test_equal_superposition_small_ensemble():
    s = run_ensemble(cat_config(), 400, 12)
    assert sum(s.branch_counts) + s.unresolved == 400
    assert abs(s.frequencies[0] - 0.5) < 3 * math.sqrt(0.25 / 400)
    for lo, hi in s.intervals:
        assert 0 <= lo <= hi <= 1
    q = s.localization_quartiles
    assert q[0] <= q[1] <= q[2]


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_interval(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_branch_invariant_under_global_phase_and_relabeling():
    cfg = cat_config(amps=(1.0, 0.9))
    phased = cfg.with_(amplitudes=tuple(a * cmath.exp(0.7j) for a in cfg.amplitudes))
    swapped = cfg.with_(packets=cfg.packets[::-1], amplitudes=cfg.amplitudes[::-1])
    idx = range(40)
    runs = [run_hybrid_batch(c, idx, 3) for c in (cfg, phased, swapped)]
    out = []
    for c, b in zip((cfg, phased, swapped), runs):
        spec = BranchSpec.from_config(c)
        cols = b.columns
        _, br = localize_rows(cols["t"][0], cols["X"], cols["x_expect"], cols["p_expect"],
                              cols["x_variance"], spec, c.basis, c.lam)
        out.append([spec.centers[i] if i >= 0 else None for i in br])
    assert out[0] == out[1] == out[2]


def test_summary_independent_of_chunking_and_workers():
    cfg = cat_config(numerics=Numerics(1e-3, 0.4, 10))
    a = run_ensemble(cfg, 60, 4, chunk=60)
    b = run_ensemble(cfg, 60, 4, chunk=13)
    assert np.array_equal(a.branches, b.branches)
    assert np.array_equal(a.localization_times, b.localization_times, equal_nan=True)
    assert np.array_equal(a.final_X, b.final_X)
    for key in a.moments:
        assert np.array_equal(a.moments[key], b.moments[key])
        assert np.array_equal(a.moment_se[key], b.moment_se[key])
    c = run_ensemble(cfg, 60, 4, chunk=13, workers=2)
    assert np.array_equal(b.branches, c.branches)
    for key in b.moments:
        assert np.array_equal(b.moments[key], c.moments[key])


def test_ensemble_failure_threshold():
    cfg = HybridConfig(Coupling(1.0, 1.0), FockBasis(24),
                       classical=ClassicalParams(X0=20.0, frozen=True),
                       numerics=Numerics(1e-3, 2.0, 1))
    with pytest.raises(EnsembleFailure):
        run_ensemble(cfg, 4, 0)
    with pytest.raises(InvalidParameter):
        run_ensemble(cfg.with_(mode=Mode.MEANFIELD), 4, 0)
    with pytest.raises(InvalidParameter):
        run_ensemble(cfg, 0, 0)


def test_track_centers_free_rotation():
    basis = FockBasis()
    spec = BranchSpec(((-3, 0), (3, 1)))
    t = np.linspace(0, 2, 21)
    cx, cp = track_centers(spec, t, np.zeros((1, 21)), basis, 0.0)
    assert np.allclose(cx[0, 1], 3 * np.cos(t) + np.sin(t), atol=1e-12)
    assert np.allclose(cp[0, 1], np.cos(t) - 3 * np.sin(t), atol=1e-12)


def test_dephasing_rate_matches_chain_mean_map():
    # the chain's averaged slice damps rho_ij by exp(-(x_i - x_j)^2 / 8 Delta^2)
    cfg = cat_config(sep=4.0, **{"classical.frozen": True, "numerics.t_final": 0.2,
                                 "numerics.dt": 1e-3})
    rho0 = initial_state(cfg).density_matrix()
    chain = chain_mean_density(cfg)
    lind = lindblad_oracle(cfg, rho0, [0.0, 0.2])[-1]
    assert trace_distance(chain, lind) < 2e-3
    half = lindblad_oracle(cfg, rho0, [0.0, 0.2], D=dephasing_rate(
        make_coefficients(1.0, 1.0)) / 2)[-1]
    assert trace_distance(chain, half) > 10 * trace_distance(chain, lind)


def test_lindblad_unitary_limit():
    basis = FockBasis()
    cfg = HybridConfig(Coupling(0.0, 1.0), packets=(Packet(1.0, 0.5),))
    rho0 = coherent_state(basis, 1.0, 0.5).density_matrix()
    rho = lindblad_oracle(cfg, rho0, [0.0, 1.0], D=0.0)[-1]
    exact = coherent_orbit(basis, 1.0, 0.5, 1.0).density_matrix()
    assert trace_distance(rho, exact) < 1e-8


def test_lindblad_purity_decreases():
    cfg = cat_config(sep=4.0, **{"classical.frozen": True})
    rho0 = initial_state(cfg).density_matrix()
    out = lindblad_oracle(cfg, rho0, np.linspace(0, 0.5, 11))
    purity = [np.vdot(r, r).real for r in out]
    assert np.all(np.diff(purity) <= 1e-12)
    assert purity[-1] < purity[0]


def test_coherence_decay_rate():
    lam, sep, t = 0.5, 4.0, 0.2
    basis = FockBasis()
    cfg = cat_config(sep=sep, **{"coupling.lam": lam, "classical.frozen": True})
    D = dephasing_rate(make_coefficients(lam, 1.0))
    a = coherent_state(basis, -sep / 2, 0)
    b = coherent_state(basis, sep / 2, 0)
    rho0 = superpose([a, b], [1, 1]).density_matrix()
    rho = lindblad_oracle(cfg, rho0, [0.0, t])[-1]
    a_t = coherent_orbit(basis, -sep / 2, 0, t).amplitudes
    b_t = coherent_orbit(basis, sep / 2, 0, t).amplitudes
    c0 = abs(np.vdot(a.amplitudes, rho0 @ b.amplitudes))
    ct = abs(np.vdot(a_t, rho @ b_t))
    rate = -math.log(ct / c0) / t
    # separation rotates as sep * cos(t); average (sep cos s)^2 over the window
    s = np.linspace(0, t, 201)
    expected = D * np.mean((sep * np.cos(s)) ** 2)
    assert rate == pytest.approx(expected, rel=0.1)


def test_density_matrix_validation():
    with pytest.raises(InvalidDensityMatrix):
        validate_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(InvalidDensityMatrix):
        validate_density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(InvalidDensityMatrix):
        validate_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))


def test_ensemble_vs_oracle_basics(basis):
    psi = coherent_state(basis, 1.0, 0.0)
    assert ensemble_vs_oracle([psi] * 3, psi.density_matrix()) < 1e-14
    with pytest.raises(DimensionMismatch):
        ensemble_vs_oracle([psi], np.eye(4) / 4)


def test_first_moments_follow_ehrenfest_with_frozen_X():
    cfg = cat_config(sep=4.0, **{"classical.frozen": True, "classical.X0": 0.5,
                                 "numerics.output_stride": 50})
    s = run_ensemble(cfg, 300, 8, spec=BranchSpec.from_config(cfg, 1.0))
    t = s.t
    # m x'' = -m w^2 x - lam X with <x>(0) = 0, <p>(0) = 0
    x_eq = -cfg.lam * 0.5
    expected = x_eq * (1 - np.cos(t))
    assert np.all(np.abs(s.moments["x_expect"] - expected) <= 4 * s.moment_se["x_expect"] + 1e-3)
