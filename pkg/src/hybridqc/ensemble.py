"""Monte Carlo ensembles: branch statistics, localization times, moment
curves and the deterministic master-equation comparison."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chain import run_chain_batch
from .config import Mode
from .coupler import run_hybrid_batch
from .errors import (DimensionMismatch, EnsembleFailure, HybridError,
                     InvalidDensityMatrix, InvalidParameter)
from .hilbert import Operators, QuantumState
from .sse import make_coefficients

CHUNK = 250
MAX_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class BranchSpec:
    """Packet centres that an initial superposition can localize onto.

    ``classification_radius`` defaults to three ground-state position
    widths. Distances mix position and momentum as
    ``sqrt(dx^2 + (dp / m omega)^2)``. A state counts as localized only if
    its excess variance ``Var(x) - hbar / 2 m omega`` is also below
    ``excess_fraction`` times the squared minimum centre separation, which
    for two packets bounds the minority branch weight ``p1 p2``.
    """

    centers: tuple
    amplitudes: tuple = ()
    classification_radius: float | None = None
    x_scale: float = math.sqrt(0.5)
    m_omega: float = 1.0
    excess_fraction: float = 2e-3

    def __post_init__(self):
        centers = tuple((float(x), float(p)) for x, p in self.centers)
        object.__setattr__(self, "centers", centers)
        if self.classification_radius is None:
            object.__setattr__(self, "classification_radius", 3 * self.x_scale)
        r = self.classification_radius
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                if self._dist(centers[i], centers[j]) <= 2 * r:
                    raise InvalidParameter(
                        f"centers {centers[i]} and {centers[j]} are within 2 * radius ({2 * r:.3g})")

    @property
    def min_separation(self):
        c = self.centers
        seps = [self._dist(c[i], c[j]) for i in range(len(c)) for j in range(i + 1, len(c))]
        return min(seps) if seps else math.inf

    def variance_bound(self, zero_point):
        """Largest Var(x) still counted as localized."""
        bound = 2 * zero_point
        if math.isfinite(self.min_separation):
            bound = min(bound, zero_point + self.excess_fraction * self.min_separation ** 2)
        return bound

    def _dist(self, a, b):
        return math.hypot(a[0] - b[0], (a[1] - b[1]) / self.m_omega)

    @classmethod
    def from_config(cls, config, classification_radius=None):
        b = config.basis
        return cls(tuple((p.x0, p.p0) for p in config.packets), config.amplitudes,
                   classification_radius, b.x_scale, b.m * b.omega)


def track_centers(spec, t, X, basis, lam):
    """Noise-free orbits of each centre under ``m x'' = -m w^2 x - lam X(t)``.

    ``X`` has shape (..., rows) and is held piecewise constant between
    rows. Returns position and momentum arrays of shape
    (..., n_centers, rows).
    """
    m, w = basis.m, basis.omega
    X = np.asarray(X, dtype=float)
    c = np.array(spec.centers, dtype=float)
    lead = X.shape[:-1]
    xs = np.empty(lead + (len(c), len(t)))
    ps = np.empty_like(xs)
    x = np.broadcast_to(c[:, 0], lead + (len(c),)).copy()
    p = np.broadcast_to(c[:, 1], lead + (len(c),)).copy()
    xs[..., 0], ps[..., 0] = x, p
    for k in range(1, len(t)):
        h = t[k] - t[k - 1]
        x_eq = (-lam / (m * w ** 2)) * X[..., k - 1, None]
        u, v = x - x_eq, p / (m * w)
        cs, sn = math.cos(w * h), math.sin(w * h)
        x = x_eq + u * cs + v * sn
        p = m * w * (v * cs - u * sn)
        xs[..., k], ps[..., k] = x, p
    return xs, ps


def localization_time(record, spec, basis=None, lam=None):
    """First time after which the state stays near one branch centre with
    Var(x) below ``spec.variance_bound`` (at most twice the zero-point value).

    Returns ``(time, branch_index)`` or ``(None, None)`` when the run never
    localizes. ``record`` may be a :class:`TrajectoryRecord` or any object
    exposing ``t, X, x_expect, p_expect, x_variance`` columns.
    """
    from .hilbert import FockBasis
    basis = basis or FockBasis()
    lam = 0.0 if lam is None else lam
    t = np.asarray(record.t)
    times, branches = localize_rows(t, np.asarray(record.X)[None], np.asarray(record.x_expect)[None],
                                    np.asarray(record.p_expect)[None],
                                    np.asarray(record.x_variance)[None], spec, basis, lam)
    if branches[0] < 0:
        return None, None
    return float(times[0]), int(branches[0])


def localize_rows(t, X, xm, pm, var, spec, basis, lam):
    """Vectorized localization over trajectories; rows of shape (n, rows).

    Returns localization times (NaN if never) and branch indices (-1 if never).
    """
    cx, cp = track_centers(spec, t, X, basis, lam)
    mw = basis.m * basis.omega
    good_var = (var <= spec.variance_bound(basis.zero_point_variance))[:, None, :]
    d = np.hypot(xm[:, None, :] - cx, (pm[:, None, :] - cp) / mw)
    ok = (d <= spec.classification_radius) & good_var
    rows = len(t)
    # index just after the last failing row; 0 if never failed
    last_bad = rows - 1 - np.argmax(~ok[..., ::-1], axis=-1)
    never_bad = ok.all(axis=-1)
    first = np.where(never_bad, 0, last_bad + 1)
    settled = ok[..., -1]
    branch = np.where(settled.any(axis=-1), np.argmax(settled, axis=-1), -1)
    idx = np.where(branch >= 0, first[np.arange(len(first)), np.maximum(branch, 0)], 0)
    times = np.where(branch >= 0, t[np.minimum(idx, rows - 1)], np.nan)
    return times, branch


def wilson_interval(k, n, z=1.959963984540054):
    if n == 0:
        return (0.0, 1.0)
    ph = k / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    # the bounds are exactly 0 and 1 at the extremes; avoid rounding just inside
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return (min(lo, ph), max(hi, ph))


@dataclass
class EnsembleSummary:
    n_trajectories: int
    branch_counts: list
    unresolved: int
    failed: int
    frequencies: list
    intervals: list
    localization_times: np.ndarray
    t: np.ndarray
    moments: dict = field(default_factory=dict)
    moment_se: dict = field(default_factory=dict)
    branches: np.ndarray | None = None
    final_X: np.ndarray | None = None
    final_psi: np.ndarray | None = None
    oracle: dict = field(default_factory=dict)

    @property
    def localization_quartiles(self):
        """Quartiles with never-localized runs counted as infinitely late."""
        lt = np.where(np.isnan(self.localization_times), np.inf, self.localization_times)
        if lt.size == 0:
            return (math.nan, math.nan, math.nan)
        return tuple(float(q) for q in np.quantile(lt, [0.25, 0.5, 0.75], method="inverted_cdf"))

    @property
    def median_localization_time(self):
        return self.localization_quartiles[1]

    def branch_table(self):
        rows = []
        for b, (k, f, ci) in enumerate(zip(self.branch_counts, self.frequencies, self.intervals)):
            rows.append({"branch": b, "count": k, "frequency": f,
                         "wilson_low": ci[0], "wilson_high": ci[1]})
        rows.append({"branch": "unresolved", "count": self.unresolved,
                     "frequency": self.unresolved / max(self.n_trajectories, 1)})
        return rows

    def to_dict(self):
        lq = self.localization_quartiles
        return {
            "n_trajectories": self.n_trajectories,
            "branch_table": self.branch_table(),
            "failed": self.failed,
            "localization_time": {"q25": lq[0], "median": lq[1], "q75": lq[2],
                                  "localized": int(np.isfinite(self.localization_times).sum())},
            "oracle": self.oracle,
        }


MOMENT_KEYS = ("x_expect", "X", "x_variance")


def _run_chunk(args):
    config, indices, master_seed, spec, keep_final = args
    runner = run_chain_batch if config.mode is Mode.CHAIN else run_hybrid_batch
    try:
        batches = [runner(config, indices, master_seed)]
        failed = 0
    except HybridError:
        batches, failed = [], 0
        for i in indices:
            try:
                batches.append(runner(config, [i], master_seed))
            except HybridError:
                failed += 1
    out = {"failed": failed, "rows": {key: [] for key in MOMENT_KEYS}, "count": 0,
           "loc": [], "branch": [], "final_X": [], "final_psi": [], "index": []}
    for b in batches:
        cols = b.columns
        for key in MOMENT_KEYS:
            out["rows"][key].append(cols[key])
        out["count"] += len(b)
        t = cols["t"][0]
        times, br = localize_rows(t, cols["X"], cols["x_expect"], cols["p_expect"],
                                  cols["x_variance"], spec, config.basis, config.lam)
        out["loc"].extend(times.tolist())
        out["branch"].extend(br.tolist())
        out["final_X"].append(b.final_X)
        out["index"].append(b.indices)
        if keep_final:
            out["final_psi"].append(b.final_psi)
        out["t"] = t
    return out


def run_ensemble(config, n, master_seed=None, spec=None, chunk=CHUNK, workers=1,
                 keep_final=False):
    """Run ``n`` trajectories with seeds ``(master_seed, index)``.

    Per-trajectory rows are gathered in index order before any reduction,
    so the summary does not depend on chunk size or worker scheduling.
    """
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    if config.mode is Mode.MEANFIELD:
        raise InvalidParameter("mean-field dynamics is deterministic; use run_meanfield")
    master_seed = config.seed if master_seed is None else master_seed
    spec = spec or BranchSpec.from_config(config)
    jobs = [(config, list(range(s, min(s + chunk, n))), master_seed, spec, keep_final)
            for s in range(0, n, chunk)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]

    failed = sum(p["failed"] for p in parts)
    if failed > MAX_FAILURE_FRACTION * n:
        raise EnsembleFailure(f"{failed} of {n} trajectories failed")
    done = sum(p["count"] for p in parts)
    t = next(p["t"] for p in parts if "t" in p)
    moments, se = {}, {}
    for key in MOMENT_KEYS:
        rows = np.concatenate([r for p in parts for r in p["rows"][key]])
        moments[key] = rows.mean(axis=0)
        var = rows.var(axis=0, ddof=1) if done > 1 else np.zeros(rows.shape[1])
        se[key] = np.sqrt(var / done)
    branches = np.concatenate([np.asarray(p["branch"], dtype=int) for p in parts])
    loc = np.concatenate([np.asarray(p["loc"], dtype=float) for p in parts])
    counts = [int(np.sum(branches == b)) for b in range(len(spec.centers))]
    unresolved = int(np.sum(branches < 0))
    freqs = [c / done for c in counts]
    intervals = [wilson_interval(c, done) for c in counts]
    final_psi = (np.concatenate([np.concatenate(p["final_psi"]) for p in parts if p["final_psi"]])
                 if keep_final else None)
    return EnsembleSummary(done, counts, unresolved, failed, freqs, intervals, loc, t,
                           moments, se, branches,
                           np.concatenate([np.concatenate(p["final_X"]) for p in parts if p["final_X"]]),
                           final_psi)


def dephasing_rate(coeffs):
    """Double-commutator strength of the ensemble-average dynamics, c_diff^2 / 2."""
    return coeffs.c_diff ** 2 / 2


def validate_density_matrix(rho, tol=1e-10):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDensityMatrix("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InvalidDensityMatrix("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > tol:
        raise InvalidDensityMatrix("density matrix trace is not 1")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise InvalidDensityMatrix("density matrix is not positive semidefinite")
    return rho


def lindblad_oracle(config, rho0, t_grid, X=None, dt=None, D=None, check_purity=True):
    """RK4 solution of ``d rho/dt = -i/hbar [H0 + lam X(t) x, rho] - D [x, [x, rho]]``.

    ``X`` is a constant, a callable of time, or None (``config.classical.X0``).
    ``D`` defaults to :func:`dephasing_rate` of the configured convention.
    Returns an array of shape (len(t_grid), dim, dim). With constant ``X``
    the purity is asserted non-increasing at every internal step.
    """
    rho = validate_density_matrix(rho0).copy()
    ops = Operators(config.basis)
    hbar, lam = config.hbar, config.lam
    if D is None:
        D = dephasing_rate(make_coefficients(lam, config.sigma, hbar, config.convention))
    if X is None:
        X = config.classical.X0
    x_fn = X if callable(X) else (lambda t, _X=float(X): _X)
    constant_X = not callable(X)
    h0 = ops.h0.entries
    xop = ops.x.entries
    dt = config.numerics.dt if dt is None else dt

    def rhs(t, r):
        H = h0 + lam * x_fn(t) * xop
        xr = xop @ r
        c1 = xr - r @ xop
        return (-1j / hbar) * (H @ r - r @ H) - D * (xop @ c1 - c1 @ xop)

    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty((len(t_grid),) + rho.shape, dtype=complex)
    out[0] = rho
    t = t_grid[0]
    purity = np.vdot(rho, rho).real
    for i in range(1, len(t_grid)):
        span = t_grid[i] - t
        steps = max(1, int(math.ceil(span / dt - 1e-9)))
        h = span / steps
        for _ in range(steps):
            k1 = rhs(t, rho)
            k2 = rhs(t + h / 2, rho + h / 2 * k1)
            k3 = rhs(t + h / 2, rho + h / 2 * k2)
            k4 = rhs(t + h, rho + h * k3)
            rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            if check_purity and constant_X:
                p = np.vdot(rho, rho).real
                assert p <= purity + 1e-12, f"purity increased at t={t}: {purity} -> {p}"
                purity = p
        out[i] = rho
    return out


def trace_distance(a, b):
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def ensemble_density(states):
    psi = np.asarray([s.amplitudes if isinstance(s, QuantumState) else s for s in states])
    return psi.T @ psi.conj() / len(psi)


def ensemble_vs_oracle(states, rho):
    """Half trace-norm distance between the ensemble mixture and ``rho``."""
    avg = ensemble_density(states)
    if avg.shape != np.shape(rho):
        raise DimensionMismatch(f"ensemble dim {avg.shape} vs oracle {np.shape(rho)}")
    return trace_distance(avg, rho)
