"""Trajectory records and their row buffers."""

from dataclasses import dataclass, field

import numpy as np

COLUMNS = ("t", "X", "P", "x_expect", "p_expect", "x_variance", "x_bar", "prenorm", "dW")
STEP_COLUMNS = ("x_bar", "prenorm", "dW")


@dataclass
class TrajectoryRecord:
    """One noise realization sampled every ``output_stride`` steps.

    State columns (``X``, ``P``, ``x_expect``, ``p_expect``, ``x_variance``)
    hold start-of-step values at time ``t``. Step columns (``x_bar``,
    ``prenorm``, ``dW``) describe the step that starts at ``t``; they are
    NaN on the terminal row, where no step is taken.
    """

    columns: dict
    config_hash: str = ""
    seed: int = 0
    index: int = 0
    convention: str = ""
    mode: str = ""
    final_state: object = None
    log_weight: float | None = None
    draws: int = 0

    def __getattr__(self, name):
        cols = self.__dict__.get("columns")
        if cols is not None and name in cols:
            return cols[name]
        raise AttributeError(name)

    def __len__(self):
        return len(self.columns["t"])

    def as_array(self):
        return np.column_stack([self.columns[c] for c in COLUMNS])

    def metadata(self):
        return {"config_hash": self.config_hash, "seed": self.seed, "index": self.index,
                "convention": self.convention, "mode": self.mode, "draws": self.draws,
                "log_weight": self.log_weight}


@dataclass
class BatchRecord:
    """Columns of shape (n_trajectories, n_rows) plus final states."""

    columns: dict
    final_psi: np.ndarray
    final_X: np.ndarray
    final_P: np.ndarray
    indices: np.ndarray
    config_hash: str = ""
    seed: int = 0
    convention: str = ""
    mode: str = ""
    log_weight: np.ndarray | None = None
    draws: np.ndarray | None = None
    snapshots: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.indices)

    def record(self, i):
        from .hilbert import QuantumState
        lw = None if self.log_weight is None else float(self.log_weight[i])
        return TrajectoryRecord(
            {c: np.array(v[i]) for c, v in self.columns.items()},
            self.config_hash, self.seed, int(self.indices[i]), self.convention, self.mode,
            QuantumState(self.final_psi[i]), lw,
            0 if self.draws is None else int(self.draws[i]))


class RowBuffer:
    """Preallocated (n, rows) storage filled as a run progresses."""

    def __init__(self, n, n_steps, stride, dt):
        self.stride = stride
        self.n_rows = n_steps // stride + 1
        self.t = np.arange(self.n_rows) * (stride * dt)
        self.cols = {c: np.full((n, self.n_rows), np.nan) for c in COLUMNS if c != "t"}

    def row_of(self, step):
        return step // self.stride if step % self.stride == 0 else None

    def put_state(self, row, X, P, xm, pm, var):
        self.cols["X"][:, row] = X
        self.cols["P"][:, row] = P
        self.cols["x_expect"][:, row] = xm
        self.cols["p_expect"][:, row] = pm
        self.cols["x_variance"][:, row] = var

    def put_step(self, row, x_bar, prenorm, dW):
        self.cols["x_bar"][:, row] = x_bar
        self.cols["prenorm"][:, row] = prenorm
        self.cols["dW"][:, row] = dW

    def columns(self):
        n = next(iter(self.cols.values())).shape[0]
        out = {"t": np.broadcast_to(self.t, (n, self.n_rows)).copy()}
        out.update(self.cols)
        return out
