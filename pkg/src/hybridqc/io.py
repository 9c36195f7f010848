"""Config files, trajectory CSVs and run manifests."""

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .config import config_from_dict
from .errors import ConfigError
from .record import COLUMNS, TrajectoryRecord

__version__ = "0.1.0"

COLUMN_DOCS = {
    "t": "time at the start of the row",
    "X": "classical position",
    "P": "classical momentum",
    "x_expect": "<x> of the normalized state",
    "p_expect": "<p> of the normalized state",
    "x_variance": "Var(x) of the normalized state",
    "x_bar": "measurement record for the step starting at t (nan on the last row)",
    "prenorm": "state norm before renormalization (nan on the last row)",
    "dW": "Wiener increment of the step (nan on the last row)",
}

# scalar numerics that may be overridden from the environment
ENV_OVERRIDES = {
    "HYBRIDQC_DT": ("numerics", "dt", float),
    "HYBRIDQC_T_FINAL": ("numerics", "t_final", float),
    "HYBRIDQC_OUTPUT_STRIDE": ("numerics", "output_stride", int),
    "HYBRIDQC_SEED": (None, "seed", int),
}


def load_config_dict(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read file: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a mapping")
    return data or {}


def apply_overrides(data, overrides):
    """Return a copy of ``data`` with ``{(section, key): value}`` applied."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    for (section, key), val in overrides.items():
        if val is None:
            continue
        if section is None:
            out[key] = val
        else:
            out.setdefault(section, {})[key] = val
    return out


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    found = {}
    for name, (section, key, kind) in ENV_OVERRIDES.items():
        if name in environ:
            try:
                found[(section, key)] = kind(environ[name])
            except ValueError:
                raise ConfigError(name, f"cannot parse {environ[name]!r} as {kind.__name__}")
    return found


def parse_config(path, overrides=None, environ=None):
    """Read and validate a YAML config.

    Precedence for scalar numerics: ``overrides`` (command-line flags), then
    ``HYBRIDQC_*`` environment variables, then the file, then defaults.
    """
    data = load_config_dict(path)
    data = apply_overrides(data, env_overrides(environ))
    data = apply_overrides(data, overrides or {})
    return config_from_dict(data)


def dump_config(config, path=None):
    text = yaml.safe_dump(config.to_dict(), sort_keys=False)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def fmt(value):
    """Shortest round-trip decimal form of a float."""
    return repr(float(value))


def write_trajectory_csv(record, path):
    meta = record.metadata()
    lines = ["# hybridqc trajectory"]
    lines += [f"# {k}: {meta[k]}" for k in ("config_hash", "seed", "index", "convention", "mode")]
    lines.append("# columns: " + "; ".join(f"{c} = {COLUMN_DOCS[c]}" for c in COLUMNS))
    lines.append(",".join(COLUMNS))
    data = record.as_array()
    lines += [",".join(map(fmt, row)) for row in data]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def read_trajectory_csv(path):
    meta, header, rows = {}, None, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            meta[key] = val
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    cols = {c: arr[:, i] for i, c in enumerate(header)}
    return TrajectoryRecord(cols, meta.get("config_hash", ""), int(meta.get("seed", 0)),
                            int(meta.get("index", 0)), meta.get("convention", ""),
                            meta.get("mode", ""))


def write_table_csv(columns, path, comment=None):
    """Write a dict of equal-length columns with a ``#`` comment header."""
    names = list(columns)
    n = len(columns[names[0]])
    lines = [f"# {comment}"] if comment else []
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(_cell(columns[c][i]) for c in names))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def _cell(v):
    if isinstance(v, (str, bool)) or v is None:
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj, path):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    return Path(path)


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict
    version: str = __version__
    files: list = field(default_factory=list)
    steps: int = 0
    wall_clock: float = 0.0
    arguments: dict = field(default_factory=dict)

    def add_file(self, path, root):
        path = Path(path)
        self.files.append({"path": str(path.relative_to(root)), "sha256": file_digest(path)})

    def write(self, root):
        """Write ``manifest.json`` into ``root``; call after all outputs exist."""
        return write_json(asdict(self), Path(root) / "manifest.json")

    @classmethod
    def read(cls, path):
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def verify(self, root):
        """Names of listed files whose digest no longer matches."""
        return [f["path"] for f in self.files
                if file_digest(Path(root) / f["path"]) != f["sha256"]]


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False
