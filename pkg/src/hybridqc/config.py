"""Run configuration: physical parameters, initial data and numerics."""

import enum
import hashlib
import json
from dataclasses import dataclass, field, replace

from .classical import PotentialKind, PotentialSpec
from .errors import ConfigError, HybridError
from .hilbert import FockBasis
from .sse import Convention


class Mode(str, enum.Enum):
    HYBRID = "hybrid"
    MEANFIELD = "meanfield"
    CHAIN = "chain"


@dataclass(frozen=True)
class Packet:
    """Gaussian packet centre; ``x_variance=None`` means a coherent state."""

    x0: float = 0.0
    p0: float = 0.0
    x_variance: float | None = None


@dataclass(frozen=True)
class ClassicalParams:
    M: float = 1.0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    X0: float = 0.0
    P0: float = 0.0
    frozen: bool = False


@dataclass(frozen=True)
class Coupling:
    lam: float
    sigma: float


@dataclass(frozen=True)
class Numerics:
    dt: float = 1e-3
    t_final: float = 1.0
    output_stride: int = 1

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


@dataclass(frozen=True)
class HybridConfig:
    coupling: Coupling
    basis: FockBasis = field(default_factory=FockBasis)
    classical: ClassicalParams = field(default_factory=ClassicalParams)
    packets: tuple = (Packet(),)
    amplitudes: tuple = (1.0,)
    numerics: Numerics = field(default_factory=Numerics)
    convention: Convention = Convention.CHAIN_CONSISTENT
    seed: int = 0
    mode: Mode = Mode.HYBRID

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention(self.convention))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "packets", tuple(self.packets))
        object.__setattr__(self, "amplitudes", tuple(complex(a) for a in self.amplitudes))
        validate(self)

    @property
    def hbar(self):
        return self.basis.hbar

    @property
    def lam(self):
        return self.coupling.lam

    @property
    def sigma(self):
        return self.coupling.sigma

    def with_(self, **changes):
        """Copy with top-level or dotted-section overrides, e.g.
        ``cfg.with_(mode="chain", **{"numerics.dt": 2e-3})``."""
        top = {}
        sections = {}
        for key, val in changes.items():
            if "." in key:
                sec, name = key.split(".", 1)
                sections.setdefault(sec, {})[name] = val
            else:
                top[key] = val
        for sec, vals in sections.items():
            top[sec] = replace(top.get(sec, getattr(self, sec)), **vals)
        return replace(self, **top)

    def to_dict(self):
        return {
            "quantum": {"dim": self.basis.dim, "m": self.basis.m,
                        "omega": self.basis.omega, "hbar": self.basis.hbar},
            "classical": {
                "M": self.classical.M,
                "potential": {"kind": self.classical.potential.kind.value,
                              "stiffness": self.classical.potential.stiffness,
                              "coefficients": list(self.classical.potential.coefficients)},
                "X0": self.classical.X0, "P0": self.classical.P0,
                "frozen": self.classical.frozen,
            },
            "coupling": {"lambda": self.coupling.lam, "sigma": self.coupling.sigma},
            "initial_quantum": {
                "packets": [{"x0": p.x0, "p0": p.p0, "x_variance": p.x_variance}
                            for p in self.packets],
                "amplitudes": [[a.real, a.imag] for a in self.amplitudes],
            },
            "numerics": {"dt": self.numerics.dt, "t_final": self.numerics.t_final,
                         "output_stride": self.numerics.output_stride},
            "convention": self.convention.value,
            "seed": self.seed,
            "mode": self.mode.value,
        }

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def validate(cfg):
    num = cfg.numerics
    if not num.dt > 0:
        raise ConfigError("numerics.dt", "must be positive")
    if not num.t_final >= num.dt:
        raise ConfigError("numerics.t_final", "must be at least dt")
    if int(num.output_stride) != num.output_stride or num.output_stride < 1:
        raise ConfigError("numerics.output_stride", "must be an integer >= 1")
    if abs(num.n_steps * num.dt - num.t_final) > 1e-9 * max(1.0, num.t_final):
        raise ConfigError("numerics.t_final", "must be an integer multiple of dt")
    if num.n_steps % num.output_stride:
        raise ConfigError("numerics.output_stride", "must divide the number of steps")
    if not cfg.classical.M > 0:
        raise ConfigError("classical.M", "must be positive")
    if cfg.coupling.lam != 0 and not cfg.coupling.sigma > 0:
        raise ConfigError("coupling.sigma", "must be positive when lambda != 0")
    if cfg.coupling.sigma < 0:
        raise ConfigError("coupling.sigma", "must be non-negative")
    if len(cfg.packets) == 0 or len(cfg.packets) != len(cfg.amplitudes):
        raise ConfigError("initial_quantum", "packets and amplitudes must be nonempty and equal length")
    if not 0 <= int(cfg.seed) < 2 ** 64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")


_SCHEMA = {
    "quantum": {"dim", "m", "omega", "hbar"},
    "classical": {"M", "potential", "X0", "P0", "frozen"},
    "coupling": {"lambda", "sigma"},
    "initial_quantum": {"packets", "amplitudes"},
    "numerics": {"dt", "t_final", "output_stride"},
    "convention": None,
    "seed": None,
    "mode": None,
}
REQUIRED = ("coupling.lambda", "coupling.sigma")


def _check_keys(section, allowed, path):
    if not isinstance(section, dict):
        raise ConfigError(path, "expected a mapping")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")


def _num(section, key, path, default, kind=float):
    if key not in section:
        return default
    val = section[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigError(f"{path}.{key}", "expected an integer")
    return kind(val)


def _amplitude(val, path):
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return complex(val)
    if isinstance(val, (list, tuple)) and len(val) == 2:
        return complex(float(val[0]), float(val[1]))
    if isinstance(val, dict) and set(val) <= {"re", "im"}:
        return complex(val.get("re", 0.0), val.get("im", 0.0))
    raise ConfigError(path, f"cannot read complex amplitude from {val!r}")


def config_from_dict(data):
    """Build a validated :class:`HybridConfig` from parsed structured text."""
    if data is None:
        data = {}
    _check_keys(data, _SCHEMA, "")
    missing = [r for r in REQUIRED
               if r.split(".")[1] not in (data.get(r.split(".")[0]) or {})]
    if missing:
        raise ConfigError(", ".join(missing), "required field missing")
    try:
        q = data.get("quantum", {})
        _check_keys(q, _SCHEMA["quantum"], "quantum")
        basis = FockBasis(_num(q, "dim", "quantum", 64, int), _num(q, "m", "quantum", 1.0),
                          _num(q, "omega", "quantum", 1.0), _num(q, "hbar", "quantum", 1.0))

        c = data.get("classical", {})
        _check_keys(c, _SCHEMA["classical"], "classical")
        pot = c.get("potential", {})
        _check_keys(pot, {"kind", "stiffness", "coefficients"}, "classical.potential")
        try:
            kind = PotentialKind(pot.get("kind", "free"))
        except ValueError:
            raise ConfigError("classical.potential.kind", f"unknown kind {pot.get('kind')!r}")
        potential = PotentialSpec(kind, _num(pot, "stiffness", "classical.potential", 0.0),
                                  tuple(pot.get("coefficients", ())))
        frozen = c.get("frozen", False)
        if not isinstance(frozen, bool):
            raise ConfigError("classical.frozen", "expected true/false")
        classical = ClassicalParams(_num(c, "M", "classical", 1.0), potential,
                                    _num(c, "X0", "classical", 0.0),
                                    _num(c, "P0", "classical", 0.0), frozen)

        cp = data["coupling"]
        _check_keys(cp, _SCHEMA["coupling"], "coupling")
        coupling = Coupling(_num(cp, "lambda", "coupling", None),
                            _num(cp, "sigma", "coupling", None))

        iq = data.get("initial_quantum", {})
        _check_keys(iq, _SCHEMA["initial_quantum"], "initial_quantum")
        packets = []
        for i, p in enumerate(iq.get("packets", [{}])):
            path = f"initial_quantum.packets[{i}]"
            _check_keys(p, {"x0", "p0", "x_variance"}, path)
            xv = p.get("x_variance")
            packets.append(Packet(_num(p, "x0", path, 0.0), _num(p, "p0", path, 0.0),
                                  None if xv is None else _num(p, "x_variance", path, None)))
        amps = iq.get("amplitudes", [1.0] * len(packets))
        amplitudes = [_amplitude(a, f"initial_quantum.amplitudes[{i}]") for i, a in enumerate(amps)]

        n = data.get("numerics", {})
        _check_keys(n, _SCHEMA["numerics"], "numerics")
        numerics = Numerics(_num(n, "dt", "numerics", 1e-3), _num(n, "t_final", "numerics", 1.0),
                            _num(n, "output_stride", "numerics", 1, int))
        try:
            convention = Convention(data.get("convention", Convention.CHAIN_CONSISTENT.value))
        except ValueError:
            raise ConfigError("convention", f"unknown convention {data.get('convention')!r}")
        try:
            mode = Mode(data.get("mode", Mode.HYBRID.value))
        except ValueError:
            raise ConfigError("mode", f"unknown mode {data.get('mode')!r}")
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError("seed", "expected an integer")
        return HybridConfig(coupling, basis, classical, tuple(packets), tuple(amplitudes),
                            numerics, convention, seed, mode)
    except ConfigError:
        raise
    except HybridError as exc:
        raise ConfigError("config", str(exc)) from exc
