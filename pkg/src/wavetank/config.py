"""Plain ``key = value`` run configuration files.

Blank lines and text after ``#`` are ignored.  Lists are comma separated.
Unknown keys are rejected so that typos do not silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .params import SYSTEMS, SystemParams

EXPERIMENTS = ("converge", "reflect", "linear", "picard")


@dataclass
class RunConfig:
    experiment: str = "converge"
    system: str = "nwogu-regularized"
    systems: list = field(default_factory=lambda: ["nwogu-regularized", "nwogu", "bbm-bbm"])
    a: float | None = None
    b: float | None = None
    d: float | None = None
    family: str | None = None
    N: list | None = None
    dt: float | None = None
    dt_factor: float = 0.1
    dt_cap: float | None = None
    T: float | None = None
    normalize: bool | None = None
    amplitudes: list = field(default_factory=lambda: [round(0.1 + 0.05 * i, 2) for i in range(13)])
    domain: float = 50.0
    ell: float = 50.0
    modes: int = 1024
    L: float = 5.0
    amplitude: float = 0.1
    width: float = 1.0
    points: int = 9
    K_max: float | None = None
    ut_tol: float = 1e-9
    M: list = field(default_factory=lambda: [100, 200, 400])
    time_steps: list = field(default_factory=lambda: [20, 40, 80])
    timeseries_stride: int = 1

    def params(self, name: str | None = None) -> SystemParams:
        if name is None and self.a is not None:
            return SystemParams(self.a, self.b if self.b is not None else 0.0, self.d if self.d is not None else 0.0)
        name = name or self.system
        if name not in SYSTEMS:
            raise ConfigError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}")
        return SYSTEMS[name]()

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def resolved(self, key: str):
        """Value of ``key``, falling back to the experiment's default when unset."""
        value = getattr(self, key)
        if value is not None:
            return value
        return DEFAULTS[self.experiment].get(key)


DEFAULTS = {
    "converge": {"family": "linear", "N": [10, 20, 40, 80, 160, 320, 640]},
    "reflect": {"family": "spline", "N": [400]},
    "linear": {"family": "cubic", "N": [40, 80, 160], "T": 1.0},
    "picard": {"family": "cubic", "N": [40, 80, 160], "T": 1.0},
}


_LISTS = {"systems": str, "N": int, "amplitudes": float, "M": int, "time_steps": int}


def _scalar(raw: str, kind: str):
    raw = raw.strip()
    if "bool" in kind:
        low = raw.lower()
        if low == "auto":
            return None
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(raw)
    if "float" in kind:
        return None if raw.lower() == "auto" else float(raw)
    if "int" in kind:
        return int(raw)
    return raw


def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    cfg = RunConfig()
    kinds = {f.name: str(f.type) for f in fields(RunConfig)}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            if key in _LISTS:
                value = [_LISTS[key](v.strip()) for v in raw.split(",") if v.strip()]
                if not value:
                    raise ValueError(raw)
            else:
                value = _scalar(raw, kinds[key])
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {raw!r} for {key!r}") from None
        setattr(cfg, key, value)
    if experiment is not None:
        cfg.experiment = experiment
    validate(cfg)
    return cfg


def load_config(path, experiment: str | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), experiment)


def validate(cfg: RunConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    if cfg.N is not None and any(n < 2 for n in cfg.N):
        raise ConfigError("every N must be at least 2")
    if cfg.N is not None and cfg.N != sorted(cfg.N):
        raise ConfigError("N must be ascending")
    if cfg.T is not None and cfg.T <= 0:
        raise ConfigError("T must be positive")
    if cfg.dt is not None and cfg.dt <= 0:
        raise ConfigError("dt must be positive")
    if any(not 0 < A <= 0.8 for A in cfg.amplitudes):
        raise ConfigError("amplitudes must lie in (0, 0.8]")
    if cfg.modes <= 0 or cfg.modes & (cfg.modes - 1):
        raise ConfigError("modes must be a power of two")
    if len(cfg.M) != len(cfg.time_steps):
        raise ConfigError("M and time_steps must have equal length")
    for name in cfg.systems:
        cfg.params(name)
    if cfg.a is None:
        cfg.params()
