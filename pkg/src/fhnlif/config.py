"""Run configuration: INI-style files, flag overrides and a stable hash."""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field, replace

from .errors import InvalidArgumentError
from .fhn_model import FhnParams, NoiseSpec

PARAM_KEYS = ("I", "alpha", "beta", "epsilon")

# command knobs and their full-scale defaults
DEFAULT_KNOBS = {
    "x0": "-1.00125,-0.45",
    "r_values": "0.05,0.1,0.2",
    "n_points": 35,
    "cap_periods": 3.0,
    "M": 1000,
    "n": 10,
    "n_spikes": 1000,
    "t_max": 3000.0,
    "density_points": 150,
    "n_seeds": 20,
    "psd_T": 50.0,
    "horizons": "50,200,800",
    "pullback_paths": 100,
    "sigma0_list": "0.001,0.005,0.01,0.015",
    "save_every": 10,
    "phase": 0.0,
}


def _parse_value(raw: str):
    raw = raw.strip()
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    return raw


def parse_floats(value) -> list:
    if isinstance(value, (int, float)):
        return [float(value)]
    try:
        return [float(s) for s in str(value).split(",") if s.strip()]
    except ValueError as exc:
        raise InvalidArgumentError(f"expected a comma separated list of numbers, got {value!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    params: FhnParams = field(default_factory=FhnParams)
    seed: int = 1
    dt: float = 0.01
    T: float = 1000.0
    trials: int = 1000
    output_dir: str = "out"
    knobs: dict = field(default_factory=lambda: dict(DEFAULT_KNOBS))

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidArgumentError("dt must be positive")
        if not self.T > 0:
            raise InvalidArgumentError("T must be positive")
        if self.trials < 1:
            raise InvalidArgumentError("trials must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidArgumentError("seed must fit in 64 bits")

    def knob(self, name):
        return self.knobs.get(name, DEFAULT_KNOBS.get(name))

    def to_dict(self) -> dict:
        p = self.params
        return {
            "params": {"I": p.I, "alpha": p.alpha, "beta": p.beta, "epsilon": p.epsilon,
                       "noise": p.noise.kind, "sigma0": p.sigma0},
            "run": {"seed": self.seed, "dt": self.dt, "T": self.T, "trials": self.trials,
                    "output_dir": self.output_dir},
            "knobs": dict(sorted(self.knobs.items())),
        }

    def digest(self, command: str) -> str:
        d = self.to_dict()
        d["run"].pop("output_dir")
        blob = json.dumps({"command": command, "config": d}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def scaled(self, factor: int) -> "RunConfig":
        """Trial counts divided by ``factor`` (at least 1)."""
        k = dict(self.knobs)
        for name in ("M", "n_spikes", "pullback_paths", "n_seeds"):
            k[name] = max(1, int(self.knob(name)) // factor)
        return replace(self, trials=max(1, self.trials // factor), knobs=k)


def from_dict(d: dict) -> RunConfig:
    p = dict(d.get("params", {}))
    unknown = set(p) - set(PARAM_KEYS) - {"noise", "sigma0"}
    if unknown:
        raise InvalidArgumentError(f"unknown parameter keys: {sorted(unknown)}")
    noise = NoiseSpec(str(p.pop("noise", "additive")), float(p.pop("sigma0", 0.01)))
    params = FhnParams(noise=noise, **{k: float(v) for k, v in p.items()})
    run = dict(d.get("run", {}))
    unknown = set(run) - {"seed", "dt", "T", "trials", "output_dir"}
    if unknown:
        raise InvalidArgumentError(f"unknown run keys: {sorted(unknown)}")
    knobs = dict(DEFAULT_KNOBS)
    extra = set(d.get("knobs", {})) - set(DEFAULT_KNOBS)
    if extra:
        raise InvalidArgumentError(f"unknown knobs: {sorted(extra)}")
    for k, v in d.get("knobs", {}).items():
        # "3" read back from a float knob must stay a float for the digest
        kind = type(DEFAULT_KNOBS[k])
        try:
            knobs[k] = kind(v) if kind in (int, float) else v
        except (TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"knob {k} expects {kind.__name__}, got {v!r}") from exc
    return RunConfig(
        params=params,
        seed=int(run.get("seed", 1)),
        dt=float(run.get("dt", 0.01)),
        T=float(run.get("T", 1000.0)),
        trials=int(run.get("trials", 1000)),
        output_dir=str(run.get("output_dir", "out")),
        knobs=knobs,
    )


def load_config(path) -> RunConfig:
    """Read ``key = value`` lines grouped under ``[params]``, ``[run]`` and ``[knobs]``."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc
    extra = set(cp.sections()) - {"params", "run", "knobs"}
    if extra:
        raise InvalidArgumentError(f"unknown config sections: {sorted(extra)}")
    d = {s: {k: _parse_value(v) for k, v in cp[s].items()} for s in cp.sections()}
    if "params" in d and "noise" in d["params"]:
        d["params"]["noise"] = str(d["params"]["noise"])
    try:
        return from_dict(d)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"invalid config {path}: {exc}") from exc


def dump_config(cfg: RunConfig) -> str:
    """INI text that :func:`load_config` reads back to ``cfg``."""
    lines = []
    for section, values in cfg.to_dict().items():
        lines.append(f"[{section}]")
        for k, v in values.items():
            lines.append(f"{k} = {format(v, '.17g') if isinstance(v, float) else v}")
        lines.append("")
    return "\n".join(lines)
