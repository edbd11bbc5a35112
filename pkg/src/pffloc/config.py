"""INI run configuration.

Every key has a default, so an empty file gives the reference
parameterization.  Vectors are space-separated; matrices are rows of
space-separated numbers joined by ``;``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field as dc_field, fields, replace

import numpy as np

from .filters import FilterParams, Settings
from .measurement import Model, ModelParams
from .optimizer import OptimizerParams
from .pipeline import METHODS
from .simulator import PRESETS, ScanSimParams


class ConfigError(ValueError):
    pass


@dataclass
class SimulationParams:
    preset: str = "corridor"
    steps: int = 200
    density: float = 50.0
    odom_std_trans: float = 0.05
    odom_std_rot: float = 0.01

    def odom_cov(self) -> np.ndarray:
        return np.diag([self.odom_std_trans**2] * 3 + [self.odom_std_rot**2] * 3)


@dataclass
class RunParams:
    method: str = "pff"
    seed: int = 0
    field_resolution: float = 0.2
    field_margin: float = 1.0
    disturb_every: int = 0
    disturb_magnitude: float = 1.0


@dataclass
class Paths:
    map: str = "map.xyz"
    field: str = "map.vdf"
    ground_truth: str = "ground_truth.txt"
    scans: str = "scans"
    odometry: str = "odometry.txt"
    output: str = "out"


@dataclass
class RunConfig:
    model: ModelParams = dc_field(default_factory=ModelParams)
    optimizer: OptimizerParams = dc_field(default_factory=OptimizerParams)
    filter: FilterParams = dc_field(default_factory=FilterParams)
    scan: ScanSimParams = dc_field(default_factory=ScanSimParams)
    simulation: SimulationParams = dc_field(default_factory=SimulationParams)
    run: RunParams = dc_field(default_factory=RunParams)
    paths: Paths = dc_field(default_factory=Paths)

    def settings(self) -> Settings:
        model = Model.LFM if self.run.method == "mmolfm" else Model.CLASS_CONDITIONAL
        return Settings(self.model, self.optimizer, self.filter, model)


SECTIONS = ("model", "optimizer", "filter", "scan", "simulation", "run", "paths")
# the residual gate is one number; ModelParams carries a copy of it
_SKIP = {("model", "epsilon")}


def _format(value) -> str:
    if isinstance(value, np.ndarray):
        if value.ndim == 2:
            return "; ".join(" ".join(repr(float(v)) for v in row) for row in value)
        return " ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, default, where: str):
    try:
        if isinstance(default, np.ndarray):
            if default.ndim == 2:
                rows = [r.split() for r in text.split(";") if r.strip()]
                arr = np.array(rows, dtype=float)
            else:
                arr = np.array(text.split(), dtype=float)
            if arr.shape != default.shape:
                raise ConfigError(f"{where}: expected shape {default.shape}, got {arr.shape}")
            return arr
        if isinstance(default, bool):
            return text.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text.strip()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {text!r} ({exc})") from exc


def to_ini(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for name in SECTIONS:
        obj = getattr(cfg, name)
        parser[name] = {f.name: _format(getattr(obj, f.name)) for f in fields(obj)
                        if (name, f.name) not in _SKIP}
    lines = []
    for name in SECTIONS:
        lines.append(f"[{name}]")
        lines += [f"{k} = {v}" for k, v in parser[name].items()]
        lines.append("")
    return "\n".join(lines)


def from_ini(text: str = "", overrides=()) -> RunConfig:
    """Parse INI text, then apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][name] = value.strip()
    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")

    base = RunConfig()
    parts = {}
    for name in SECTIONS:
        obj = getattr(base, name)
        known = {f.name for f in fields(obj)} - {k for s, k in _SKIP if s == name}
        given = dict(parser[name]) if parser.has_section(name) else {}
        extra = set(given) - known
        if extra:
            raise ConfigError(f"[{name}] unknown keys: {sorted(extra)}")
        values = {k: _parse(v, getattr(obj, k), f"{name}.{k}") for k, v in given.items()}
        try:
            parts[name] = replace(obj, **values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}] {exc}") from exc
    try:
        parts["model"] = replace(parts["model"], epsilon=parts["optimizer"].epsilon)
    except ValueError as exc:
        raise ConfigError(f"[optimizer] {exc}") from exc
    cfg = RunConfig(**parts)
    if cfg.run.method not in METHODS:
        raise ConfigError(f"run.method must be one of {METHODS}")
    if cfg.simulation.preset not in PRESETS:
        raise ConfigError(f"simulation.preset must be one of {PRESETS}")
    return cfg


def load(path=None, overrides=()) -> RunConfig:
    text = "" if path is None else open(path).read()
    return from_ini(text, overrides)
