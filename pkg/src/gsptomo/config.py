"""Experiment configuration: one JSON document, dataclass-backed."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .benchmark import BenchmarkTips
from .core import CumulantState, HamiltonianParams
from .errors import ConfigError
from .reconstruct import MeasurementSchedule

__all__ = [
    "HamiltonianConfig",
    "ModelConfig",
    "ScheduleConfig",
    "NoiseConfig",
    "ProbeConfig",
    "OutputConfig",
    "ExperimentConfig",
    "load_config",
]

_METHODS = ("integral", "differential", "both")
_MODEL_KINDS = ("benchmark", "custom")


@dataclass(frozen=True)
class HamiltonianConfig:
    mass: float = 1.0
    omega: float = 1.0
    delta: float = 0.0
    hbar: float = 1.0

    def build(self) -> HamiltonianParams:
        try:
            return HamiltonianParams(self.mass, self.omega, self.delta, self.hbar)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "benchmark"
    alpha_sq: float = 0.01
    omega_c_over_omega: float = 10.0
    kT_over_hbar_omega: float = 10.0
    # optional extra ground-truth vectors for sweep-style simulation runs
    tip_sets: Optional[tuple] = None
    # dotted path "module:callable" returning a MecModel, for kind="custom"
    factory: Optional[str] = None

    def __post_init__(self):
        if self.kind not in _MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {_MODEL_KINDS}")
        if self.tip_sets is not None:
            object.__setattr__(
                self, "tip_sets", tuple(tuple(float(v) for v in ts) for ts in self.tip_sets)
            )

    def ground_truth(self, h: HamiltonianParams) -> BenchmarkTips:
        try:
            return BenchmarkTips(
                alpha_sq=self.alpha_sq,
                omega_c=self.omega_c_over_omega * h.omega,
                kT_over_hbar_omega=self.kT_over_hbar_omega,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class ScheduleConfig:
    t1: float = 0.5
    t2: float = 10.0
    delta_t: float = 1e-3

    def build(self) -> MeasurementSchedule:
        try:
            return MeasurementSchedule(self.t1, self.t2, self.delta_t)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float = 0.0
    seeds: tuple = (0,)

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("noise.sigma must be nonnegative")
        seeds = tuple(int(s) for s in np.atleast_1d(self.seeds))
        if not seeds:
            raise ConfigError("noise.seeds must be nonempty")
        object.__setattr__(self, "seeds", seeds)


@dataclass(frozen=True)
class ProbeConfig:
    s: tuple = (1.2, 0.6)
    x: tuple = (0.6, 0.6, 0.0)

    def build(self) -> CumulantState:
        try:
            return CumulantState(t=0.0, s=np.asarray(self.s), x=np.asarray(self.x))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    write_trajectories: bool = True
    write_reports: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    hamiltonian: HamiltonianConfig = field(default_factory=HamiltonianConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    method: str = "integral"
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    rotating_frame: bool = False
    # simulation grid for the `simulate` command
    t_max: float = 10.0
    n_samples: int = 201

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ConfigError(f"method must be one of {_METHODS}")
        if self.schedule.t1 <= 0 or self.schedule.t2 <= 0:
            raise ConfigError("schedule times must be strictly positive")
        if self.schedule.t1 == self.schedule.t2:
            raise ConfigError("schedule times must be distinct")
        if self.t_max <= 0 or self.n_samples < 2:
            raise ConfigError("simulation grid needs t_max > 0 and n_samples >= 2")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_samples)


def _build_section(cls, doc, name):
    if not isinstance(doc, dict):
        raise ConfigError(f"section {name!r} must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad section {name!r}: {exc}") from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    sections = {
        "hamiltonian": HamiltonianConfig,
        "model": ModelConfig,
        "schedule": ScheduleConfig,
        "noise": NoiseConfig,
        "probe": ProbeConfig,
        "output": OutputConfig,
    }
    kwargs = {}
    for key, value in doc.items():
        if key in sections:
            kwargs[key] = _build_section(sections[key], value, key)
        elif key in ("method", "rotating_frame", "t_max", "n_samples"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    return ExperimentConfig(**kwargs)


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read a config file and apply flat command-line overrides (flags win)."""
    doc: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    cfg = config_from_dict(doc)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    changes = {}
    if overrides.get("method") is not None:
        changes["method"] = overrides["method"]
    if overrides.get("rotating_frame"):
        changes["rotating_frame"] = True
    if overrides.get("noise_sigma") is not None:
        changes["noise"] = dataclasses.replace(cfg.noise, sigma=float(overrides["noise_sigma"]))
    if overrides.get("seed") is not None:
        noise = changes.get("noise", cfg.noise)
        changes["noise"] = dataclasses.replace(noise, seeds=(int(overrides["seed"]),))
    if overrides.get("out") is not None:
        changes["output"] = dataclasses.replace(cfg.output, directory=str(overrides["out"]))
    return dataclasses.replace(cfg, **changes) if changes else cfg
