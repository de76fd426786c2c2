"""Experiment configuration: TOML file -> validated, immutable dataclasses.

Every section maps onto one dataclass and unknown keys are rejected. See the
README for the field-by-field schema.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import ConfigDict, TypeAdapter, ValidationError

from .camera import CameraIntrinsics, DetectionModel
from .mission import MissionConfig
from .sensors import LaserConfig, TriggerConfig
from .world import SimParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


@dataclass(frozen=True)
class CameraConfig:
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    deck_radius: float = 0.75
    n_samples: int = 64
    mount_offset: tuple[float, float, float] = (0.1, 0.0, 0.05)

    def __post_init__(self):
        if not self.deck_radius > 0:
            raise ValueError("deck_radius must be positive")
        if self.n_samples < 8:
            raise ValueError("n_samples must be at least 8")


@dataclass(frozen=True)
class ServoConfig:
    gain: float = 0.8
    z_star: float = 0.5
    gimbal_gain: float = 0.5
    gimbal_center_offset: tuple[float, float] = (0.0, -0.7)

    def __post_init__(self):
        if not (self.gain > 0 and self.z_star > 0 and self.gimbal_gain > 0):
            raise ValueError("gain, z_star and gimbal_gain must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Initial conditions. The hover point sits on the truck's path at ``truck_start = 0``."""

    truck_speed: float = 4.17
    truck_start: float = -12.0
    truck_lateral_offset: float = 0.0
    uav_start: tuple[float, float, float] | None = None
    uav_start_yaw: float = 0.0
    duration: float = 40.0

    def __post_init__(self):
        if self.truck_speed < 0:
            raise ValueError("truck_speed must be non-negative")
        if not self.duration > 0:
            raise ValueError("duration must be positive")


@dataclass(frozen=True)
class RandomizationConfig:
    """Half-widths of uniform perturbations drawn per run."""

    uav_offset: float = 0.0
    truck_start: float = 0.0
    truck_lateral: float = 0.0

    def __post_init__(self):
        if min(self.uav_offset, self.truck_start, self.truck_lateral) < 0:
            raise ValueError("randomization ranges must be non-negative")


@dataclass(frozen=True)
class ExperimentConfig:
    __pydantic_config__ = ConfigDict(extra="forbid")

    sim: SimParams = field(default_factory=SimParams)
    camera: CameraConfig = field(default_factory=CameraConfig)
    detection: DetectionModel = field(default_factory=DetectionModel)
    lasers: LaserConfig = field(default_factory=LaserConfig)
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    servo: ServoConfig = field(default_factory=ServoConfig)
    mission: MissionConfig = field(default_factory=MissionConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    randomization: RandomizationConfig = field(default_factory=RandomizationConfig)
    seed: int = 0
    n_runs: int = 1

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")


_ADAPTER = TypeAdapter(ExperimentConfig)


def _format(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        return _ADAPTER.validate_python(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return _ADAPTER.dump_python(cfg, mode="json")


def with_overrides(cfg: ExperimentConfig, **sections) -> ExperimentConfig:
    """Copy of ``cfg`` with some fields replaced, e.g. ``with_overrides(cfg, sim={"uav_lag_tau": 0})``.

    Section values are merged into the existing section; scalars replace.
    """
    data = config_to_dict(cfg)
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            merged = dict(data[key])
            for k, v in value.items():
                if isinstance(v, dict) and isinstance(merged.get(k), dict):
                    merged[k] = {**merged[k], **v}
                else:
                    merged[k] = v
            data[key] = merged
        else:
            data[key] = value
    return config_from_dict(data)


__all__ = [
    "CameraConfig",
    "ConfigError",
    "ExperimentConfig",
    "RandomizationConfig",
    "ScenarioConfig",
    "ServoConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "with_overrides",
]
