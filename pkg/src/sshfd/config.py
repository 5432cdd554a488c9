"""Run configuration: YAML file sections mirroring the dataclass configs,
with CLI flags overriding individual keys. Unknown keys are rejected."""
from __future__ import annotations

import dataclasses
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .engine import TrainSchedule
from .errors import ParameterError
from .fallnet import FallNetConfig
from .ojr import OjrConfig
from .posenet3d import PoseNet3dConfig
from .synthgen import CameraBounds, GeneratorConfig


@dataclass
class RunConfig:
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    ojr: OjrConfig = field(default_factory=OjrConfig)
    posenet3d: PoseNet3dConfig = field(default_factory=PoseNet3dConfig)
    fallnet: FallNetConfig = field(default_factory=FallNetConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)


_TUPLE_KEYS = {"decay_epochs", "residual_spans", "count_distribution", "torso_incl_deg",
               "elevation_deg", "distance_mm", "focal_px", "image_size"}


def _build(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ParameterError(f"unknown config key {path}.{key}")
        if dataclasses.is_dataclass(known[key].type) and isinstance(value, dict):
            value = _build(known[key].type, value, f"{path}.{key}")
        elif key == "camera" and isinstance(value, dict):
            value = _build(CameraBounds, value, f"{path}.{key}")
        elif key in _TUPLE_KEYS and isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    return cls(**kwargs)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load a YAML run config; ``overrides`` maps 'section.key' to values."""
    data = {}
    if path is not None:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ParameterError(f"config file {path} must contain a mapping")
    sections = {f.name: f.type for f in fields(RunConfig)}
    for key in data:
        if key not in sections:
            raise ParameterError(f"unknown config section {key!r}")
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in sections:
            raise ParameterError(f"unknown config section {section!r}")
        data.setdefault(section, {})[key] = value
    types = {"schedule": TrainSchedule, "ojr": OjrConfig, "posenet3d": PoseNet3dConfig,
             "fallnet": FallNetConfig, "generator": GeneratorConfig}
    kwargs = {name: _build(types[name], sec or {}, name) for name, sec in data.items()}
    return RunConfig(**kwargs)


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def echo_config(config: RunConfig, out_dir):
    """Write the effective config into an output directory for reproducibility."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config_echo.yaml", "w") as f:
        yaml.safe_dump(_plain(config), f, sort_keys=True)
