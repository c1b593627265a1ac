"""Run configuration: strict JSON loading, defaults and round-tripping.

The default configuration reproduces the reference vehicle (Table-style
constants baked into the parameter dataclasses) and controller tuning:
horizon 10 at 1 s, equal objective weights, unit tracking weight, control
weight 1 on the normalised force, fuel weight 5, SOC weight 300 about a
0.5 reference, starting from rest at 66% charge.

Unknown JSON keys are rejected so a typo in a physics constant cannot
silently fall back to a default. Objective weights that do not sum to one
(e.g. the common 0.33/0.33/0.33 choice) are renormalised with a warning.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .controller import MompcConfig
from .errors import ParseError, ValidationError
from .powertrain import BatteryParams, EngineParams, ShevParams, VehicleParams

logger = logging.getLogger(__name__)


@dataclass
class InitialState:
    position: float = 0.0
    velocity: float = 0.0
    soc: float = 0.66

    def __post_init__(self) -> None:
        if not 0.0 <= self.soc <= 1.0:
            raise ValidationError("initial soc must lie in [0, 1]")
        if self.velocity < 0:
            raise ValidationError("initial velocity must be non-negative")


@dataclass
class RunConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    engine: EngineParams = field(default_factory=EngineParams)
    controller: MompcConfig = field(default_factory=MompcConfig)
    initial: InitialState = field(default_factory=InitialState)
    cycle_path: str | None = None
    output_dir: str | None = None

    @property
    def plant(self) -> ShevParams:
        return ShevParams(vehicle=self.vehicle, battery=self.battery, engine=self.engine)


def default_config() -> RunConfig:
    return RunConfig()


_SECTIONS = {
    "vehicle": VehicleParams,
    "battery": BatteryParams,
    "engine": EngineParams,
    "controller": MompcConfig,
    "initial": InitialState,
}


def _build_section(cls, data: dict, section: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(
            f"unknown key(s) in '{section}': {', '.join(sorted(unknown))}")
    if cls is MompcConfig:
        data = _normalise_weights(dict(data))
    return cls(**data)


def _normalise_weights(data: dict) -> dict:
    keys = ("weight_motion", "weight_fuel", "weight_battery")
    if not any(k in data for k in keys):
        return data
    w = np.array([float(data.get(k, 1.0 / 3.0)) for k in keys])
    if np.any(w < 0):
        raise ValidationError("objective weights must be non-negative")
    total = float(w.sum())
    if total <= 0:
        raise ValidationError("objective weights must not all be zero")
    if abs(total - 1.0) > 1e-9:
        logger.warning("objective weights sum to %.6g; renormalising to 1", total)
        w = w / total
    data.update(zip(keys, w.tolist()))
    return data


def config_from_dict(raw: dict) -> RunConfig:
    allowed = set(_SECTIONS) | {"cycle_path", "output_dir"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValidationError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ValidationError(f"'{name}' must be a JSON object")
        kwargs[name] = _build_section(cls, section, name)
    return RunConfig(cycle_path=raw.get("cycle_path"), output_dir=raw.get("output_dir"),
                     **kwargs)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a JSON object")
    return config_from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        section = asdict(getattr(cfg, name))
        for key, value in section.items():
            if isinstance(value, np.ndarray):
                section[key] = value.tolist()
        out[name] = section
    if cfg.cycle_path is not None:
        out["cycle_path"] = cfg.cycle_path
    if cfg.output_dir is not None:
        out["output_dir"] = cfg.output_dir
    return out


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"
