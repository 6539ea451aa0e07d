"""JSON simulation configs: schema, validation with field paths, resolution to SI.

Angles appear in degrees in the file (``slope_deg``) and are converted once
here. Terrain file paths are resolved relative to the config file.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..analysis import flying_steady_state, rolling_steady_state
from ..control import FlightGains, RateControllerState
from ..core import PRESETS, EfficiencyChain, preset, validate
from .engine import Segment, SimSetup
from .terrain import TerrainError, flat, load_terrain


class ConfigError(ValueError):
    """Invalid simulation config; the message lists ``field.path: problem`` lines."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class VehicleConfig(_Model):
    preset: Literal[PRESETS]
    overrides: dict[str, float] = Field(default_factory=dict)


class EnvironmentConfig(_Model):
    gravity: float | None = Field(None, gt=0)
    air_density: float | None = Field(None, gt=0)
    drag_coefficient: float | None = Field(None, ge=0)


class EfficiencyConfig(_Model):
    propeller: float = Field(0.6, gt=0, le=1)
    motor: float = Field(0.85, gt=0, le=1)
    controller: float = Field(0.95, gt=0, le=1)


class TerrainConfig(_Model):
    kind: Literal["flat", "profile_1d", "heightmap_2d"]
    rolling_resistance: float = Field(0.01, ge=0, le=1)
    slope_deg: float = Field(0.0, gt=-90, lt=90)
    path: str | None = None
    track_y_m: float | None = None

    @model_validator(mode="after")
    def _needs_path(self):
        if self.kind != "flat" and not self.path:
            raise ValueError(f"terrain kind {self.kind!r} needs a 'path'")
        return self


class SegmentConfig(_Model):
    start_s: float = Field(0.0, ge=0)
    mode: Literal["rolling", "flying", "passive"]
    speed_mps: float | None = None
    body_rate_radps: float | None = None

    @model_validator(mode="after")
    def _one_setpoint(self):
        if self.mode == "flying" and self.speed_mps is None:
            raise ValueError("flying segment needs 'speed_mps'")
        if self.mode == "rolling" and (self.speed_mps is None) == (self.body_rate_radps is None):
            raise ValueError("rolling segment needs exactly one of 'speed_mps' or 'body_rate_radps'")
        return self


class ControllerConfig(_Model):
    kp: float = Field(0.05, ge=0)
    ki: float = Field(0.02, ge=0)
    integral_limit: float = Field(0.5, ge=0)


class FlightConfig(_Model):
    clearance_m: float = Field(1.0, gt=0)
    velocity_gain: float = Field(1.0, gt=0)
    altitude_gain: float = Field(0.5, gt=0)
    climb_gain: float = Field(1.5, gt=0)
    attitude_gain: float = Field(25.0, gt=0)
    rate_gain: float = Field(10.0, gt=0)


class SimConfig(_Model):
    vehicle: VehicleConfig
    environment: EnvironmentConfig = EnvironmentConfig()
    efficiency: EfficiencyConfig = EfficiencyConfig()
    terrain: TerrainConfig
    segments: list[SegmentConfig] = Field(min_length=1)
    dt_s: float = Field(1e-3, gt=0, le=0.01)
    duration_s: float = Field(gt=0)
    integrator: Literal["rk4", "semi_implicit_euler"] = "rk4"
    log_every: int = Field(1, ge=1)
    initial_x_m: float = 0.0
    initial_speed_mps: float = 0.0
    controller: ControllerConfig = ControllerConfig()
    flight: FlightConfig = FlightConfig()
    rate_noise_std: float = Field(0.0, ge=0)
    seed: int = 0
    settle_s: float = Field(0.0, ge=0)


def _format(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        where = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{where}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict | str) -> SimConfig:
    try:
        if isinstance(data, str):
            return SimConfig.model_validate_json(data)
        return SimConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format(err)) from None


def load_config(path) -> tuple[SimConfig, Path]:
    """Read and validate a config file; returns it with its directory."""
    path = Path(path)
    return parse_config(path.read_text()), path.resolve().parent


def resolve(cfg: SimConfig, base_dir: Path | str = ".") -> SimSetup:
    """Build vehicle, environment and terrain objects from a validated config."""
    params, env, _ = preset(cfg.vehicle.preset)
    try:
        params = params.with_(**cfg.vehicle.overrides)
    except TypeError as exc:
        raise ConfigError(f"vehicle.overrides: {exc}") from None
    env = env.with_(**{k: v for k, v in cfg.environment.model_dump().items() if v is not None})
    problems = validate(params, env)
    if problems:
        raise ConfigError("\n".join(f"vehicle: {p}" for p in problems))
    eff = EfficiencyChain(**cfg.efficiency.model_dump())
    t = cfg.terrain
    try:
        if t.kind == "flat":
            terrain = flat(math.radians(t.slope_deg), t.rolling_resistance)
        else:
            fmt = "csv_profile" if t.kind == "profile_1d" else "ascii_grid"
            terrain = load_terrain(Path(base_dir) / t.path, fmt, t.rolling_resistance, track_y=t.track_y_m)
    except TerrainError as exc:
        raise ConfigError(f"terrain: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"terrain.path: {exc}") from None
    segments = []
    for s in cfg.segments:
        if s.mode == "rolling":
            rate = s.body_rate_radps if s.body_rate_radps is not None else s.speed_mps / params.shell_radius
            segments.append(Segment(s.start_s, "rolling", rate=rate))
        elif s.mode == "flying":
            segments.append(Segment(s.start_s, "flying", speed=s.speed_mps))
        else:
            segments.append(Segment(s.start_s, "passive"))
    if any(s.mode == "rolling" for s in segments) and params.rotor_count != 8:
        raise ConfigError("segments: rolling needs the docked 8-rotor vehicle")
    c, f = cfg.controller, cfg.flight
    return SimSetup(
        params=params, env=env, eff=eff, terrain=terrain, segments=tuple(segments),
        dt=cfg.dt_s, duration=cfg.duration_s, integrator=cfg.integrator, log_every=cfg.log_every,
        initial_x=cfg.initial_x_m, initial_speed=cfg.initial_speed_mps, clearance=f.clearance_m,
        controller=RateControllerState(kp=c.kp, ki=c.ki, integral_limit=c.integral_limit),
        flight_gains=FlightGains(f.velocity_gain, f.altitude_gain, f.climb_gain, f.attitude_gain, f.rate_gain),
        rate_noise_std=cfg.rate_noise_std, seed=cfg.seed,
    )


def analytic_power(setup: SimSetup) -> float | None:
    """Steady-state power for a single-segment run on flat terrain, else None."""
    if len(setup.segments) != 1 or setup.terrain.kind != "flat":
        return None
    seg = setup.segments[0]
    slope, crr = setup.terrain.slope, setup.terrain.rolling_resistance
    if seg.mode == "rolling":
        return rolling_steady_state(seg.rate * setup.params.shell_radius, slope, crr,
                                    setup.params, setup.env, setup.eff).power
    if seg.mode == "flying":
        return flying_steady_state(seg.speed, slope, setup.params, setup.env, setup.eff).power
    return 0.0


def config_to_json(cfg: SimConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)
