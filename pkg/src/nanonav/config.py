"""Simulation configuration: a flat JSON document with validated defaults."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

from nanonav.field import FieldModel


class ConfigError(ValueError):
    """Invalid configuration. ``key`` names the offending field when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class SimConfig:
    side: float = 50.0
    cell_count: int = 1
    obstacle_count: int = 5
    obstacle_radius_range: tuple[float, float] = (3.0, 6.0)
    field_model: FieldModel = FieldModel.GAUSSIAN
    sigma: float = 15.0
    peak: float = 1.0
    d_min: float = 1e-3
    sensing_radius: float = 15.0
    step_size: float = 0.5
    capture_threshold: float = 0.5
    max_steps: int = 2000
    episodes: int = 300
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon0: float = 1.0
    decay: float = 0.995
    epsilon_min: float = 0.05
    seed: int = 0
    robot_count: int = 1
    shared_qtable: bool = False
    reward_mode: str = "proportional"
    cell_step: float = 0.25
    confinement_radius: float = 5.0
    obstacle_alert_radius: float = 0.5

    def __post_init__(self) -> None:
        _validate(self)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["obstacle_radius_range"] = list(self.obstacle_radius_range)
        d["field_model"] = self.field_model.value
        return d

    def replace(self, **changes) -> "SimConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return SimConfig(**d)


# key -> (low, high, low_inclusive, high_inclusive)
_RANGES = {
    "side": (0.0, math.inf, False, False),
    "cell_count": (0, math.inf, True, False),
    "obstacle_count": (0, math.inf, True, False),
    "sigma": (0.0, math.inf, False, False),
    "peak": (0.0, math.inf, True, False),
    "d_min": (0.0, math.inf, False, False),
    "sensing_radius": (0.0, math.inf, True, False),
    "step_size": (0.0, math.inf, False, False),
    "capture_threshold": (0.0, math.inf, True, False),
    "max_steps": (0, math.inf, True, False),
    "episodes": (0, math.inf, True, False),
    "alpha": (0.0, 1.0, False, True),
    "gamma": (0.0, 1.0, True, True),
    "epsilon0": (0.0, 1.0, True, True),
    "decay": (0.0, 1.0, False, True),
    "epsilon_min": (0.0, 1.0, True, True),
    "seed": (0, 2**64 - 1, True, True),
    "robot_count": (1, math.inf, True, False),
    "cell_step": (0.0, math.inf, True, False),
    "confinement_radius": (0.0, math.inf, True, False),
    "obstacle_alert_radius": (0.0, math.inf, True, False),
}
_INT_KEYS = {"cell_count", "obstacle_count", "max_steps", "episodes", "seed", "robot_count"}


def _check_range(key: str, value) -> None:
    lo, hi, lo_inc, hi_inc = _RANGES[key]
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}", key)
    elif isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}", key)
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite, got {value!r}", key)
    ok_lo = value >= lo if lo_inc else value > lo
    ok_hi = value <= hi if hi_inc else value < hi
    if not (ok_lo and ok_hi):
        lb = "[" if lo_inc else "("
        rb = "]" if hi_inc else ")"
        raise ConfigError(f"{key}: {value!r} out of range {lb}{lo}, {hi}{rb}", key)


def _validate(cfg: SimConfig) -> None:
    for key in _RANGES:
        _check_range(key, getattr(cfg, key))
    rr = cfg.obstacle_radius_range
    if len(rr) != 2 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rr):
        raise ConfigError("obstacle_radius_range: expected [min, max]", "obstacle_radius_range")
    if not 0 < rr[0] <= rr[1] or not math.isfinite(rr[1]):
        raise ConfigError(
            f"obstacle_radius_range: need 0 < min <= max, got {list(rr)}", "obstacle_radius_range"
        )
    if not isinstance(cfg.field_model, FieldModel):
        raise ConfigError(f"field_model: unknown model {cfg.field_model!r}", "field_model")
    if cfg.reward_mode not in ("proportional", "flat"):
        raise ConfigError(
            f"reward_mode: expected 'proportional' or 'flat', got {cfg.reward_mode!r}", "reward_mode"
        )
    if not isinstance(cfg.shared_qtable, bool):
        raise ConfigError("shared_qtable: expected a boolean", "shared_qtable")
    if cfg.epsilon_min > cfg.epsilon0:
        raise ConfigError("epsilon_min: must not exceed epsilon0", "epsilon_min")
    if 2 * cfg.confinement_radius > cfg.side:
        raise ConfigError(
            "confinement_radius: confinement ball does not fit in the cube", "confinement_radius"
        )


_FIELD_NAMES = {f.name for f in fields(SimConfig)}


def config_from_dict(data: dict) -> SimConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key", unknown[0])
    kwargs = dict(data)
    for key, value in kwargs.items():
        # JSON has one number type; store integral floats as float
        if key in _RANGES and key not in _INT_KEYS and type(value) is int:
            kwargs[key] = float(value)
    if "obstacle_radius_range" in kwargs:
        rr = kwargs["obstacle_radius_range"]
        if not isinstance(rr, (list, tuple)):
            raise ConfigError("obstacle_radius_range: expected [min, max]", "obstacle_radius_range")
        kwargs["obstacle_radius_range"] = tuple(
            float(v) if type(v) is int else v for v in rr
        )
    if "field_model" in kwargs:
        try:
            kwargs["field_model"] = FieldModel(kwargs["field_model"])
        except ValueError:
            raise ConfigError(
                f"field_model: unknown model {kwargs['field_model']!r}", "field_model"
            ) from None
    return SimConfig(**kwargs)


def parse_config(text: str) -> SimConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config document: {exc}") from None
    return config_from_dict(data)


def emit_config(cfg: SimConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
