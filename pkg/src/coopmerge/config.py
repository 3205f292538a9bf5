"""YAML configuration: schema validation, defaults and conversion to typed objects."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .drivers import IdmParams
from .dynamics import MergeGeometry
from .errors import ConfigError, CoopMergeError
from .estimation import FilterConfig
from .planner import PlannerConfig
from .pomdp import MergePOMDP, RewardParams

OUT_DIR_ENV = "COOPMERGE_OUT_DIR"


def _resource_text(name: str) -> str:
    return resources.files("coopmerge").joinpath("resources", name).read_text()


def default_config_dict() -> dict[str, Any]:
    return yaml.safe_load(_resource_text("default.yaml"))


def config_schema() -> dict[str, Any]:
    return json.loads(_resource_text("config.schema.json"))


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _range(pair: list[float], name: str) -> tuple[float, float]:
    lo, hi = float(pair[0]), float(pair[1])
    if lo > hi:
        raise ConfigError(f"{name}: empty range [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class ScenarioConfig:
    model: MergePOMDP
    ego_idm: IdmParams
    filter: FilterConfig
    planner: PlannerConfig
    ego_speed: tuple[float, float] = (15.0, 15.0)
    trailing_distance: tuple[float, float] = (120.0, 200.0)
    trailing_speed: tuple[float, float] = (15.0, 15.0)
    ttm_conflict_tol: float = 0.5
    lead_gap: float = 120.0
    true_c: float = 0.0
    t_max: float = 30.0
    ttc_cap: float = 30.0
    sidm_sigma_a: float = 0.3
    seed: int = 0
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def geometry(self) -> MergeGeometry:
        return self.model.geometry

    def with_true_c(self, c: float) -> ScenarioConfig:
        if not (0.0 <= c <= 1.0):
            raise ConfigError(f"true_c must be in [0, 1], got {c}")
        return replace(self, true_c=float(c))


def build_config(data: dict[str, Any] | None = None) -> ScenarioConfig:
    """Validate ``data`` (merged over the defaults) and build a ScenarioConfig."""
    merged = _deep_merge(default_config_dict(), data or {})
    try:
        jsonschema.validate(merged, config_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from None

    g, sim, sc = merged["geometry"], merged["simulation"], merged["scenario"]
    rw, ob, fl, pl = merged["reward"], merged["observation"], merged["filter"], merged["planner"]
    try:
        geometry = MergeGeometry.straight(ramp_length=g["ramp_length"], merge_x=g["merge_x"],
                                          main_lane_y=g["main_lane_y"],
                                          lateral_offset=g["lateral_offset"])
        model = MergePOMDP(
            geometry=geometry,
            trailing_idm=IdmParams(**merged["idm"]["main_lane"]),
            reward_params=RewardParams(**rw),
            sigma_obs=ob["sigma_obs"], sigma_obs_v=ob["sigma_obs_v"],
            position_only=ob["position_only"], dt=sim["dt"],
            vehicle_length=sim["vehicle_length"], eps_v=sim["eps_v"],
            ego_accel_min=sim["ego_accel_min"], ego_accel_max=sim["ego_accel_max"])
        filt = FilterConfig(**{**fl, "dither": tuple(fl["dither"])})
        planner = PlannerConfig(**{**pl, "action_set": tuple(pl["action_set"])})
        return ScenarioConfig(
            model=model,
            ego_idm=IdmParams(**merged["idm"]["ego"]),
            filter=filt,
            planner=planner,
            ego_speed=_range(sc["ego_speed"], "ego_speed"),
            trailing_distance=_range(sc["trailing_distance"], "trailing_distance"),
            trailing_speed=_range(sc["trailing_speed"], "trailing_speed"),
            ttm_conflict_tol=sc["ttm_conflict_tol"],
            lead_gap=sc["lead_gap"],
            true_c=sc["true_c"],
            t_max=sim["t_max"],
            ttc_cap=sim["ttc_cap"],
            sidm_sigma_a=merged["sidm"]["sigma_a"],
            seed=merged["seed"],
            raw=merged)
    except ConfigError:
        raise
    except CoopMergeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None = None) -> ScenarioConfig:
    """Load a YAML config file; ``None`` gives the shipped defaults."""
    if path is None:
        return build_config()
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_config(data)
