"""Merge geometry, longitudinal kinematics and time-to-merge."""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernels as K
from .errors import InvalidInputError

EPS_V = 0.1
EGO_ACCEL_MIN = -4.0
EGO_ACCEL_MAX = 2.0


def _finite(**values: float) -> None:
    for name, val in values.items():
        if not math.isfinite(val):
            raise InvalidInputError(f"{name} must be finite, got {val!r}")


def _positive_dt(dt: float) -> None:
    _finite(dt=dt)
    if dt <= 0.0:
        raise InvalidInputError(f"dt must be positive, got {dt}")


@dataclass(frozen=True)
class VehicleState:
    """Main-lane vehicle: position, lateral position, speed, acceleration, heading."""

    x: float
    v: float
    vdot: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        _finite(x=self.x, v=self.v, vdot=self.vdot, y=self.y, theta=self.theta)
        if self.v < 0.0:
            raise InvalidInputError(f"speed must be non-negative, got {self.v}")


@dataclass(frozen=True)
class EgoState:
    """Merging vehicle described by its arc-length progress ``s`` along the ramp."""

    s: float
    v: float
    vdot: float = 0.0

    def __post_init__(self) -> None:
        _finite(s=self.s, v=self.v, vdot=self.vdot)
        if self.s < 0.0:
            raise InvalidInputError(f"ramp progress must be non-negative, got {self.s}")
        if self.v < 0.0:
            raise InvalidInputError(f"speed must be non-negative, got {self.v}")


@dataclass(frozen=True)
class MergeGeometry:
    """Straight ramp joining a single-lane freeway at ``merge_point``."""

    main_lane_y: float = 0.0
    ramp_origin: tuple[float, float] = (-150.0, -3.5)
    merge_point: tuple[float, float] = (0.0, 0.0)
    ramp_length: float = 150.0

    def __post_init__(self) -> None:
        _finite(main_lane_y=self.main_lane_y, ramp_length=self.ramp_length,
                mx=self.merge_point[0], my=self.merge_point[1],
                ox=self.ramp_origin[0], oy=self.ramp_origin[1])
        if self.ramp_length <= 0.0:
            raise InvalidInputError("ramp_length must be positive")
        if self.merge_point[1] != self.main_lane_y:
            raise InvalidInputError("merge_point must lie on the main lane")

    @classmethod
    def straight(cls, ramp_length: float = 150.0, merge_x: float = 0.0,
                 main_lane_y: float = 0.0, lateral_offset: float = 3.5) -> MergeGeometry:
        """Ramp parallel to the main lane, offset sideways by ``lateral_offset``."""
        return cls(main_lane_y=main_lane_y,
                   ramp_origin=(merge_x - ramp_length, main_lane_y - lateral_offset),
                   merge_point=(merge_x, main_lane_y),
                   ramp_length=ramp_length)

    @property
    def merge_x(self) -> float:
        return self.merge_point[0]


def propagate_main_lane(state: VehicleState, accel: float, dt: float) -> VehicleState:
    """Advance a main-lane vehicle one step under constant acceleration.

    A vehicle that would reverse within the step stops at the end of its
    braking parabola with zero speed and zero acceleration.
    """
    _finite(accel=accel)
    _positive_dt(dt)
    x, v, a = K.main_lane_step(state.x, state.v, accel, dt)
    return VehicleState(x=x, v=v, vdot=a, y=state.y, theta=state.theta)


def propagate_ego(state: EgoState, jerk: float, dt: float,
                  accel_min: float = EGO_ACCEL_MIN,
                  accel_max: float = EGO_ACCEL_MAX) -> EgoState:
    """Advance the ego one step in jerk space (explicit Euler on s and v)."""
    _finite(jerk=jerk)
    _positive_dt(dt)
    s, v, a = K.ego_jerk_step(state.s, state.v, state.vdot, jerk, dt, accel_min, accel_max)
    return EgoState(s=s, v=v, vdot=a)


def propagate_ego_accel(state: EgoState, accel: float, dt: float) -> EgoState:
    """Advance the ego one step with its acceleration commanded directly."""
    _finite(accel=accel)
    _positive_dt(dt)
    s, v, a = K.ego_accel_step(state.s, state.v, accel, dt)
    return EgoState(s=s, v=v, vdot=a)


def time_to_merge_ego(state: EgoState, geom: MergeGeometry, eps_v: float = EPS_V) -> float:
    return K.time_to_merge(geom.ramp_length - state.s, state.v, eps_v)


def time_to_merge_main(state: VehicleState, geom: MergeGeometry, eps_v: float = EPS_V) -> float:
    return K.time_to_merge(geom.merge_x - state.x, state.v, eps_v)


def ego_projection(state: EgoState, geom: MergeGeometry) -> VehicleState:
    """Ego mapped onto the main lane at equal remaining distance to the merge point."""
    x = geom.merge_x - (geom.ramp_length - state.s)
    return VehicleState(x=x, v=state.v, vdot=state.vdot, y=geom.main_lane_y)
