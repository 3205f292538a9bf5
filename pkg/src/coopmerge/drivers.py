"""Longitudinal driver models: IDM, cooperative IDM and stochastic IDM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dynamics import EPS_V, EgoState, MergeGeometry, VehicleState
from .errors import CollisionStateError, InvalidInputError

VEHICLE_LENGTH = 5.0
B_HARD_LIMIT = 8.0


@dataclass(frozen=True)
class IdmParams:
    v_des: float = 15.0
    d_min: float = 2.0
    tau: float = 1.5
    a_max: float = 2.0
    b_pref: float = 3.0
    b_hard: float = B_HARD_LIMIT

    def __post_init__(self) -> None:
        for name in ("v_des", "d_min", "tau", "a_max", "b_pref", "b_hard"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise InvalidInputError(f"IDM parameter {name} must be positive, got {val}")


@dataclass(frozen=True)
class CidmParams:
    idm: IdmParams
    c: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.c <= 1.0):
            raise InvalidInputError(f"cooperation level must be in [0, 1], got {self.c}")


@dataclass(frozen=True)
class LeaderContext:
    """Leader as seen by a follower.

    ``d`` is the bumper-to-bumper headway and ``r`` is leader speed minus
    follower speed, so a positive ``r`` means the gap is opening.
    """

    d: float
    r: float
    leader_v: float

    @classmethod
    def between(cls, follower: VehicleState, leader: VehicleState,
                vehicle_length: float = VEHICLE_LENGTH) -> LeaderContext:
        return cls(d=leader.x - follower.x - vehicle_length,
                   r=leader.v - follower.v, leader_v=leader.v)


def idm_accel(params: IdmParams, v: float, ctx: LeaderContext | None) -> float:
    if not (math.isfinite(v) and v >= 0.0):
        raise InvalidInputError(f"speed must be finite and non-negative, got {v}")
    if ctx is None:
        return K.idm(v, params.v_des, params.d_min, params.tau, params.a_max,
                     params.b_pref, params.b_hard, False, 1.0, 0.0)
    if not (math.isfinite(ctx.d) and math.isfinite(ctx.r)):
        raise InvalidInputError("leader context must be finite")
    if ctx.d <= 0.0:
        raise CollisionStateError(f"non-positive headway {ctx.d}")
    return K.idm(v, params.v_des, params.d_min, params.tau, params.a_max,
                 params.b_pref, params.b_hard, True, ctx.d, ctx.r)


def _scene_vector(ego: EgoState, trailing: VehicleState, lead: VehicleState, c: float) -> np.ndarray:
    return np.array([ego.s, ego.v, ego.vdot, trailing.x, trailing.v, trailing.vdot,
                     lead.x, lead.v, lead.vdot, c])


def _geometry_vector(geom: MergeGeometry, eps_v: float) -> np.ndarray:
    p = np.zeros(K.N_PARAMS)
    p[K.P_MERGE_X] = geom.merge_x
    p[K.P_RAMP_LEN] = geom.ramp_length
    p[K.P_EPS_V] = eps_v
    return p


def cidm_leader(c: float, trailing: VehicleState, ego: EgoState, lead: VehicleState,
                geom: MergeGeometry, eps_v: float = EPS_V) -> VehicleState | None:
    """Vehicle the trailing car follows under the cooperative rule (None on a free road)."""
    state = _scene_vector(ego, trailing, lead, c)
    x, v, present, is_ego = K.cidm_leader(state, _geometry_vector(geom, eps_v))
    if not present:
        return None
    if not is_ego:
        return lead
    return VehicleState(x=x, v=v, vdot=ego.vdot, y=geom.main_lane_y)


def cidm_accel(params: CidmParams, trailing: VehicleState, ego: EgoState, lead: VehicleState,
               geom: MergeGeometry, vehicle_length: float = VEHICLE_LENGTH,
               eps_v: float = EPS_V) -> float:
    """Cooperative IDM: yield to the ego projection when TTM_ego < c * TTM_trailing.

    The yield rule is re-evaluated on every call (no latching). Once the ego has
    merged and sits between the trailing car and the lead it is followed as an
    ordinary leader.
    """
    leader = cidm_leader(params.c, trailing, ego, lead, geom, eps_v)
    ctx = None if leader is None else LeaderContext.between(trailing, leader, vehicle_length)
    return idm_accel(params.idm, trailing.v, ctx)


def sidm_accel(params: IdmParams, sigma_a: float, v: float, ctx: LeaderContext | None,
               rng: np.random.Generator) -> float:
    """IDM output plus zero-mean Gaussian noise, clamped to the IDM bounds."""
    if not (math.isfinite(sigma_a) and sigma_a >= 0.0):
        raise InvalidInputError(f"sigma_a must be non-negative, got {sigma_a}")
    base = idm_accel(params, v, ctx)
    noisy = base + sigma_a * rng.standard_normal()
    return min(max(noisy, -params.b_hard), params.a_max)
