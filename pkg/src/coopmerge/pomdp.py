"""The merge POMDP: spaces, generative transition, reward and observation model.

The dataclasses are the user-facing representation; ``MergePOMDP.params`` and
``MergePOMDP.to_vector`` flatten them for the compiled kernels used by the
particle filter and the tree search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from . import _kernels as K
from .drivers import VEHICLE_LENGTH, IdmParams
from .dynamics import (EGO_ACCEL_MAX, EGO_ACCEL_MIN, EPS_V, EgoState, MergeGeometry,
                       VehicleState)
from .errors import InvalidInputError

JERK_MIN = -0.6
JERK_MAX = 0.6


@dataclass(frozen=True)
class Action:
    jerk: float

    def __post_init__(self) -> None:
        if not (JERK_MIN <= self.jerk <= JERK_MAX):
            raise InvalidInputError(f"jerk {self.jerk} outside [{JERK_MIN}, {JERK_MAX}]")


@dataclass(frozen=True)
class Observation:
    trailing_x: float
    trailing_v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.trailing_x) and math.isfinite(self.trailing_v)):
            raise InvalidInputError("observation must be finite")


@dataclass(frozen=True)
class RewardParams:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 100.0
    d_safety: float = 15.0
    v_ref: float = 15.0
    gamma: float = 0.98
    d_activation: float = 30.0

    def __post_init__(self) -> None:
        if min(self.lambda1, self.lambda2, self.lambda3) < 0.0:
            raise InvalidInputError("reward weights must be non-negative")
        if self.d_safety <= 0.0 or self.d_activation <= 0.0:
            raise InvalidInputError("d_safety and d_activation must be positive")
        if not (0.0 < self.gamma < 1.0):
            raise InvalidInputError("gamma must lie in (0, 1)")


@dataclass(frozen=True)
class SceneState:
    ego: EgoState
    trailing: VehicleState
    lead: VehicleState
    c_T: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.c_T <= 1.0):
            raise InvalidInputError(f"c_T must be in [0, 1], got {self.c_T}")
        if not self.lead.x > self.trailing.x:
            raise InvalidInputError("lead must be downstream of the trailing vehicle")

    def with_c(self, c: float) -> SceneState:
        return SceneState(self.ego, self.trailing, self.lead, c)


@dataclass(frozen=True)
class MergePOMDP:
    """All fixed model quantities: geometry, trailing-driver IDM, reward, sensor."""

    geometry: MergeGeometry = field(default_factory=MergeGeometry.straight)
    trailing_idm: IdmParams = field(default_factory=IdmParams)
    reward_params: RewardParams = field(default_factory=RewardParams)
    sigma_obs: float = 0.5
    sigma_obs_v: float = 0.5
    position_only: bool = True
    dt: float = 0.1
    vehicle_length: float = VEHICLE_LENGTH
    eps_v: float = EPS_V
    ego_accel_min: float = EGO_ACCEL_MIN
    ego_accel_max: float = EGO_ACCEL_MAX

    def __post_init__(self) -> None:
        if self.sigma_obs <= 0.0 or self.sigma_obs_v <= 0.0:
            raise InvalidInputError("observation noise must be positive")
        if self.dt <= 0.0:
            raise InvalidInputError("dt must be positive")
        if self.ego_accel_min >= self.ego_accel_max:
            raise InvalidInputError("ego acceleration bounds are inverted")

    @cached_property
    def params(self) -> np.ndarray:
        g, idm, rw = self.geometry, self.trailing_idm, self.reward_params
        p = np.zeros(K.N_PARAMS)
        p[K.P_DT] = self.dt
        p[K.P_MERGE_X] = g.merge_x
        p[K.P_RAMP_LEN] = g.ramp_length
        p[K.P_EPS_V] = self.eps_v
        p[K.P_VEH_LEN] = self.vehicle_length
        p[K.P_EGO_AMIN] = self.ego_accel_min
        p[K.P_EGO_AMAX] = self.ego_accel_max
        p[K.P_VDES] = idm.v_des
        p[K.P_DMIN] = idm.d_min
        p[K.P_TAU] = idm.tau
        p[K.P_AMAX] = idm.a_max
        p[K.P_BPREF] = idm.b_pref
        p[K.P_BHARD] = idm.b_hard
        p[K.P_LAM1] = rw.lambda1
        p[K.P_LAM2] = rw.lambda2
        p[K.P_LAM3] = rw.lambda3
        p[K.P_DSAFE] = rw.d_safety
        p[K.P_VREF] = rw.v_ref
        p[K.P_DACT] = rw.d_activation
        p[K.P_SIG_X] = self.sigma_obs
        p[K.P_SIG_V] = self.sigma_obs_v
        p[K.P_POS_ONLY] = 1.0 if self.position_only else 0.0
        p.flags.writeable = False
        return p

    def to_vector(self, s: SceneState) -> np.ndarray:
        return np.array([s.ego.s, s.ego.v, s.ego.vdot,
                         s.trailing.x, s.trailing.v, s.trailing.vdot,
                         s.lead.x, s.lead.v, s.lead.vdot, s.c_T])

    def from_vector(self, vec: np.ndarray) -> SceneState:
        y = self.geometry.main_lane_y
        return SceneState(
            ego=EgoState(s=float(vec[K.EGO_S]), v=float(vec[K.EGO_V]), vdot=float(vec[K.EGO_A])),
            trailing=VehicleState(x=float(vec[K.TR_X]), v=float(vec[K.TR_V]),
                                  vdot=float(vec[K.TR_A]), y=y),
            lead=VehicleState(x=float(vec[K.LD_X]), v=float(vec[K.LD_V]),
                              vdot=float(vec[K.LD_A]), y=y),
            c_T=float(vec[K.COOP]))

    def sample_observation(self, vec: np.ndarray, rng: np.random.Generator) -> Observation:
        return Observation(trailing_x=float(vec[K.TR_X] + self.sigma_obs * rng.standard_normal()),
                           trailing_v=float(vec[K.TR_V] + self.sigma_obs_v * rng.standard_normal()))


def generative_step(s: SceneState, a: Action, model: MergePOMDP, rng: np.random.Generator | None,
                    dt: float | None = None) -> tuple[SceneState, Observation, float]:
    """Sample ``(s', o, r)``. With ``rng=None`` the observation is noise-free."""
    p = model.params
    if dt is not None and dt != model.dt:
        p = p.copy()
        p[K.P_DT] = dt
    nxt = K.transition(model.to_vector(s), a.jerk, p)
    if rng is None:
        obs = Observation(float(nxt[K.TR_X]), float(nxt[K.TR_V]))
    else:
        obs = model.sample_observation(nxt, rng)
    return model.from_vector(nxt), obs, float(K.reward(nxt, p))


def reward(s: SceneState, model: MergePOMDP) -> float:
    """Speed tracking, control effort and safety-distance penalty (always <= 0)."""
    return float(K.reward(model.to_vector(s), model.params))


def separation(s: SceneState, model: MergePOMDP) -> float:
    return float(K.separation(model.to_vector(s), model.params))


def observation_likelihood(o: Observation, s_prime: SceneState, model: MergePOMDP) -> float:
    """Gaussian sensor density Z(o | s'); position only unless disabled in the model."""
    vec = model.to_vector(s_prime)
    return math.exp(K.obs_loglik(o.trailing_x, o.trailing_v, vec, model.params))


# --- compiled model callbacks for the tree search -------------------------------

@njit(cache=True)
def tree_generate(state, jerk, p):
    nxt = K.transition(state, jerk, p)
    obs = np.empty(2)
    obs[0] = nxt[K.TR_X] + p[K.P_SIG_X] * np.random.standard_normal()
    obs[1] = nxt[K.TR_V] + p[K.P_SIG_V] * np.random.standard_normal()
    return nxt, obs


@njit(cache=True)
def tree_reward(state, jerk, nxt, p):
    return K.reward(nxt, p)


@njit(cache=True)
def tree_likelihood(obs, state, jerk, nxt, p):
    return math.exp(K.obs_loglik(obs[0], obs[1], nxt, p))


@njit(cache=True)
def rollout_coast(state, jerk, depth, gamma, p):
    """Zero jerk from the leaf on."""
    total = 0.0
    disc = 1.0
    s = state
    for _ in range(depth):
        s = K.transition(s, 0.0, p)
        total += disc * K.reward(s, p)
        disc *= gamma
    return total


@njit(cache=True)
def rollout_hold(state, jerk, depth, gamma, p):
    """Keep applying the leaf action's jerk."""
    total = 0.0
    disc = 1.0
    s = state
    for _ in range(depth):
        s = K.transition(s, jerk, p)
        total += disc * K.reward(s, p)
        disc *= gamma
    return total


@njit(cache=True)
def rollout_hold_settle(state, jerk, depth, gamma, p):
    """Hold the leaf jerk for ``P_ROLL_HOLD`` steps, then bring acceleration back to zero."""
    total = 0.0
    disc = 1.0
    s = state
    hold = int(p[K.P_ROLL_HOLD])
    dt = p[K.P_DT]
    for k in range(depth):
        if k < hold:
            j = jerk
        else:
            j = min(max(-s[K.EGO_A] / dt, JERK_MIN), JERK_MAX)
        s = K.transition(s, j, p)
        total += disc * K.reward(s, p)
        disc *= gamma
    return total


ROLLOUTS = {
    "coast": rollout_coast,
    "hold": rollout_hold,
    "hold_settle": rollout_hold_settle,
}
