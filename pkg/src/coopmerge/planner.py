"""Online planning: POMCPOW over the merge POMDP plus the baseline controllers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._pomcpow import search
from .drivers import IdmParams, LeaderContext, sidm_accel
from .dynamics import ego_projection
from .errors import InvalidInputError
from .estimation import ParticleSet
from .pomdp import (JERK_MAX, JERK_MIN, ROLLOUTS, Action, MergePOMDP, SceneState,
                    tree_generate, tree_likelihood, tree_reward)

DEFAULT_ACTIONS = (-0.6, -0.3, 0.0, 0.3, 0.6)


@dataclass(frozen=True)
class PlannerConfig:
    n_queries: int = 2000
    max_depth: int = 80
    ucb_c: float = 50.0
    k_obs: float = 4.0
    alpha_obs: float = 0.1
    action_set: tuple[float, ...] = DEFAULT_ACTIONS
    rollout_policy: str = "hold_settle"
    rollout_hold_steps: int = 20
    gamma: float | None = None  # None: use the model's reward discount
    b_emergency: float = 6.0
    sidm_sigma_a: float = 0.3
    safety_margin: float = 0.0  # m added to d_safety inside the planning model only

    def __post_init__(self) -> None:
        if self.n_queries < 1 or self.max_depth < 1:
            raise InvalidInputError("n_queries and max_depth must be at least 1")
        if self.ucb_c <= 0.0 or self.k_obs <= 0.0:
            raise InvalidInputError("ucb_c and k_obs must be positive")
        if not (0.0 < self.alpha_obs < 1.0):
            raise InvalidInputError("alpha_obs must lie in (0, 1)")
        if not self.action_set:
            raise InvalidInputError("action_set is empty")
        if any(not (JERK_MIN <= a <= JERK_MAX) for a in self.action_set):
            raise InvalidInputError("every action must be a jerk within [-0.6, 0.6]")
        if self.rollout_policy not in ROLLOUTS:
            raise InvalidInputError(f"unknown rollout policy {self.rollout_policy!r}")
        if self.gamma is not None and not (0.0 < self.gamma < 1.0):
            raise InvalidInputError("gamma must lie in (0, 1)")
        if self.b_emergency <= 0.0 or self.sidm_sigma_a < 0.0:
            raise InvalidInputError("b_emergency must be positive, sidm_sigma_a non-negative")
        if self.safety_margin < 0.0:
            raise InvalidInputError("safety_margin must be non-negative")


@dataclass(frozen=True)
class Strategy:
    """``learned_c``, ``fixed_c`` (with ``value``) or ``sidm``."""

    kind: str
    value: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("learned_c", "fixed_c", "sidm"):
            raise InvalidInputError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "fixed_c":
            if self.value is None or not (0.0 <= self.value <= 1.0):
                raise InvalidInputError("fixed_c needs a value in [0, 1]")
        elif self.value is not None:
            raise InvalidInputError(f"{self.kind} takes no value")

    @property
    def name(self) -> str:
        if self.kind == "fixed_c":
            return f"fixed_c={self.value:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> Strategy:
        """Accepts ``learned_c``, ``sidm``, ``fixed_c=0.0`` or ``fixed_c:1``."""
        text = text.strip()
        if text in ("learned_c", "sidm"):
            return cls(text)
        for sep in ("=", ":"):
            if text.startswith("fixed_c" + sep):
                try:
                    return cls("fixed_c", float(text[len("fixed_c") + 1:]))
                except ValueError:
                    break
        raise InvalidInputError(f"cannot parse strategy {text!r}")


DEFAULT_STRATEGIES = (Strategy("learned_c"), Strategy("fixed_c", 0.0),
                    Strategy("fixed_c", 1.0), Strategy("sidm"))


@dataclass(frozen=True)
class PlanResult:
    action: Action
    q: np.ndarray
    n: np.ndarray
    n_nodes: int
    pw_ratio: float


@dataclass(frozen=True)
class EgoCommand:
    """What the ego executes this step: a jerk, or a directly commanded acceleration."""

    jerk: float | None = None
    accel: float | None = None
    override: bool = False


def _planner_params(model: MergePOMDP, cfg: PlannerConfig) -> np.ndarray:
    p = model.params.copy()
    p[K.P_ROLL_HOLD] = cfg.rollout_hold_steps
    p[K.P_DSAFE] += cfg.safety_margin
    return p


def _root_belief(belief: ParticleSet | float, scene: SceneState,
                 model: MergePOMDP) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(belief, ParticleSet):
        if belief.size == 0:
            raise InvalidInputError("empty belief")
        return belief.states, belief.cumulative_weights()
    c = float(belief)
    if not (0.0 <= c <= 1.0):
        raise InvalidInputError(f"pinned cooperation level {c} outside [0, 1]")
    root = model.to_vector(scene)
    root[K.COOP] = c
    return root[None, :], np.ones(1)


def plan_detailed(belief: ParticleSet | float, scene: SceneState, cfg: PlannerConfig,
                  model: MergePOMDP, rng: np.random.Generator) -> PlanResult:
    """Run the tree search and return the greedy root action with diagnostics.

    ``belief`` is either the particle filter (root states are drawn from its
    particles) or a fixed cooperation level that pins ``c`` in ``scene``.
    """
    states, cum = _root_belief(belief, scene, model)
    gamma = cfg.gamma if cfg.gamma is not None else model.reward_params.gamma
    actions = np.asarray(cfg.action_set, dtype=float)
    seed = int(rng.integers(0, 2**31 - 1))
    q, n, n_nodes, pw_ratio = search(
        np.ascontiguousarray(states), cum, _planner_params(model, cfg), actions,
        cfg.n_queries, cfg.max_depth, cfg.ucb_c, cfg.k_obs, cfg.alpha_obs, gamma, seed,
        tree_generate, tree_reward, tree_likelihood, ROLLOUTS[cfg.rollout_policy])
    best = int(np.argmax(q))
    return PlanResult(Action(float(actions[best])), q, n, int(n_nodes), float(pw_ratio))


def plan(belief: ParticleSet | float, scene: SceneState, cfg: PlannerConfig,
         model: MergePOMDP, rng: np.random.Generator) -> Action:
    return plan_detailed(belief, scene, cfg, model, rng).action


def sidm_ego_step(scene: SceneState, params: IdmParams, sigma_a: float,
                  rng: np.random.Generator, model: MergePOMDP) -> float:
    """Stochastic IDM acceleration for the ego, following whatever main-lane
    vehicle is closest ahead of its projection. Overlapping gaps are floored
    at ``GAP_FLOOR`` instead of raising."""
    proj = ego_projection(scene.ego, model.geometry)
    leader = None
    for veh in (scene.trailing, scene.lead):
        if veh.x > proj.x and (leader is None or veh.x < leader.x):
            leader = veh
    ctx = None
    if leader is not None:
        gap = max(leader.x - proj.x - model.vehicle_length, K.GAP_FLOOR)
        ctx = LeaderContext(d=gap, r=leader.v - proj.v, leader_v=leader.v)
    return sidm_accel(params, sigma_a, scene.ego.v, ctx, rng)


def override_active(scene: SceneState, model: MergePOMDP) -> bool:
    """True while the ego is on the ramp, inside the safety envelope and still on
    a collision course: a trailing car that has fully passed the projection and
    is pulling away no longer needs an emergency brake, only ordinary spacing."""
    if scene.ego.s >= model.geometry.ramp_length:
        return False
    vec = model.to_vector(scene)
    if not K.in_conflict(vec, model.params):
        return False
    proj_x = float(K.ego_main_x(vec, model.params))
    passed = scene.trailing.x - proj_x - model.vehicle_length >= 0.0
    return not (passed and scene.trailing.v >= scene.ego.v)


def emergency_brake_override(scene: SceneState, command: EgoCommand | Action,
                             model: MergePOMDP, b_emergency: float = 6.0) -> EgoCommand:
    """Replace the command by a ``-b_emergency`` brake while in conflict."""
    if isinstance(command, Action):
        command = EgoCommand(jerk=command.jerk)
    if override_active(scene, model):
        return EgoCommand(accel=-b_emergency, override=True)
    return command


def time_to_collision(scene_vec: np.ndarray, model: MergePOMDP, cap: float = math.inf) -> float:
    """Bumper gap over closing speed between the ego projection and the trailing car."""
    x_e = float(K.ego_main_x(scene_vec, model.params))
    x_t = float(scene_vec[K.TR_X])
    v_e = float(scene_vec[K.EGO_V])
    v_t = float(scene_vec[K.TR_V])
    if x_t <= x_e:
        gap, closing = x_e - x_t - model.vehicle_length, v_t - v_e
    else:
        gap, closing = x_t - x_e - model.vehicle_length, v_e - v_t
    if gap <= 0.0:
        return 0.0
    if closing <= 0.0:
        return cap
    return min(gap / closing, cap)
