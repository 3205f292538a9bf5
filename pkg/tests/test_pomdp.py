import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopmerge import _kernels as K
from coopmerge.drivers import CidmParams, IdmParams, cidm_accel
from coopmerge.dynamics import EgoState, VehicleState, propagate_ego, propagate_main_lane
from coopmerge.errors import InvalidInputError
from coopmerge.pomdp import (Action, MergePOMDP, Observation, RewardParams, SceneState,
                             generative_step, observation_likelihood, reward, separation)

from helpers import MODEL, conflict_scene

FULL = MergePOMDP(position_only=False)


def near_merge(v=15.0, vdot=0.0, sep=40.0, remaining=20.0):
    L = MODEL.geometry.ramp_length
    ego = EgoState(s=L - remaining, v=v, vdot=vdot)
    x_e = MODEL.geometry.merge_x - remaining
    return SceneState(ego, VehicleState(x=x_e - sep, v=15.0), VehicleState(x=x_e + 80, v=15.0), 0.3)


def test_action_bounds():
    Action(0.6)
    with pytest.raises(InvalidInputError):
        Action(0.61)


def test_scene_invariants():
    with pytest.raises(InvalidInputError):
        conflict_scene(c=1.2)
    with pytest.raises(InvalidInputError):
        SceneState(EgoState(0.0, 1.0), VehicleState(0.0, 1.0), VehicleState(-1.0, 1.0), 0.5)


def test_reward_params_validation():
    with pytest.raises(InvalidInputError):
        RewardParams(gamma=1.0)
    with pytest.raises(InvalidInputError):
        RewardParams(lambda3=-1.0)


def test_reward_zero_at_reference():
    assert reward(near_merge(), MODEL) == 0.0


def test_reward_all_terms():
    s = near_merge(v=13.0, vdot=-1.0, sep=10.0)
    assert reward(s, MODEL) == -103.0


def test_reward_boundary_is_strict():
    s = near_merge(sep=15.0)
    assert separation(s, MODEL) == 15.0
    assert reward(s, MODEL) == 0.0


def test_reward_inactive_outside_conflict_zone():
    assert reward(near_merge(sep=3.0, remaining=31.0), MODEL) == 0.0
    assert reward(near_merge(sep=3.0, remaining=29.0), MODEL) == -100.0


def test_generative_step_matches_composed_operations():
    s = conflict_scene(c=1.0)
    s2, obs, r = generative_step(s, Action(0.3), MODEL, None)
    acc = cidm_accel(CidmParams(IdmParams(), 1.0), s.trailing, s.ego, s.lead, MODEL.geometry)
    assert s2.trailing == propagate_main_lane(s.trailing, acc, 0.1)
    assert s2.lead == propagate_main_lane(s.lead, 0.0, 0.1)
    assert s2.ego == propagate_ego(s.ego, 0.3, 0.1)
    assert s2.c_T == 1.0
    assert (obs.trailing_x, obs.trailing_v) == (s2.trailing.x, s2.trailing.v)
    assert r == reward(s2, MODEL)


def test_generative_step_golden():
    s = conflict_scene(c=1.0, dist=150.0, lead_ahead=0.4)
    s2, _, r = generative_step(s, Action(0.6), MODEL, None)
    # ego projection 6 m ahead -> 1 m bumper gap -> hard-limited braking
    assert s2.trailing.vdot == -8.0
    assert s2.trailing.x == pytest.approx(-150.0 + 1.5 - 0.04, abs=1e-12)
    assert s2.trailing.v == pytest.approx(14.2, abs=1e-12)
    assert (s2.ego.s, s2.ego.v, s2.ego.vdot) == (pytest.approx(7.5), 15.0, pytest.approx(0.06))
    assert r == pytest.approx(-0.06)


def test_zero_jerk_keeps_speed():
    s2, _, _ = generative_step(conflict_scene(), Action(0.0), MODEL, None)
    assert s2.ego.v == 15.0


def test_observation_noise_uses_rng():
    s = conflict_scene()
    _, o1, _ = generative_step(s, Action(0.0), MODEL, np.random.default_rng(1))
    _, o2, _ = generative_step(s, Action(0.0), MODEL, np.random.default_rng(1))
    _, o3, _ = generative_step(s, Action(0.0), MODEL, np.random.default_rng(2))
    assert o1 == o2 and o1 != o3


def test_likelihood_mode_and_symmetry():
    s = conflict_scene()
    mode = observation_likelihood(Observation(s.trailing.x, s.trailing.v), s, FULL)
    assert mode == pytest.approx(1.0 / (2 * math.pi * 0.5 * 0.5), rel=1e-12)
    up = observation_likelihood(Observation(s.trailing.x + 0.3, s.trailing.v), s, FULL)
    down = observation_likelihood(Observation(s.trailing.x - 0.3, s.trailing.v), s, FULL)
    assert up == pytest.approx(down, rel=1e-14)
    off = observation_likelihood(Observation(s.trailing.x + 0.5, s.trailing.v), s, FULL)
    assert off / mode == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_position_only_likelihood_ignores_speed():
    s = conflict_scene()
    a = observation_likelihood(Observation(s.trailing.x, s.trailing.v), s, MODEL)
    b = observation_likelihood(Observation(s.trailing.x, s.trailing.v + 3.0), s, MODEL)
    assert a == b == pytest.approx(1.0 / (math.sqrt(2 * math.pi) * 0.5))


scene_st = st.builds(
    lambda s, ve, ae, dist, vt, gap, c: SceneState(
        EgoState(s=s, v=ve, vdot=ae), VehicleState(x=-dist, v=vt),
        VehicleState(x=-dist + gap, v=vt), c),
    s=st.floats(0, 200), ve=st.floats(0, 30), ae=st.floats(-4, 2), dist=st.floats(-50, 300),
    vt=st.floats(0, 30), gap=st.floats(0.5, 300), c=st.floats(0, 1))


@given(s=scene_st)
def test_reward_non_positive(s):
    assert reward(s, MODEL) <= 0.0


@given(s=scene_st, j=st.floats(-0.6, 0.6))
def test_transition_deterministic_and_c_static(s, j):
    a, _, ra = generative_step(s, Action(j), MODEL, None)
    b, _, rb = generative_step(s, Action(j), MODEL, None)
    assert a == b and ra == rb
    assert a.c_T == s.c_T


@given(s=scene_st, dv=st.floats(-5, 5), da=st.floats(-1, 1))
def test_reward_continuous_in_ego_speed(s, dv, da):
    # positions fixed: the indicator does not change, so the reward is Lipschitz
    moved = SceneState(EgoState(s.ego.s, max(s.ego.v + dv, 0.0), s.ego.vdot + da),
                       s.trailing, s.lead, s.c_T)
    diff = abs(reward(moved, MODEL) - reward(s, MODEL))
    assert diff <= abs(moved.ego.v - s.ego.v) + abs(da) + 1e-9


def test_replay_reproduces_trajectory():
    rng = np.random.default_rng(5)
    jerks = rng.choice([-0.6, -0.3, 0.0, 0.3, 0.6], size=60)
    s = conflict_scene(c=0.7)
    run1, obs1 = [s], []
    sim_rng = np.random.default_rng(11)
    for j in jerks:
        s, o, _ = generative_step(s, Action(float(j)), MODEL, sim_rng)
        run1.append(s)
        obs1.append(o)
    s = conflict_scene(c=0.7)
    sim_rng = np.random.default_rng(11)
    for k, j in enumerate(jerks):
        s, o, _ = generative_step(s, Action(float(j)), MODEL, sim_rng)
        assert s == run1[k + 1] and o == obs1[k]


def test_vector_roundtrip():
    s = conflict_scene(c=0.25)
    assert MODEL.from_vector(MODEL.to_vector(s)) == s
    assert MODEL.params.shape == (K.N_PARAMS,)
