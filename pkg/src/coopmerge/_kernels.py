"""Scalar numba kernels shared by the simulator, the particle filter and the planner.

Everything here works on flat float64 arrays so that the tree search can run
fully inside numba. The public, dataclass-based API lives in ``dynamics``,
``drivers`` and ``pomdp``; those modules only validate and forward here.

State vector layout (``STATE_DIM`` floats)::

    [ego_s, ego_v, ego_a, tr_x, tr_v, tr_a, ld_x, ld_v, ld_a, coop]

Parameter vector layout: see the ``P_*`` indices below.
"""

import math

import numpy as np
from numba import njit

EGO_S, EGO_V, EGO_A = 0, 1, 2
TR_X, TR_V, TR_A = 3, 4, 5
LD_X, LD_V, LD_A = 6, 7, 8
COOP = 9
STATE_DIM = 10

P_DT = 0
P_MERGE_X = 1
P_RAMP_LEN = 2
P_EPS_V = 3
P_VEH_LEN = 4
P_EGO_AMIN = 5
P_EGO_AMAX = 6
P_VDES = 7
P_DMIN = 8
P_TAU = 9
P_AMAX = 10
P_BPREF = 11
P_BHARD = 12
P_LAM1 = 13
P_LAM2 = 14
P_LAM3 = 15
P_DSAFE = 16
P_VREF = 17
P_DACT = 18
P_SIG_X = 19
P_SIG_V = 20
P_POS_ONLY = 21
P_ROLL_HOLD = 22
N_PARAMS = 23

# bumper gap used when a leader overlaps the follower inside a simulation
GAP_FLOOR = 0.1

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@njit(cache=True)
def main_lane_step(x, v, a, dt):
    """Point-mass step; a vehicle that would reverse stops where v hits zero."""
    v_new = v + a * dt
    if v_new < 0.0:
        # stopping point of the braking parabola, no reverse motion
        x_new = x + (v * v / (-2.0 * a) if a < 0.0 else 0.0)
        return x_new, 0.0, 0.0 if a < 0.0 else a
    return x + v * dt + 0.5 * a * dt * dt, v_new, a


@njit(cache=True)
def ego_jerk_step(s, v, a, jerk, dt, a_min, a_max):
    a_new = min(max(a + jerk * dt, a_min), a_max)
    v_new = max(0.0, v + a * dt)
    s_new = s + v * dt
    if v_new == 0.0 and a_new < 0.0:
        a_new = 0.0
    return s_new, v_new, a_new


@njit(cache=True)
def ego_accel_step(s, v, accel, dt):
    """Ego step with the acceleration commanded directly (SIDM, emergency brake)."""
    v_new = v + accel * dt
    if v_new < 0.0:
        return s + v * v / (-2.0 * accel), 0.0, 0.0
    return s + v * dt + 0.5 * accel * dt * dt, v_new, accel


@njit(cache=True)
def time_to_merge(remaining, v, eps_v):
    if remaining <= 0.0:
        return 0.0
    if v <= eps_v:
        return math.inf
    return remaining / v


@njit(cache=True)
def idm(v, v_des, d_min, tau, a_max, b_pref, b_hard, has_leader, gap, r):
    ratio = v / v_des
    term = 1.0 - ratio * ratio * ratio * ratio
    if has_leader:
        d_des = d_min + tau * v - v * r / (2.0 * math.sqrt(a_max * b_pref))
        if d_des < d_min:
            d_des = d_min
        q = d_des / gap
        term -= q * q
    acc = a_max * term
    if acc > a_max:
        return a_max
    if acc < -b_hard:
        return -b_hard
    return acc


@njit(cache=True)
def cidm_yields(c, ttm_ego, ttm_trailing, ego_exists):
    """C-IDM branch rule: True when the trailing car treats the ego projection as leader."""
    if not ego_exists or c <= 0.0:
        return False
    return ttm_ego < c * ttm_trailing


@njit(cache=True)
def ego_main_x(state, p):
    return p[P_MERGE_X] - (p[P_RAMP_LEN] - state[EGO_S])


@njit(cache=True)
def cidm_leader(state, p):
    """Leader seen by the trailing car under C-IDM: ``(x, v, present, is_ego)``.

    The ego projection is used when the yield rule fires and the projection is
    ahead of the trailing car. After the merge, an ego sitting between the
    trailing car and the lead is the physical leader.
    """
    ramp = p[P_RAMP_LEN]
    eps = p[P_EPS_V]
    x_t = state[TR_X]
    x_e = ego_main_x(state, p)
    ego_exists = state[EGO_S] >= 0.0 and state[EGO_S] < ramp
    lead_x = state[LD_X]
    use_ego = False
    if ego_exists and x_e > x_t:
        ttm_e = time_to_merge(ramp - state[EGO_S], state[EGO_V], eps)
        ttm_t = time_to_merge(p[P_MERGE_X] - x_t, state[TR_V], eps)
        use_ego = cidm_yields(state[COOP], ttm_e, ttm_t, True)
    elif not ego_exists and x_t < x_e < lead_x:
        use_ego = True
    if use_ego:
        return x_e, state[EGO_V], True, True
    return lead_x, state[LD_V], lead_x > x_t, False


@njit(cache=True)
def trailing_accel(state, p):
    """C-IDM acceleration of the trailing car inside a simulation (never raises)."""
    lead_x, lead_v, has_leader, _ = cidm_leader(state, p)
    v_t = state[TR_V]
    gap = max(lead_x - state[TR_X] - p[P_VEH_LEN], GAP_FLOOR)
    return idm(v_t, p[P_VDES], p[P_DMIN], p[P_TAU], p[P_AMAX], p[P_BPREF],
               p[P_BHARD], has_leader, gap, lead_v - v_t)


@njit(cache=True)
def transition(state, jerk, p):
    """Deterministic part of the generative model for a jerk action."""
    dt = p[P_DT]
    out = state.copy()
    acc_t = trailing_accel(state, p)
    out[EGO_S], out[EGO_V], out[EGO_A] = ego_jerk_step(
        state[EGO_S], state[EGO_V], state[EGO_A], jerk, dt, p[P_EGO_AMIN], p[P_EGO_AMAX])
    out[TR_X], out[TR_V], out[TR_A] = main_lane_step(state[TR_X], state[TR_V], acc_t, dt)
    out[LD_X], out[LD_V], out[LD_A] = main_lane_step(state[LD_X], state[LD_V], 0.0, dt)
    return out


@njit(cache=True)
def transition_accel(state, accel, p):
    """Same as ``transition`` but with the ego acceleration set directly."""
    dt = p[P_DT]
    out = state.copy()
    acc_t = trailing_accel(state, p)
    out[EGO_S], out[EGO_V], out[EGO_A] = ego_accel_step(
        state[EGO_S], state[EGO_V], accel, dt)
    out[TR_X], out[TR_V], out[TR_A] = main_lane_step(state[TR_X], state[TR_V], acc_t, dt)
    out[LD_X], out[LD_V], out[LD_A] = main_lane_step(state[LD_X], state[LD_V], 0.0, dt)
    return out


@njit(cache=True)
def separation(state, p):
    return abs(ego_main_x(state, p) - state[TR_X])


@njit(cache=True)
def in_conflict(state, p):
    """Safety-distance violation between the ego projection and the trailing car."""
    remaining = p[P_RAMP_LEN] - state[EGO_S]
    return remaining < p[P_DACT] and separation(state, p) < p[P_DSAFE]


@njit(cache=True)
def reward(state, p):
    r = -p[P_LAM1] * abs(state[EGO_V] - p[P_VREF]) - p[P_LAM2] * abs(state[EGO_A])
    if in_conflict(state, p):
        r -= p[P_LAM3]
    return r


@njit(cache=True)
def obs_loglik(ox, ov, state, p):
    sx = p[P_SIG_X]
    zx = (ox - state[TR_X]) / sx
    ll = -0.5 * zx * zx - math.log(sx) - _LOG_SQRT_2PI
    if p[P_POS_ONLY] == 0.0:
        sv = p[P_SIG_V]
        zv = (ov - state[TR_V]) / sv
        ll += -0.5 * zv * zv - math.log(sv) - _LOG_SQRT_2PI
    return ll


@njit(cache=True)
def propagate_particles(states, jerk, p):
    """One prediction step of every particle under its own cooperation level."""
    out = np.empty_like(states)
    for i in range(states.shape[0]):
        out[i] = transition(states[i], jerk, p)
    return out
