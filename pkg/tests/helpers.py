"""Scene builders shared by the tests."""

import numpy as np

from coopmerge import _kernels as K
from coopmerge.dynamics import EgoState, VehicleState
from coopmerge.pomdp import MergePOMDP, SceneState

MODEL = MergePOMDP()


def conflict_scene(c=0.0, dist=150.0, lead_ahead=0.4, v=15.0, lead_gap=120.0):
    """Equal speeds, ego projection ``lead_ahead`` seconds ahead of the trailing car."""
    L = MODEL.geometry.ramp_length
    remaining = dist - v * lead_ahead
    return SceneState(ego=EgoState(s=L - remaining, v=v),
                      trailing=VehicleState(x=-dist, v=v),
                      lead=VehicleState(x=-dist + lead_gap, v=v), c_T=c)


def roll_truth(scene, steps, model=MODEL, jerk=0.0):
    """Noise-free trajectory of the true scene under a constant ego jerk."""
    vec = model.to_vector(scene)
    out = [vec]
    for _ in range(steps):
        vec = K.transition(vec, jerk, model.params)
        out.append(vec)
    return out


def wrong_class_mass(ps, state, model=MODEL):
    """Particle mass whose C-IDM branch differs from the true one at ``state``."""
    p = model.params
    truth = K.cidm_leader(state, p)[3]
    mass = 0.0
    for row, w in zip(ps.states, ps.weights):
        probe = state.copy()
        probe[K.COOP] = row[K.COOP]
        if K.cidm_leader(probe, p)[3] != truth:
            mass += w
    return mass


def ttm_ratio(vec, model=MODEL):
    p = model.params
    te = K.time_to_merge(p[K.P_RAMP_LEN] - vec[K.EGO_S], vec[K.EGO_V], p[K.P_EPS_V])
    tt = K.time_to_merge(p[K.P_MERGE_X] - vec[K.TR_X], vec[K.TR_V], p[K.P_EPS_V])
    return te / tt


__all__ = ["MODEL", "conflict_scene", "roll_truth", "wrong_class_mass", "ttm_ratio", "np"]
