import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopmerge.dynamics import (EPS_V, EgoState, MergeGeometry, VehicleState, ego_projection,
                                propagate_ego, propagate_main_lane, time_to_merge_ego,
                                time_to_merge_main)
from coopmerge.errors import InvalidInputError

GEOM = MergeGeometry.straight(ramp_length=150.0, merge_x=0.0)

finite = st.floats(-50, 50, allow_nan=False)
speed = st.floats(0, 40, allow_nan=False)


def test_main_lane_constant_velocity():
    out = propagate_main_lane(VehicleState(x=0.0, v=10.0), 0.0, 0.1)
    assert out.v == 10.0
    assert out.x == pytest.approx(1.0, abs=1e-12)


def test_main_lane_standstill_no_reverse():
    out = propagate_main_lane(VehicleState(x=5.0, v=0.0), -2.0, 0.1)
    assert (out.x, out.v, out.vdot) == (5.0, 0.0, 0.0)


def test_main_lane_accelerating_hand_value():
    out = propagate_main_lane(VehicleState(x=0.0, v=10.0), 2.0, 0.1)
    assert out.v == pytest.approx(10.2, abs=1e-12)
    assert out.x == pytest.approx(1.01, abs=1e-12)
    assert out.vdot == 2.0


def test_main_lane_stops_at_end_of_braking_parabola():
    out = propagate_main_lane(VehicleState(x=0.0, v=0.3), -6.0, 0.1)
    assert out.v == 0.0
    assert out.x == pytest.approx(0.3 ** 2 / 12.0)


def test_main_lane_keeps_lateral_fields():
    out = propagate_main_lane(VehicleState(x=0.0, v=3.0, y=1.5, theta=0.2), 1.0, 0.1)
    assert (out.y, out.theta) == (1.5, 0.2)


@pytest.mark.parametrize("bad", [dict(accel=math.nan, dt=0.1), dict(accel=0.0, dt=math.inf),
                                 dict(accel=0.0, dt=0.0), dict(accel=math.inf, dt=0.1)])
def test_main_lane_rejects_bad_input(bad):
    with pytest.raises(InvalidInputError):
        propagate_main_lane(VehicleState(x=0.0, v=1.0), bad["accel"], bad["dt"])


def test_vehicle_state_rejects_nan_and_negative_speed():
    with pytest.raises(InvalidInputError):
        VehicleState(x=math.nan, v=1.0)
    with pytest.raises(InvalidInputError):
        VehicleState(x=0.0, v=-1.0)


def test_ego_coasting():
    out = propagate_ego(EgoState(s=0.0, v=10.0), 0.0, 0.1)
    assert (out.s, out.v, out.vdot) == (pytest.approx(1.0), 10.0, 0.0)


def test_ego_jerk_single_step():
    out = propagate_ego(EgoState(s=0.0, v=10.0), 0.6, 0.1)
    assert out.s == pytest.approx(1.0)
    assert out.v == 10.0
    assert out.vdot == pytest.approx(0.06, abs=1e-15)


def test_ego_no_motion_below_standstill():
    out = propagate_ego(EgoState(s=0.0, v=0.0, vdot=-1.0), 0.0, 0.1)
    assert (out.s, out.v) == (0.0, 0.0)
    assert out.vdot == 0.0  # braking is released once stopped


def test_ego_acceleration_is_clamped():
    assert propagate_ego(EgoState(s=0.0, v=5.0, vdot=1.99), 0.6, 0.1).vdot == 2.0
    assert propagate_ego(EgoState(s=0.0, v=5.0, vdot=-3.99), -0.6, 0.1).vdot == -4.0


def test_ego_rejects_non_finite_jerk():
    with pytest.raises(InvalidInputError):
        propagate_ego(EgoState(s=0.0, v=1.0), math.nan, 0.1)


def test_ttm_examples():
    assert time_to_merge_ego(EgoState(s=150.0, v=5.0), GEOM) == 0.0
    assert time_to_merge_ego(EgoState(s=0.0, v=EPS_V), GEOM) == math.inf
    assert time_to_merge_ego(EgoState(s=50.0, v=20.0), GEOM) == 5.0
    assert time_to_merge_main(VehicleState(x=0.0, v=10.0), GEOM) == 0.0
    assert time_to_merge_main(VehicleState(x=-100.0, v=20.0), GEOM) == 5.0
    assert time_to_merge_main(VehicleState(x=-100.0, v=0.05), GEOM) == math.inf


def test_ttm_past_merge_point_is_zero():
    assert time_to_merge_ego(EgoState(s=170.0, v=3.0), GEOM) == 0.0
    assert time_to_merge_main(VehicleState(x=12.0, v=3.0), GEOM) == 0.0


def test_projection_examples():
    assert ego_projection(EgoState(s=150.0, v=4.0), GEOM).x == GEOM.merge_x
    proj = ego_projection(EgoState(s=120.0, v=12.0), GEOM)
    assert (proj.x, proj.v, proj.y) == (GEOM.merge_x - 30.0, 12.0, GEOM.main_lane_y)


def test_geometry_validation():
    with pytest.raises(InvalidInputError):
        MergeGeometry.straight(ramp_length=0.0)
    with pytest.raises(InvalidInputError):
        MergeGeometry(main_lane_y=0.0, merge_point=(0.0, 1.0))
    assert GEOM.ramp_origin == (-150.0, -3.5)


@given(x=finite, v=speed, a=st.floats(-8, 2), n=st.integers(1, 20))
def test_zero_accel_step_splitting(x, v, a, n):
    one = propagate_main_lane(VehicleState(x=x, v=v), 0.0, 1.0)
    many = VehicleState(x=x, v=v)
    for _ in range(n):
        many = propagate_main_lane(many, 0.0, 1.0 / n)
    assert many.v == one.v
    assert many.x == pytest.approx(one.x, rel=1e-12, abs=1e-9)


@given(x=finite, v=speed, a=st.floats(-1e3, 1e3), dt=st.floats(1e-3, 2.0))
def test_main_lane_speed_never_negative(x, v, a, dt):
    assert propagate_main_lane(VehicleState(x=x, v=v), a, dt).v >= 0.0


@given(s=st.floats(0, 150), v=speed, a=st.floats(-4, 2), j=st.floats(-0.6, 0.6))
def test_ego_speed_never_negative(s, v, a, j):
    out = propagate_ego(EgoState(s=s, v=v, vdot=a), j, 0.1)
    assert out.v >= 0.0 and -4.0 <= out.vdot <= 2.0


@given(v=st.floats(0.2, 40), r1=st.floats(0.1, 150), r2=st.floats(0.1, 150))
def test_ttm_monotone_in_remaining_distance(v, r1, r2):
    t1 = time_to_merge_ego(EgoState(s=150.0 - r1, v=v), GEOM)
    t2 = time_to_merge_ego(EgoState(s=150.0 - r2, v=v), GEOM)
    if r1 < r2:
        assert t1 < t2


@given(s=st.floats(0, 150), v=st.floats(0.11, 40))
def test_projection_ttm_consistency(s, v):
    ego = EgoState(s=s, v=v)
    assert time_to_merge_main(ego_projection(ego, GEOM), GEOM) == pytest.approx(
        time_to_merge_ego(ego, GEOM), rel=1e-12, abs=1e-12)
