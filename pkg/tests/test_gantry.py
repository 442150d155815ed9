import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leafgrasp.errors import InputError, WorkspaceError
from leafgrasp.motion.gantry import (
    GantryModel,
    JointState,
    WaypointConfig,
    euler_zyx,
    forward_kinematics,
    gantry_ik,
    jaw_yaw_from_cloud,
    make_waypoints,
    pose_matrix,
    rot_zyx,
)

MODEL = GantryModel()


def test_identity_ik():
    q = gantry_ik(pose_matrix([1.0, 0.5, 0.4]), MODEL)
    assert q.to_list() == [1.0, 0.5, 0.4, 0.0, 0.0, 0.0]


def test_workspace_error_names_axis():
    with pytest.raises(WorkspaceError) as e:
        gantry_ik(pose_matrix([3.2, 0.5, 0.4]), MODEL)
    assert e.value.axis == "x" and e.value.exit_code == 5
    with pytest.raises(WorkspaceError) as e:
        gantry_ik(pose_matrix([1.0, 1.6, 0.4]), MODEL)
    assert e.value.axis == "y"


joint = st.tuples(
    st.floats(0, 3), st.floats(0, 1.5), st.floats(0, 1),
    st.floats(-3.1, 3.1), st.floats(-1.5, 1.5), st.floats(-3.1, 3.1),
)


@settings(max_examples=200, deadline=None)
@given(joint)
def test_fk_ik_round_trip(q):
    pose = forward_kinematics(q, MODEL)
    back = gantry_ik(pose, MODEL)
    assert np.allclose(forward_kinematics(back, MODEL), pose, atol=1e-9)
    assert np.allclose(back.q, q, atol=1e-9)


def test_tool_offset_round_trip():
    off = pose_matrix([0.0, 0.02, -0.1], rot_zyx(0.3, 0.0, 0.0))
    model = GantryModel(tool_offset=off)
    rng = np.random.default_rng(0)
    for _ in range(50):
        q = np.array([rng.uniform(0.5, 2.5), rng.uniform(0.3, 1.2), rng.uniform(0.3, 0.8),
                      rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-2, 2)])
        pose = forward_kinematics(q, model)
        assert np.allclose(forward_kinematics(gantry_ik(pose, model), model), pose, atol=1e-9)


def test_singular_wrist_pins_yaw():
    R = rot_zyx(0.7, math.pi / 2, 0.2)
    yaw, pitch, roll = euler_zyx(R)
    assert yaw == 0.0 and pitch == pytest.approx(math.pi / 2)
    assert np.allclose(rot_zyx(yaw, pitch, roll), R, atol=1e-9)


def test_model_validation():
    with pytest.raises(InputError):
        GantryModel(x_travel=(3.0, 0.0))
    with pytest.raises(InputError):
        GantryModel(tool_offset=np.diag([1.0, 1.0, 2.0, 1.0]))
    assert MODEL.velocity_caps.tolist() == [0.2] * 6


def test_waypoint_examples():
    wp = make_waypoints(np.array([1.0, 0.5, 0.10]), MODEL)
    assert np.allclose(wp.pre_grasp[:3, 3], (1.0, 0.5, 0.15))
    assert np.array_equal(wp.retreat, wp.pre_grasp)
    assert np.array_equal(wp.pre_grasp[:2, 3], wp.grasp[:2, 3])
    assert wp.grasp[2, 3] == pytest.approx(0.10 - WaypointConfig().contact_interference)
    q_pre, q_grasp, q_ret = wp.joints
    assert q_pre == q_ret
    assert q_pre.x == q_grasp.x and q_pre.y == q_grasp.y
    # tool axis vertical
    assert np.allclose(wp.pre_grasp[:3, 2], (0, 0, 1))


def test_waypoints_outside_travel():
    with pytest.raises(WorkspaceError) as e:
        make_waypoints(np.array([1.0, 0.5, 0.98]), MODEL)
    assert e.value.axis == "z"


def test_jaw_yaw_across_minor_axis():
    rng = np.random.default_rng(0)
    a = math.radians(30)
    major = np.array([math.cos(a), math.sin(a)])
    minor = np.array([-math.sin(a), math.cos(a)])
    xy = rng.normal(size=(500, 1)) * 0.05 * major + rng.normal(size=(500, 1)) * 0.01 * minor
    cloud = np.c_[xy, np.zeros(500)]
    yaw = jaw_yaw_from_cloud(cloud)
    assert abs(math.cos(yaw - (a + math.pi / 2))) == pytest.approx(1.0, abs=1e-3)
    assert -math.pi / 2 < yaw <= math.pi / 2
    wp = make_waypoints(np.array([1.0, 0.5, 0.2]), MODEL, jaw_yaw=yaw)
    assert wp.joints[0].yaw == pytest.approx(yaw)


def test_joint_state_round_trip():
    js = JointState(1, 2, 3, 0.1, 0.2, 0.3)
    assert JointState.from_array(js.q) == js
