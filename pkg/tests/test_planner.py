import time

import numpy as np
import pytest

from leafgrasp.errors import InputError, PlanningError
from leafgrasp.motion.gantry import GantryModel, JointState
from leafgrasp.motion.planner import (
    CollisionModel,
    InvalidEndpointError,
    PlannerParams,
    plan_path,
)
from leafgrasp.perception import SceneField

from mazes import wall

MODEL = GantryModel()
PARAMS = PlannerParams()
FINE = PARAMS.longest_valid_segment_fraction * MODEL.diagonal / 10


def _revalidate(result, obstacles):
    pts = [w.xyz for w in result.waypoints]
    return all(obstacles.motion_valid(a, b, FINE) for a, b in zip(pts, pts[1:]))


def test_params_validation():
    with pytest.raises(InputError):
        PlannerParams(longest_valid_segment_fraction=0.0)
    with pytest.raises(InputError):
        PlannerParams(longest_valid_segment_fraction=1.5)
    with pytest.raises(InputError):
        PlannerParams(attempts=0)


def test_empty_occupancy_is_straight_line():
    q_s, q_g = JointState(0.2, 0.2, 0.5), JointState(2.8, 1.3, 0.3, 0.4)
    res = plan_path(q_s, q_g, CollisionModel(np.zeros((0, 3))), PARAMS, MODEL)
    assert res.straight_line and len(res.waypoints) == 2
    assert res.waypoints[0] == q_s and res.waypoints[-1] == q_g
    assert res.resolution == pytest.approx(0.01 * MODEL.diagonal)


def test_wall_with_gap():
    obstacles = CollisionModel(wall(1.5, gap=(0.6, 0.9)), model=MODEL)
    q_s, q_g = JointState(0.5, 0.2, 0.4), JointState(2.5, 0.25, 0.4)
    res = plan_path(q_s, q_g, obstacles, PARAMS, MODEL, trial_id=3)
    assert not res.straight_line
    assert _revalidate(res, obstacles)
    xyz = np.array([w.xyz for w in res.waypoints])
    crossing = next(i for i in range(len(xyz) - 1) if (xyz[i, 0] - 1.5) * (xyz[i + 1, 0] - 1.5) <= 0)
    a, b = xyz[crossing], xyz[crossing + 1]
    y = a[1] + (1.5 - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
    assert 0.6 < y < 0.9


def test_deterministic_per_trial():
    obstacles = CollisionModel(wall(1.5, gap=(0.6, 0.9)), model=MODEL)
    q_s, q_g = JointState(0.5, 0.2, 0.4), JointState(2.5, 0.25, 0.4)
    a = plan_path(q_s, q_g, obstacles, PARAMS, MODEL, trial_id=7)
    b = plan_path(q_s, q_g, obstacles, PARAMS, MODEL, trial_id=7)
    assert [w.to_list() for w in a.waypoints] == [w.to_list() for w in b.waypoints]


def test_wrist_interpolated_along_path():
    obstacles = CollisionModel(wall(1.5, gap=(0.6, 0.9)), model=MODEL)
    q_s, q_g = JointState(0.5, 0.2, 0.4, 0.0), JointState(2.5, 0.25, 0.4, 1.0)
    res = plan_path(q_s, q_g, obstacles, PARAMS, MODEL, trial_id=1)
    yaws = [w.yaw for w in res.waypoints]
    assert yaws[0] == 0.0 and yaws[-1] == 1.0
    assert all(a <= b for a, b in zip(yaws, yaws[1:]))


def test_goal_in_collision():
    obstacles = CollisionModel(np.array([[2.0, 1.0, 0.3]]), model=MODEL)
    with pytest.raises(InvalidEndpointError):
        plan_path(JointState(0.5, 0.5, 0.5), JointState(2.0, 1.0, 0.3), obstacles, PARAMS, MODEL)
    with pytest.raises(InvalidEndpointError):
        plan_path(JointState(0.5, 0.5, 0.5), JointState(3.5, 1.0, 0.3), obstacles, PARAMS, MODEL)


def test_capsule_geometry():
    cm = CollisionModel(np.array([[1.0, 1.0, 0.5]]), radius=0.03, length=0.25)
    assert not cm.valid([1.0, 1.0, 0.4])[0]  # obstacle beside the shaft
    assert not cm.valid([1.0, 1.0, 0.52])[0]  # just above the tip
    assert cm.valid([1.0, 1.0, 0.54])[0]
    assert cm.valid([1.0, 1.0, 0.2])[0]  # shaft top at 0.45
    assert cm.valid([1.04, 1.0, 0.4])[0]


def test_exempt_voxels_are_ignored():
    occ = np.zeros((4, 4, 4), bool)
    occ[1, 1, 1] = True
    field = SceneField(sdf=None, union_mask=None, labels=None, occupancy=occ,
                       origin=np.array([1.0, 1.0, 0.2]), voxel_size=0.01)
    tip = field.voxel_centers()[0]
    assert not CollisionModel.from_field(field, PARAMS, MODEL).valid(tip)[0]
    assert CollisionModel.from_field(field, PARAMS, MODEL, exempt=occ).valid(tip)[0]


def test_failure_within_budget():
    obstacles = CollisionModel(wall(1.5), model=MODEL)
    params = PlannerParams(planning_time=1.0)
    t0 = time.monotonic()
    with pytest.raises(PlanningError) as e:
        plan_path(JointState(0.5, 0.2, 0.4), JointState(2.5, 1.3, 0.4), obstacles, params, MODEL)
    assert time.monotonic() - t0 < 1.5
    assert e.value.exit_code == 6 and not isinstance(e.value, InvalidEndpointError)


def test_swept_check_matches_dense_sampling():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(500):
        obstacles = CollisionModel(rng.uniform(0, 1, size=(5, 3)), model=MODEL)
        a, b = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
        if rng.random() < 0.3:
            b[:2] = a[:2]  # vertical moves have no interior stationary point
        if not obstacles.valid(np.stack([a, b])).all():
            continue
        assert obstacles.motion_valid(a, b) == obstacles.motion_valid(a, b, 1e-4)
        checked += 1
    assert checked > 100


def test_swept_check_catches_voxel_between_samples():
    # a voxel centred between two coarse samples, 29 mm from the tool axis
    obstacles = CollisionModel(np.array([[1.0175, 0.529, 0.3]]), model=MODEL)
    a, b = np.array([1.0, 0.5, 0.2]), np.array([1.035, 0.5, 0.2])
    assert obstacles.motion_valid(a, b, 0.035)
    assert not obstacles.motion_valid(a, b)
