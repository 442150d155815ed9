"""3P3R gantry kinematics: prismatic X/Y/Z carriage plus a ZYX wrist.

Tool convention: with all wrist angles at zero the microneedle points
straight down (approach along world -Z) and the gripper jaws close along
world X.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, WorkspaceError

AXES = ("x", "y", "z", "yaw", "pitch", "roll")


@dataclass(frozen=True, eq=False)
class GantryModel:
    x_travel: tuple = (0.0, 3.0)
    y_travel: tuple = (0.0, 1.5)
    z_travel: tuple = (0.0, 1.0)
    yaw_limits: tuple = (-math.pi, math.pi)
    pitch_limits: tuple = (-math.pi / 2, math.pi / 2)
    roll_limits: tuple = (-math.pi, math.pi)
    tool_offset: np.ndarray = field(default_factory=lambda: np.eye(4))
    v_max: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    a_max: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    speed_fraction: float = 0.2

    def __post_init__(self):
        for name in ("x_travel", "y_travel", "z_travel", "yaw_limits", "pitch_limits", "roll_limits"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise InputError(f"{name} bounds must be ordered")
            object.__setattr__(self, name, (float(lo), float(hi)))
        off = np.array(self.tool_offset, dtype=np.float64).reshape(4, 4)
        R = off[:3, :3]
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(R) - 1) > 1e-9:
            raise InputError("tool_offset must be a rigid transform")
        off.setflags(write=False)
        object.__setattr__(self, "tool_offset", off)
        for name in ("v_max", "a_max"):
            vals = tuple(float(x) for x in getattr(self, name))
            if len(vals) != 6 or min(vals) <= 0:
                raise InputError(f"{name} needs 6 positive entries")
            object.__setattr__(self, name, vals)
        if not 0 < self.speed_fraction <= 1:
            raise InputError("speed_fraction must be in (0, 1]")

    @property
    def limits(self):
        return (
            self.x_travel, self.y_travel, self.z_travel,
            self.yaw_limits, self.pitch_limits, self.roll_limits,
        )

    @property
    def xyz_lower(self):
        return np.array([self.x_travel[0], self.y_travel[0], self.z_travel[0]])

    @property
    def xyz_upper(self):
        return np.array([self.x_travel[1], self.y_travel[1], self.z_travel[1]])

    @property
    def diagonal(self):
        return float(np.linalg.norm(self.xyz_upper - self.xyz_lower))

    @property
    def velocity_caps(self):
        return np.array(self.v_max) * self.speed_fraction

    @property
    def acceleration_caps(self):
        return np.array(self.a_max) * self.speed_fraction

    def check(self, q, tol=1e-12):
        """Raise ``WorkspaceError`` naming the first joint outside its range."""
        for axis, value, (lo, hi) in zip(AXES, np.asarray(q, dtype=float), self.limits):
            if not lo - tol <= value <= hi + tol:
                raise WorkspaceError(axis, value, (lo, hi))

    def contains(self, q):
        try:
            self.check(q)
        except WorkspaceError:
            return False
        return True

    def to_dict(self):
        return {
            "x_travel": list(self.x_travel),
            "y_travel": list(self.y_travel),
            "z_travel": list(self.z_travel),
            "yaw_limits": list(self.yaw_limits),
            "pitch_limits": list(self.pitch_limits),
            "roll_limits": list(self.roll_limits),
            "tool_offset": self.tool_offset.tolist(),
            "v_max": list(self.v_max),
            "a_max": list(self.a_max),
            "speed_fraction": self.speed_fraction,
        }


@dataclass(frozen=True)
class JointState:
    x: float
    y: float
    z: float
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    @property
    def q(self):
        return np.array([self.x, self.y, self.z, self.yaw, self.pitch, self.roll])

    @property
    def xyz(self):
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, q):
        return cls(*(float(c) for c in q))

    def to_list(self):
        return [float(c) for c in self.q]


def rot_zyx(yaw, pitch, roll):
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def euler_zyx(R, singular_tol=1e-9):
    """ZYX angles of ``R``; at pitch = +-90 deg yaw is pinned to 0."""
    cp = math.hypot(R[0, 0], R[1, 0])
    pitch = math.atan2(-R[2, 0], cp)
    if cp < singular_tol:
        if R[2, 0] < 0:
            return 0.0, math.pi / 2, math.atan2(R[0, 1], R[1, 1])
        return 0.0, -math.pi / 2, math.atan2(-R[0, 1], R[1, 1])
    return math.atan2(R[1, 0], R[0, 0]), pitch, math.atan2(R[2, 1], R[2, 2])


def pose_matrix(position, R=None):
    T = np.eye(4)
    T[:3, 3] = position
    if R is not None:
        T[:3, :3] = R
    return T


def forward_kinematics(q, model):
    """Tool-tip pose (4x4, world frame) for joint vector ``q``."""
    q = q.q if isinstance(q, JointState) else np.asarray(q, dtype=float)
    flange = pose_matrix(q[:3], rot_zyx(q[3], q[4], q[5]))
    return flange @ model.tool_offset


def gantry_ik(pose, model):
    """Joint state placing the tool tip at ``pose`` (4x4, world frame)."""
    pose = np.asarray(pose, dtype=np.float64)
    off = model.tool_offset
    R_flange = pose[:3, :3] @ off[:3, :3].T
    p_flange = pose[:3, 3] - R_flange @ off[:3, 3]
    yaw, pitch, roll = euler_zyx(R_flange)
    q = np.array([*p_flange, yaw, pitch, roll])
    model.check(q)
    return JointState.from_array(q)


@dataclass(frozen=True)
class WaypointConfig:
    pre_grasp_offset: float = 0.05
    contact_interference: float = 0.005


@dataclass(frozen=True, eq=False)
class Waypoints:
    pre_grasp: np.ndarray
    grasp: np.ndarray
    retreat: np.ndarray
    joints: tuple  # JointState for pre_grasp, grasp, retreat

    def to_dict(self):
        names = ("pre_grasp", "grasp", "retreat")
        return {
            name: {"pose": pose.tolist(), "joints": js.to_list()}
            for name, pose, js in zip(names, (self.pre_grasp, self.grasp, self.retreat), self.joints)
        }


def jaw_yaw_from_cloud(cloud):
    """Yaw that lines the jaw axis up with the leaf's horizontal minor axis."""
    xy = np.asarray(cloud, dtype=float)[:, :2]
    if len(xy) < 2:
        return 0.0
    c = xy - xy.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    minor = vt[-1]
    yaw = math.atan2(minor[1], minor[0])
    if yaw <= -math.pi / 2:
        yaw += math.pi
    elif yaw > math.pi / 2:
        yaw -= math.pi
    return yaw


def make_waypoints(grasp, model, cfg=WaypointConfig(), jaw_yaw=0.0):
    """Pre-grasp, grasp and retreat tool poses for a top-down approach.

    ``grasp`` is a ``GraspCandidate`` or a bare 3-vector surface point.
    """
    p = np.asarray(getattr(grasp, "point3d", grasp), dtype=np.float64)
    R = rot_zyx(jaw_yaw, 0.0, 0.0)
    pre = pose_matrix(p + np.array([0.0, 0.0, cfg.pre_grasp_offset]), R)
    down = pose_matrix(np.array([p[0], p[1], p[2] - cfg.contact_interference]), R)
    z_pre = pre[2, 3]
    lo, hi = model.z_travel
    if not lo <= z_pre <= hi:
        raise WorkspaceError("z", z_pre, model.z_travel)
    q_pre = gantry_ik(pre, model)
    q_down = gantry_ik(down, model)
    return Waypoints(pre_grasp=pre, grasp=down, retreat=pre.copy(), joints=(q_pre, q_down, q_pre))
