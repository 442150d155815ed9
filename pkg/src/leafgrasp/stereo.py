"""Pinhole stereo camera model.

Camera frame convention: x right, y down, z along the optical axis.
``StereoRig.cam_pose`` maps camera-frame points into the gantry world
frame (Z up).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

MIN_DEPTH = 0.05
MAX_DEPTH = 5.0
DISPARITY_EPS = 1e-6


def _check_rotation(R, tol=1e-9):
    if not np.allclose(R @ R.T, np.eye(3), atol=tol, rtol=0.0):
        raise InputError("cam_pose rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise InputError("cam_pose rotation must have determinant +1")


@dataclass(frozen=True, eq=False)
class StereoRig:
    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float
    width: int
    height: int
    cam_pose: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        pose = np.array(self.cam_pose, dtype=np.float64)
        if pose.shape == (16,):
            pose = pose.reshape(4, 4)
        if pose.shape != (4, 4):
            raise InputError(f"cam_pose must be 4x4, got {pose.shape}")
        if not np.allclose(pose[3], [0, 0, 0, 1], atol=1e-12):
            raise InputError("cam_pose last row must be [0, 0, 0, 1]")
        _check_rotation(pose[:3, :3])
        pose.setflags(write=False)
        object.__setattr__(self, "cam_pose", pose)
        for name in ("fx", "fy", "baseline"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InputError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InputError("principal point outside the image")

    @property
    def rotation(self):
        return self.cam_pose[:3, :3]

    @property
    def center(self):
        """Camera optical centre in world coordinates."""
        return self.cam_pose[:3, 3].copy()

    @property
    def forward(self):
        """Optical axis direction in world coordinates."""
        return self.cam_pose[:3, 2].copy()

    @property
    def shape(self):
        return (self.height, self.width)

    def to_world(self, x, y, z):
        """Camera-frame coordinates to world, scalar or array-wise.

        Written out per component (no BLAS) so scalar and vectorised callers
        produce bit-identical values.
        """
        R, t = self.cam_pose[:3, :3], self.cam_pose[:3, 3]
        wx = R[0, 0] * x + R[0, 1] * y + R[0, 2] * z + t[0]
        wy = R[1, 0] * x + R[1, 1] * y + R[1, 2] * z + t[1]
        wz = R[2, 0] * x + R[2, 1] * y + R[2, 2] * z + t[2]
        return wx, wy, wz

    def to_camera(self, wx, wy, wz):
        R, t = self.cam_pose[:3, :3], self.cam_pose[:3, 3]
        dx, dy, dz = wx - t[0], wy - t[1], wz - t[2]
        x = R[0, 0] * dx + R[1, 0] * dy + R[2, 0] * dz
        y = R[0, 1] * dx + R[1, 1] * dy + R[2, 1] * dz
        z = R[0, 2] * dx + R[1, 2] * dy + R[2, 2] * dz
        return x, y, z

    def to_dict(self):
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "baseline": float(self.baseline),
            "width": int(self.width),
            "height": int(self.height),
            "cam_pose": self.cam_pose.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                baseline=float(d["baseline"]),
                width=int(d["width"]),
                height=int(d["height"]),
                cam_pose=d.get("cam_pose", np.eye(4).tolist()),
            )
        except KeyError as exc:
            raise InputError(f"camera config missing field {exc}") from None


class DepthImage:
    """Row-major depth in metres, float32; ``0`` marks invalid pixels."""

    def __init__(self, values, rig=None):
        values = np.asarray(values)
        if values.ndim != 2:
            raise InputError("depth must be a 2-D array")
        if rig is not None and values.shape != rig.shape:
            raise InputError(
                f"depth shape {values.shape} does not match rig {rig.shape}"
            )
        values = sanitize_depth(values)
        values.setflags(write=False)
        self.values = values

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def valid(self):
        return self.values > 0

    def __repr__(self):
        return f"DepthImage({self.width}x{self.height}, valid={int(self.valid.sum())})"


def sanitize_depth(values):
    """Cast to float32 and zero anything non-finite or outside the working range."""
    v = np.array(values, dtype=np.float32)
    ok = np.isfinite(v) & (v >= np.float32(MIN_DEPTH)) & (v <= np.float32(MAX_DEPTH))
    v[~ok] = 0.0
    return v


def disparity_to_depth(rig, disparity):
    """Convert a disparity map (pixels) to metric depth via z = fx * b / d."""
    d = np.asarray(disparity, dtype=np.float64)
    if d.shape != rig.shape:
        raise InputError(f"disparity shape {d.shape} does not match rig {rig.shape}")
    if np.any(d < 0):
        raise InputError("disparity values must be non-negative")
    z = np.zeros_like(d)
    ok = d > DISPARITY_EPS
    z[ok] = rig.fx * rig.baseline / d[ok]
    return DepthImage(z, rig)


def reproject_pixel(rig, u, v, depth):
    """Back-project pixel ``(u, v)`` at ``depth`` metres into the camera frame."""
    if not depth > 0:
        raise InputError(f"invalid depth {depth!r}")
    # any point on the sensor area, i.e. within half a pixel of a pixel centre
    if not (-0.5 <= u < rig.width - 0.5 and -0.5 <= v < rig.height - 0.5):
        raise InputError(f"pixel ({u}, {v}) outside image")
    z = float(depth)
    return np.array([(u - rig.cx) * z / rig.fx, (v - rig.cy) * z / rig.fy, z])


def project_point(rig, p):
    """Project a camera-frame point to pixel coordinates (not bounds-checked)."""
    x, y, z = (float(c) for c in p)
    if not z > 0:
        raise InputError("point must lie in front of the camera (z > 0)")
    return rig.fx * x / z + rig.cx, rig.fy * y / z + rig.cy


def reproject_image(rig, depth, mask=None):
    """Back-project every valid pixel (optionally restricted to ``mask``).

    Returns ``(pixels, points_cam)``: integer ``(N, 2)`` array of ``(u, v)``
    and float ``(N, 3)`` camera-frame points.
    """
    z = depth.values
    sel = z > 0
    if mask is not None:
        sel &= mask
    v, u = np.nonzero(sel)
    zz = z[v, u].astype(np.float64)
    x = (u - rig.cx) * zz / rig.fx
    y = (v - rig.cy) * zz / rig.fy
    return np.stack([u, v], axis=1), np.stack([x, y, zz], axis=1)
