"""Procedural plant scenes with analytic ground truth.

A leaf blade is the ellipse ``x^2/a^2 + y^2/b^2 <= 1`` in its own frame,
bent as ``z = curl * (x^2 + y^2)``, rotated by ``yaw`` about world Z and
tilted by ``tilt`` about an in-plane axis, then placed at ``center3d``.
Scenes are rendered by casting one ray per pixel centre and keeping the
nearest hit, so depth, labels and normals are exact up to float32 storage.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import cv2
import numpy as np

from .io import Scene
from .motion.gantry import rot_zyx
from .stereo import DepthImage, StereoRig, project_point

log = logging.getLogger(__name__)


def _axis_angle(axis, angle):
    x, y, z = axis / np.linalg.norm(axis)
    c, s = math.cos(angle), math.sin(angle)
    C = 1 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


@dataclass(frozen=True, eq=False)
class LeafSpec:
    center3d: tuple
    semi_major: float
    semi_minor: float
    yaw: float = 0.0  # heading of the major axis about world Z (rad)
    tilt: float = 0.0  # blade-plane tilt from horizontal (rad)
    tilt_axis: float = 0.0  # in-blade direction of the tilt axis (rad, blade frame)
    curl: float = 0.0  # 1/m
    petiole_dir: tuple = (-1.0, 0.0)  # blade frame, centre -> junction
    occluders: tuple = ()  # ((x, y, r), ...) discs cut from the blade, blade frame

    def __post_init__(self):
        if not (self.semi_major > 0 and self.semi_minor > 0):
            raise ValueError("semi-axes must be positive")
        if not 0 <= abs(self.tilt) < math.pi / 2:
            raise ValueError("tilt must keep the blade normal upward")
        d = np.asarray(self.petiole_dir, dtype=float)
        object.__setattr__(self, "petiole_dir", tuple(d / np.linalg.norm(d)))

    @property
    def rotation(self):
        """Blade frame -> world rotation."""
        ax = np.array([math.cos(self.tilt_axis), math.sin(self.tilt_axis), 0.0])
        return rot_zyx(self.yaw, 0.0, 0.0) @ _axis_angle(ax, self.tilt)

    @property
    def normal(self):
        """Analytic normal at the blade centre."""
        return self.rotation[:, 2].copy()

    def local_normal(self, x, y):
        n = np.array([-2 * self.curl * x, -2 * self.curl * y, 1.0])
        return self.rotation @ (n / np.linalg.norm(n))

    def surface_point(self, x, y):
        return np.asarray(self.center3d) + self.rotation @ np.array([x, y, self.curl * (x * x + y * y)])

    def junction_local(self):
        px, py = self.petiole_dir
        s = 1.0 / math.sqrt((px / self.semi_major) ** 2 + (py / self.semi_minor) ** 2)
        return s * px, s * py

    def intersect(self, origins, dirs, use_occluders=True):
        """Ray parameter of the first hit per ray (``inf`` on a miss) and the
        blade-frame hit coordinates."""
        R = self.rotation
        o = (np.asarray(origins, dtype=float) - np.asarray(self.center3d)) @ R
        d = np.asarray(dirs, dtype=float) @ R
        c = self.curl
        ox, oy, oz = o[..., 0], o[..., 1], o[..., 2]
        dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
        qa = c * (dx * dx + dy * dy)
        qb = 2 * c * (ox * dx + oy * dy) - dz
        qc = c * (ox * ox + oy * oy) - oz
        with np.errstate(divide="ignore", invalid="ignore"):
            linear = -qc / qb
            if c == 0:
                roots = [linear]
            else:
                # Cancellation-free quadratic roots; a vanishing leading term
                # (ray parallel to the bending axis) leaves the linear root.
                disc = qb * qb - 4 * qa * qc
                sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
                q = -0.5 * (qb + np.copysign(sq, qb))
                r1 = np.where(np.abs(qa) > 1e-12, q / qa, linear)
                r2 = np.where(np.abs(qa) > 1e-12, qc / q, np.nan)
                roots = [np.fmin(r1, r2), np.fmax(r1, r2)]
        best = np.full(ox.shape, np.inf)
        hx = np.zeros(ox.shape)
        hy = np.zeros(ox.shape)
        for t in reversed(roots):
            x, y = ox + t * dx, oy + t * dy
            ok = np.isfinite(t) & (t > 0)
            ok &= (x / self.semi_major) ** 2 + (y / self.semi_minor) ** 2 <= 1.0
            if use_occluders:
                for bx, by, br in self.occluders:
                    ok &= (x - bx) ** 2 + (y - by) ** 2 > br * br
            best = np.where(ok, t, best)
            hx = np.where(ok, x, hx)
            hy = np.where(ok, y, hy)
        return best, hx, hy


@dataclass(frozen=True, eq=False)
class SceneSpec:
    rig: StereoRig
    leaves: tuple
    seed: int = 0
    depth_noise_mm: float = 0.0
    mask_erosion_px: int = 0
    plant_center3d: Optional[tuple] = None
    scene_id: str = "scene"


@dataclass(eq=False)
class LeafTruth:
    leaf_id: int
    spec: LeafSpec
    normal: np.ndarray
    center3d: np.ndarray
    centroid3d: np.ndarray
    visibility: float
    junction_px: tuple
    visible_mask: np.ndarray
    full_mask: np.ndarray


@dataclass(eq=False)
class RenderedScene:
    spec: SceneSpec
    labels: np.ndarray
    depth: DepthImage
    truth: dict = field(default_factory=dict)
    clean_labels: np.ndarray = None
    clean_depth: np.ndarray = None
    plant_center_px: Optional[tuple] = None

    def to_scene(self):
        return Scene(
            scene_id=self.spec.scene_id,
            rig=self.spec.rig,
            labels=self.labels,
            depth=self.depth,
            plant_center_px=self.plant_center_px,
        )


def pixel_rays(rig):
    """World-frame origin and per-pixel direction with unit camera-z component."""
    v, u = np.mgrid[0:rig.height, 0:rig.width].astype(np.float64)
    d_cam = np.stack([(u - rig.cx) / rig.fx, (v - rig.cy) / rig.fy, np.ones_like(u)], axis=-1)
    return rig.center, d_cam @ rig.rotation.T


def render_scene(spec):
    """Rasterise ``spec``; returns a ``RenderedScene`` with ground truth."""
    rig = spec.rig
    origin, dirs = pixel_rays(rig)
    h, w = rig.shape
    zbuf = np.full((h, w), np.inf)
    labels = np.zeros((h, w), dtype=np.int64)
    hits = {}
    for k, leaf in enumerate(spec.leaves, start=1):
        t, hx, hy = leaf.intersect(origin, dirs)
        full = np.isfinite(leaf.intersect(origin, dirs, use_occluders=False)[0])
        if not np.isfinite(t).any():
            msg = f"{spec.scene_id}: leaf {k} outside the camera frustum, omitted"
            log.warning(msg)
            warnings.warn(msg, stacklevel=2)
            continue
        nearer = t < zbuf
        zbuf = np.where(nearer, t, zbuf)
        labels = np.where(nearer, k, labels)
        hits[k] = (t, full)

    depth_clean = np.where(np.isfinite(zbuf), zbuf, 0.0)
    truth = {}
    for k, (t, full) in hits.items():
        leaf = spec.leaves[k - 1]
        vis = labels == k
        pts = origin + dirs[vis] * t[vis][:, None]
        ju, jv = project_point(rig, np.array(rig.to_camera(*leaf.surface_point(*leaf.junction_local()))))
        truth[k] = LeafTruth(
            leaf_id=k,
            spec=leaf,
            normal=leaf.normal,
            center3d=np.asarray(leaf.center3d, dtype=float),
            centroid3d=pts.mean(axis=0) if len(pts) else np.full(3, np.nan),
            visibility=float(vis.sum() / full.sum()) if full.any() else 0.0,
            junction_px=(float(ju), float(jv)),
            visible_mask=vis,
            full_mask=full,
        )

    depth = depth_clean.copy()
    out_labels = labels.copy()
    rng = np.random.default_rng(spec.seed)
    if spec.depth_noise_mm > 0:
        noise = rng.normal(0.0, spec.depth_noise_mm / 1000.0, size=depth.shape)
        depth = np.where(depth > 0, depth + noise, 0.0)
    if spec.mask_erosion_px > 0:
        kernel = np.ones((3, 3), np.uint8)
        eroded = np.zeros_like(out_labels)
        for k in hits:
            m = cv2.erode((labels == k).astype(np.uint8), kernel, iterations=spec.mask_erosion_px,
                          borderType=cv2.BORDER_CONSTANT, borderValue=0)
            eroded[m.astype(bool)] = k
        out_labels = eroded

    center_px = None
    if spec.plant_center3d is not None:
        pc = np.array(rig.to_camera(*np.asarray(spec.plant_center3d, dtype=float)))
        if pc[2] > 0:
            center_px = tuple(float(c) for c in project_point(rig, pc))
    return RenderedScene(
        spec=spec,
        labels=out_labels,
        depth=DepthImage(depth, rig),
        truth=truth,
        clean_labels=labels,
        clean_depth=depth_clean,
        plant_center_px=center_px,
    )


def vertical_hit(leaf, x, y, z_top=10.0):
    """World Z where a vertical line at ``(x, y)`` meets the blade, or None."""
    t, hx, hy = leaf.intersect(np.array([[x, y, z_top]]), np.array([[0.0, 0.0, -1.0]]))
    if not np.isfinite(t[0]):
        return None
    return z_top - float(t[0]), (float(hx[0]), float(hy[0]))


BENCH_TILTS_DEG = (0, 10, 20, 30, 40, 50, 55, 60)


def bench_rig(camera_xy=(1.5, 0.75), camera_z=0.95):
    pose = np.diag([1.0, -1.0, -1.0, 1.0])
    pose[:3, 3] = [camera_xy[0], camera_xy[1], camera_z]
    return StereoRig(fx=500.0, fy=500.0, cx=319.5, cy=239.5, baseline=0.06,
                     width=640, height=480, cam_pose=pose)


def bench_suite(n_scenes=24, seed=42, depth_noise_mm=0.0, mask_erosion_px=0):
    """Deterministic family of plant scenes.

    Scene ``i`` has ``1 + i % 6`` leaves radiating from a plant centre under
    the camera. The top leaf cycles through tilts of 0-60 deg and depths of
    0.30-0.50 m, lower leaves sit 0.05-0.30 m further away, and every other
    scene packs the leaves so they overlap.
    """
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    specs = []
    for i in range(n_scenes):
        rng = np.random.default_rng([seed, i])
        cam_xy = (0.6 + 1.8 * rng.random(), 0.4 + 0.7 * rng.random())
        rig = bench_rig(cam_xy)
        cz = rig.center[2]
        n_leaves = 1 + i % 6
        overlap = i % 2 == 1
        top_tilt = math.radians(BENCH_TILTS_DEG[i % len(BENCH_TILTS_DEG)])
        top_depth = 0.30 + 0.20 * ((i * 7) % 11) / 10.0
        plant = np.array([cam_xy[0], cam_xy[1], cz - 0.85])
        phase = rng.uniform(0, 2 * math.pi)
        leaves = []
        for k in range(n_leaves):
            spread = 0.9 if overlap else 2 * math.pi / max(n_leaves, 1)
            az = phase + k * spread
            if k == 0:
                depth, tilt = top_depth, top_tilt
            else:
                depth = min(top_depth + 0.05 + 0.25 * rng.random(), 0.80)
                tilt = math.radians(rng.uniform(0, 60))
            radial = (0.02 if k == 0 else 0.07 + 0.03 * rng.random()) if overlap else 0.09
            a = (0.045 + 0.015 * rng.random())
            b = (0.6 + 0.15 * rng.random()) * a
            ctr = (plant[0] + radial * math.cos(az), plant[1] + radial * math.sin(az), cz - depth)
            leaves.append(LeafSpec(
                center3d=ctr,
                semi_major=a,
                semi_minor=b,
                yaw=az,
                tilt=tilt,
                tilt_axis=rng.uniform(0, 2 * math.pi),
                curl=float(rng.uniform(0.0, 3.0)),
                petiole_dir=(-1.0, 0.0),
            ))
        specs.append(SceneSpec(
            rig=rig,
            leaves=tuple(leaves),
            seed=int(seed * 1000 + i),
            depth_noise_mm=depth_noise_mm,
            mask_erosion_px=mask_erosion_px,
            plant_center3d=tuple(plant),
            scene_id=f"bench_{i:02d}",
        ))
    return specs
