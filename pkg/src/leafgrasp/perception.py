"""Per-leaf 3D reconstruction from an instance label image and a depth map,
plus the scene-level signed distance field and occupancy grid."""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np

from .edt import distance_transform, signed_distance
from .errors import DegeneratePatchError
from .stereo import reproject_image

log = logging.getLogger(__name__)


class LeafDroppedWarning(UserWarning):
    """A labelled region was discarded during instance extraction."""


@dataclass(frozen=True)
class PerceptionConfig:
    min_area_px: int = 100
    voxel_size: float = 0.005
    normal_radius_px: float = 15.0


@dataclass(eq=False)
class LeafInstance:
    id: int
    mask: np.ndarray
    contour: np.ndarray  # (K, 2) ordered (u, v) boundary pixels of the largest part
    hull_points: np.ndarray  # (M, 2) boundary pixels of every part
    area_px: int
    pixels: np.ndarray  # (N, 2) (u, v) of valid-depth mask pixels
    cloud: np.ndarray  # (N, 3) world frame, metres
    centroid3d: np.ndarray
    centroid_cam: np.ndarray
    mean_normal: np.ndarray
    planarity: float
    inside_dt: np.ndarray
    confidence: Optional[float] = None

    @property
    def centroid_px(self):
        v, u = np.nonzero(self.mask)
        return float(u.mean()), float(v.mean())


@dataclass(eq=False)
class SceneField:
    sdf: np.ndarray  # pixels; negative inside leaves, +inf when nothing is present
    union_mask: np.ndarray
    labels: np.ndarray
    occupancy: np.ndarray  # bool (nx, ny, nz)
    origin: np.ndarray  # world position of voxel (0, 0, 0)'s lower corner
    voxel_size: float
    plant_center_px: Optional[tuple] = None

    def voxel_index(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.floor((p - self.origin) / self.voxel_size).astype(np.int64)

    def voxel_centers(self, mask=None):
        occ = self.occupancy if mask is None else (self.occupancy & mask)
        idx = np.argwhere(occ)
        return self.origin + (idx + 0.5) * self.voxel_size

    def is_occupied(self, points):
        idx = self.voxel_index(points)
        inside = np.all((idx >= 0) & (idx < np.array(self.occupancy.shape)), axis=1)
        out = np.zeros(len(idx), dtype=bool)
        if self.occupancy.size:
            ii = idx[inside]
            out[inside] = self.occupancy[ii[:, 0], ii[:, 1], ii[:, 2]]
        return out


def canonical_normal(n):
    """Flip ``n`` into the upper hemisphere (ties broken on y, then x)."""
    n = np.asarray(n, dtype=np.float64)
    for c in (2, 1, 0):
        if n[c] != 0:
            return n if n[c] > 0 else -n
    return n


def plane_fit_normal(points):
    """Total-least-squares plane through ``points``.

    Returns ``(normal, residual)`` where ``normal`` is a unit vector in the
    upper (+Z) hemisphere and ``residual`` the RMS point-to-plane distance.
    Raises ``DegeneratePatchError`` for fewer than 3 points or a collinear set.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3 or len(p) < 3:
        raise DegeneratePatchError("plane fit needs at least 3 points")
    centered = p - p.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    scale = max(s[0], np.abs(centered).max())
    if s[0] == 0 or s[1] <= 1e-9 * scale:
        raise DegeneratePatchError("points are collinear or coincident")
    n = vt[2] / np.linalg.norm(vt[2])
    n = canonical_normal(n)
    residual = float(np.sqrt(np.mean((centered @ n) ** 2)))
    return n, residual


def _external_contours(mask):
    contours, _ = cv2.findContours(
        mask.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE
    )
    return [c.reshape(-1, 2) for c in contours]


def _crop_box(mask, pad):
    v, u = np.nonzero(mask)
    h, w = mask.shape
    return (
        max(v.min() - pad, 0),
        min(v.max() + pad + 1, h),
        max(u.min() - pad, 0),
        min(u.max() + pad + 1, w),
    )


def _inside_dt(mask):
    v0, v1, u0, u1 = _crop_box(mask, 1)
    out = np.zeros(mask.shape)
    out[v0:v1, u0:u1] = distance_transform(mask[v0:v1, u0:u1], "inside")
    return out


def build_instance(leaf_id, mask, depth, rig, cfg=PerceptionConfig(), confidence=None):
    """Build one ``LeafInstance`` or return ``None`` when it must be dropped."""
    pixels, pts_cam = reproject_image(rig, depth, mask)
    if len(pixels) < cfg.min_area_px:
        msg = f"leaf {leaf_id}: {len(pixels)} valid-depth pixels < {cfg.min_area_px}"
        log.warning(msg)
        warnings.warn(msg, LeafDroppedWarning, stacklevel=3)
        return None
    wx, wy, wz = rig.to_world(pts_cam[:, 0], pts_cam[:, 1], pts_cam[:, 2])
    cloud = np.stack([wx, wy, wz], axis=1)
    try:
        normal, resid = plane_fit_normal(cloud)
    except DegeneratePatchError as exc:
        msg = f"leaf {leaf_id}: {exc}"
        log.warning(msg)
        warnings.warn(msg, LeafDroppedWarning, stacklevel=3)
        return None
    contours = _external_contours(mask)
    contour = max(contours, key=len)
    conf = None
    if confidence is not None:
        conf = float(np.clip(confidence[mask].mean(), 0.0, 1.0))
    return LeafInstance(
        id=int(leaf_id),
        mask=mask,
        contour=contour,
        hull_points=np.concatenate(contours),
        area_px=int(mask.sum()),
        pixels=pixels,
        cloud=cloud,
        centroid3d=cloud.mean(axis=0),
        centroid_cam=pts_cam.mean(axis=0),
        mean_normal=normal,
        planarity=resid,
        inside_dt=_inside_dt(mask),
        confidence=conf,
    )


def extract_instances(label_image, depth, rig, cfg=PerceptionConfig(), confidence=None):
    """One ``LeafInstance`` per non-zero label with enough valid depth."""
    labels = np.asarray(label_image)
    if labels.shape != depth.values.shape:
        raise ValueError("label image and depth differ in size")
    instances = []
    for leaf_id in np.unique(labels):
        if leaf_id == 0:
            continue
        inst = build_instance(int(leaf_id), labels == leaf_id, depth, rig, cfg, confidence)
        if inst is not None:
            instances.append(inst)
    return instances


def visibility_ratio(instance):
    """Mask area over convex-hull area of the boundary pixels, in [0, 1]."""
    pts = np.asarray(instance.hull_points, dtype=np.float32)
    if len(pts) < 3:
        return 0.0
    hull_area = cv2.contourArea(cv2.convexHull(pts))
    if hull_area <= 0:
        return 0.0
    return float(min(1.0, instance.area_px / hull_area))


def _dilate3d(grid):
    out = grid.copy()
    nx, ny, nz = grid.shape
    p = np.pad(grid, 1)
    for dx in range(3):
        for dy in range(3):
            for dz in range(3):
                out |= p[dx:dx + nx, dy:dy + ny, dz:dz + nz]
    return out


def voxelize(points, voxel_size, origin=None, shape=None):
    """Occupancy grid of ``points`` dilated by one voxel (26-neighbourhood)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if origin is None:
        if len(pts) == 0:
            return np.zeros((0, 0, 0), bool), np.zeros(3)
        origin = (np.floor(pts.min(axis=0) / voxel_size) - 1) * voxel_size
    idx = np.floor((pts - origin) / voxel_size).astype(np.int64)
    if shape is None:
        shape = tuple(idx.max(axis=0) + 2)
    grid = np.zeros(shape, dtype=bool)
    ok = np.all((idx >= 0) & (idx < np.array(shape)), axis=1)
    grid[idx[ok, 0], idx[ok, 1], idx[ok, 2]] = True
    return _dilate3d(grid), np.asarray(origin, dtype=np.float64)


def build_scene_field(instances, rig, voxel_size=0.005, plant_center_px=None):
    """Scene SDF over the image plane and occupancy voxels of all leaf clouds."""
    shape = rig.shape
    labels = np.zeros(shape, dtype=np.int64)
    for inst in instances:
        labels[inst.mask] = inst.id
    union = labels > 0
    sdf = signed_distance(union)
    if instances:
        cloud = np.concatenate([inst.cloud for inst in instances])
        occupancy, origin = voxelize(cloud, voxel_size)
        if plant_center_px is None:
            v, u = np.nonzero(union)
            plant_center_px = (float(u.mean()), float(v.mean()))
    else:
        occupancy, origin = np.zeros((0, 0, 0), bool), np.zeros(3)
    return SceneField(
        sdf=sdf,
        union_mask=union,
        labels=labels,
        occupancy=occupancy,
        origin=origin,
        voxel_size=float(voxel_size),
        plant_center_px=None if plant_center_px is None else tuple(plant_center_px),
    )
