"""Overlay images for plan reports. All drawing is integer and deterministic."""

import colorsys
import os

import cv2
import numpy as np
from PIL import Image

from .errors import InputError
from .perception import build_scene_field, extract_instances
from .stereo import project_point

SDF_LIMIT_PX = 50.0
SDF_NEG = np.array([20.0, 60.0, 230.0])  # colour at -limit (deep inside a leaf)
SDF_POS = np.array([250.0, 230.0, 40.0])  # colour at +limit and beyond
GRASP_RGB = (255, 0, 0)
PRE_RGB = (255, 255, 255)
NORMAL_RGB = (0, 255, 0)


def label_color(label):
    """Stable, well separated RGB colour for a positive label."""
    h = (label * 0.618033988749895) % 1.0
    r, g, b = colorsys.hsv_to_rgb(h, 0.75, 0.95)
    return np.array([round(255 * r), round(255 * g), round(255 * b)], dtype=np.uint8)


def depth_gray(depth_values):
    d = np.asarray(depth_values, dtype=np.float64)
    out = np.zeros(d.shape + (3,), np.uint8)
    valid = d > 0
    if valid.any():
        lo, hi = d[valid].min(), d[valid].max()
        g = np.full(d.shape, 200.0) if hi <= lo else 230.0 - 180.0 * (d - lo) / (hi - lo)
        out[valid] = np.rint(g[valid])[:, None].astype(np.uint8)
    return out


def mask_overlay(labels, depth_values=None, alpha=0.6):
    base = depth_gray(depth_values) if depth_values is not None else np.zeros(labels.shape + (3,), np.uint8)
    out = base.astype(np.float64)
    for lab in np.unique(labels):
        if lab <= 0:
            continue
        m = labels == lab
        out[m] = (1 - alpha) * out[m] + alpha * label_color(int(lab))
    img = np.rint(out).astype(np.uint8)
    for lab in np.unique(labels):
        if lab <= 0:
            continue
        cs, _ = cv2.findContours((labels == lab).astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
        img = np.ascontiguousarray(img)
        cv2.drawContours(img, cs, -1, (255, 255, 255), 1, lineType=cv2.LINE_8)
    return img


def sdf_heatmap(sdf, limit=SDF_LIMIT_PX):
    """Affine map of the signed distance, clipped to ``[-limit, limit]``."""
    t = (np.clip(np.nan_to_num(sdf, posinf=limit, neginf=-limit), -limit, limit) + limit) / (2 * limit)
    rgb = SDF_NEG + t[..., None] * (SDF_POS - SDF_NEG)
    return np.rint(rgb).astype(np.uint8)


def _project_world(rig, p):
    pc = np.array(rig.to_camera(*np.asarray(p, dtype=float)))
    if pc[2] <= 0:
        return None
    u, v = project_point(rig, pc)
    return int(round(float(u))), int(round(float(v)))


def grasp_annotation(scene, report, candidates=None):
    """Leaf masks with the grasp pixel, pre-grasp ray and surface normal.

    The grasp marker's centre pixel is painted last so it sits exactly on
    the reported pixel.
    """
    img = np.ascontiguousarray(mask_overlay(scene.labels, scene.depth.values, alpha=0.35))
    grasp = report["grasp"]
    u, v = grasp["pixel"]
    p = np.array(grasp["point3d"])
    if candidates is not None:
        for cu, cv_ in candidates:
            cv2.circle(img, (int(cu), int(cv_)), 1, (255, 160, 160), -1, lineType=cv2.LINE_8)
    pre = _project_world(scene.rig, np.array(report["waypoints"]["pre_grasp"]["pose"])[:3, 3])
    if pre is not None:
        cv2.line(img, pre, (u, v), GRASP_RGB, 1, lineType=cv2.LINE_8)
        cv2.drawMarker(img, pre, PRE_RGB, cv2.MARKER_TILTED_CROSS, 9, 1, line_type=cv2.LINE_8)
    tip = _project_world(scene.rig, p + 0.03 * np.array(grasp["local_normal"]))
    if tip is not None:
        cv2.line(img, (u, v), tip, NORMAL_RGB, 1, lineType=cv2.LINE_8)
    cv2.drawMarker(img, (u, v), GRASP_RGB, cv2.MARKER_CROSS, 15, 1, line_type=cv2.LINE_8)
    img[v, u] = GRASP_RGB
    return img


def save_png(path, rgb):
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8)).save(path, compress_level=6)


def check_report(scene, report):
    if report.get("status") != "ok":
        raise InputError("report does not describe a successful plan")
    digest = report.get("scene_digest")
    if digest is not None and digest != scene.digest:
        raise InputError("report was produced for a different scene (digest mismatch)")
    if report.get("scene_id") != scene.scene_id:
        raise InputError(f"report scene_id {report.get('scene_id')!r} != {scene.scene_id!r}")
    leaf = report["selected_leaf"]
    u, v = report["grasp"]["pixel"]
    h, w = scene.labels.shape
    if not (0 <= u < w and 0 <= v < h) or scene.labels[v, u] != leaf:
        raise InputError("report grasp pixel is not on the selected leaf")


VIZ_FILES = ("overlay_masks.png", "overlay_sdf.png", "overlay_grasp.png")


def render_report_images(scene, report, out_dir, field=None, cfg=None):
    """Write the three overlay PNGs; returns their paths."""
    check_report(scene, report)
    if field is None:
        from .config import Config

        cfg = cfg or Config()
        instances = extract_instances(scene.labels, scene.depth, scene.rig, cfg.perception, scene.confidence)
        field = build_scene_field(instances, scene.rig, cfg.perception.voxel_size, scene.plant_center_px)
    os.makedirs(out_dir, exist_ok=True)
    images = (
        mask_overlay(scene.labels, scene.depth.values),
        sdf_heatmap(field.sdf),
        grasp_annotation(scene, report),
    )
    paths = []
    for name, img in zip(VIZ_FILES, images):
        path = os.path.join(out_dir, name)
        save_png(path, img)
        paths.append(path)
    return paths
