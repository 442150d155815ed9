"""Readers and writers for the on-disk scene formats.

See ``docs/formats.md`` for the byte-level layout of each file.
"""

import hashlib
import json
import os
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image

from .errors import InputError
from .stereo import DepthImage, StereoRig, disparity_to_depth

_PFM_HEADER = re.compile(rb"^(P[Ff])\s+(\d+)\s+(\d+)\s+(-?[0-9.eE+-]+)\s")


def write_pfm(path, array):
    """Grayscale little-endian PFM, rows stored bottom-to-top."""
    a = np.asarray(array, dtype="<f4")
    if a.ndim != 2:
        raise InputError("PFM writer expects a 2-D array")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        fh.write(np.ascontiguousarray(a[::-1]).tobytes())


def read_pfm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    m = _PFM_HEADER.match(data)
    if not m:
        raise InputError(f"{path}: not a PFM file")
    kind, w, h, scale = m.group(1), int(m.group(2)), int(m.group(3)), float(m.group(4))
    channels = 3 if kind == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    body = data[m.end():]
    n = w * h * channels
    if len(body) < 4 * n:
        raise InputError(f"{path}: truncated PFM payload")
    a = np.frombuffer(body[: 4 * n], dtype=dtype).reshape(h, w, channels)[::-1, :, 0]
    return a.astype(np.float32)


def write_png16(path, array):
    a = np.asarray(array)
    if a.min(initial=0) < 0 or a.max(initial=0) > 65535:
        raise InputError("values do not fit in a 16-bit PNG")
    Image.fromarray(a.astype(np.uint16)).save(path, format="PNG")


def read_png(path):
    try:
        with Image.open(path) as img:
            a = np.array(img)
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: cannot read PNG ({exc})") from None
    if a.ndim == 3:
        a = a[..., 0]
    return a


def read_camera(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return StereoRig.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: cannot read camera config ({exc})") from None


def write_camera(path, rig):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rig.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class Scene:
    scene_id: str
    rig: StereoRig
    labels: np.ndarray
    depth: DepthImage
    confidence: Optional[np.ndarray] = None
    plant_center_px: Optional[tuple] = None

    @property
    def digest(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.labels, dtype="<u2").tobytes())
        h.update(np.ascontiguousarray(self.depth.values, dtype="<f4").tobytes())
        return h.hexdigest()


def _load_raster(base, manifest, key, scale_key):
    path = os.path.join(base, manifest[key])
    if not os.path.exists(path):
        raise InputError(f"{key}: file not found: {path}")
    if path.lower().endswith(".pfm"):
        return read_pfm(path).astype(np.float64)
    if path.lower().endswith(".png"):
        if scale_key not in manifest:
            raise InputError(f"{key} is a PNG but manifest has no {scale_key}")
        return read_png(path).astype(np.float64) * float(manifest[scale_key])
    raise InputError(f"{key}: unsupported format {path}")


def load_manifest(path):
    """Load a scene manifest and every file it references."""
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: cannot read manifest ({exc})") from None
    base = os.path.dirname(os.path.abspath(path))
    for key in ("label_png", "camera_json"):
        if key not in manifest:
            raise InputError(f"manifest missing {key!r}")
    rig = read_camera(os.path.join(base, manifest["camera_json"]))

    label_path = os.path.join(base, manifest["label_png"])
    if not os.path.exists(label_path):
        raise InputError(f"label_png: file not found: {label_path}")
    labels = read_png(label_path).astype(np.int64)
    if labels.shape != rig.shape:
        raise InputError(f"label image shape {labels.shape} != camera {rig.shape}")

    if "depth_file" in manifest:
        depth = DepthImage(_load_raster(base, manifest, "depth_file", "depth_scale"), rig)
    elif "disparity_file" in manifest:
        disp = _load_raster(base, manifest, "disparity_file", "disparity_scale")
        depth = disparity_to_depth(rig, disp)
    else:
        raise InputError("manifest needs depth_file or disparity_file")

    confidence = None
    if manifest.get("confidence_png"):
        cpath = os.path.join(base, manifest["confidence_png"])
        if not os.path.exists(cpath):
            raise InputError(f"confidence_png: file not found: {cpath}")
        raw = read_png(cpath)
        confidence = raw.astype(np.float64) / (65535.0 if raw.dtype == np.uint16 else 255.0)
        if confidence.shape != rig.shape:
            raise InputError("confidence map shape does not match camera")

    center = manifest.get("plant_center_px")
    return Scene(
        scene_id=str(manifest.get("scene_id", os.path.splitext(os.path.basename(path))[0])),
        rig=rig,
        labels=labels,
        depth=depth,
        confidence=confidence,
        plant_center_px=tuple(float(c) for c in center) if center is not None else None,
    )


def write_scene(out_dir, scene, depth_format="pfm", depth_scale=1e-4):
    """Write ``scene`` as manifest + label PNG + depth raster + camera JSON."""
    os.makedirs(out_dir, exist_ok=True)
    write_camera(os.path.join(out_dir, "camera.json"), scene.rig)
    write_png16(os.path.join(out_dir, "labels.png"), scene.labels)
    manifest = {
        "scene_id": scene.scene_id,
        "camera_json": "camera.json",
        "label_png": "labels.png",
    }
    if depth_format == "pfm":
        write_pfm(os.path.join(out_dir, "depth.pfm"), scene.depth.values)
        manifest["depth_file"] = "depth.pfm"
    elif depth_format == "png":
        counts = np.rint(scene.depth.values.astype(np.float64) / depth_scale)
        write_png16(os.path.join(out_dir, "depth.png"), counts)
        manifest["depth_file"] = "depth.png"
        manifest["depth_scale"] = depth_scale
    else:
        raise InputError(f"unknown depth format {depth_format!r}")
    if scene.plant_center_px is not None:
        manifest["plant_center_px"] = [float(c) for c in scene.plant_center_px]
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
