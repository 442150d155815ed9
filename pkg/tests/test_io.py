import json
import os

import numpy as np
import pytest

from leafgrasp.errors import InputError
from leafgrasp.io import (
    Scene,
    load_manifest,
    read_camera,
    read_pfm,
    read_png,
    write_camera,
    write_pfm,
    write_png16,
    write_scene,
)
from leafgrasp.stereo import DepthImage

from conftest import down_rig


def test_pfm_round_trip_and_bytes(tmp_path):
    a = np.arange(12, dtype=np.float32).reshape(3, 4) / 7
    p = tmp_path / "a.pfm"
    write_pfm(p, a)
    raw = p.read_bytes()
    assert raw.startswith(b"Pf\n4 3\n-1.0\n")
    # rows stored bottom-to-top, little-endian
    body = np.frombuffer(raw[len(b"Pf\n4 3\n-1.0\n"):], dtype="<f4").reshape(3, 4)
    assert np.array_equal(body[::-1], a)
    assert np.array_equal(read_pfm(p), a)


def test_png16_round_trip(tmp_path):
    a = np.array([[0, 1, 65535], [7, 300, 2]], dtype=np.uint16)
    write_png16(tmp_path / "a.png", a)
    assert np.array_equal(read_png(tmp_path / "a.png"), a)
    with pytest.raises(InputError):
        write_png16(tmp_path / "b.png", np.array([[70000]]))


def test_camera_round_trip(tmp_path):
    rig = down_rig()
    write_camera(tmp_path / "cam.json", rig)
    assert read_camera(tmp_path / "cam.json").to_dict() == rig.to_dict()
    d = json.loads((tmp_path / "cam.json").read_text())
    assert set(d) == {"fx", "fy", "cx", "cy", "baseline", "width", "height", "cam_pose"}


def _scene():
    rig = down_rig()
    labels = np.zeros(rig.shape, np.int64)
    labels[20:60, 30:90] = 3
    depth = DepthImage(np.where(labels > 0, 0.4321, 0.0), rig)
    return Scene("s1", rig, labels, depth, plant_center_px=(10.0, 5.0))


@pytest.mark.parametrize("fmt", ["pfm", "png"])
def test_scene_round_trip(tmp_path, fmt):
    sc = _scene()
    path = write_scene(tmp_path, sc, depth_format=fmt)
    back = load_manifest(path)
    assert back.scene_id == "s1"
    assert np.array_equal(back.labels, sc.labels)
    tol = 0 if fmt == "pfm" else 1e-4
    assert np.max(np.abs(back.depth.values - sc.depth.values)) <= tol
    assert back.plant_center_px == (10.0, 5.0)
    if fmt == "pfm":
        assert back.digest == sc.digest


def test_disparity_manifest(tmp_path):
    rig = down_rig()
    disp = np.zeros(rig.shape, np.float32)
    disp[10:20, 10:20] = rig.fx * rig.baseline / 0.5
    write_pfm(tmp_path / "disp.pfm", disp)
    write_png16(tmp_path / "labels.png", (disp > 0).astype(np.uint16))
    write_camera(tmp_path / "camera.json", rig)
    (tmp_path / "m.json").write_text(json.dumps(
        {"label_png": "labels.png", "camera_json": "camera.json", "disparity_file": "disp.pfm"}))
    sc = load_manifest(tmp_path / "m.json")
    assert sc.depth.values[15, 15] == pytest.approx(0.5, abs=1e-6)
    assert sc.scene_id == "m"


def test_manifest_errors(tmp_path):
    path = write_scene(tmp_path, _scene())
    os.remove(tmp_path / "depth.pfm")
    with pytest.raises(InputError, match="not found"):
        load_manifest(path)
    with pytest.raises(InputError):
        load_manifest(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text(json.dumps({"label_png": "labels.png"}))
    with pytest.raises(InputError, match="camera_json"):
        load_manifest(tmp_path / "bad.json")
    (tmp_path / "png.json").write_text(json.dumps(
        {"label_png": "labels.png", "camera_json": "camera.json", "depth_file": "labels.png"}))
    with pytest.raises(InputError, match="depth_scale"):
        load_manifest(tmp_path / "png.json")
