import json

import numpy as np
import pytest

from leafgrasp.config import Config
from leafgrasp.errors import InputError
from leafgrasp.pipeline import run_pipeline
from leafgrasp.synthetic import bench_suite, render_scene
from leafgrasp.viz import (
    GRASP_RGB,
    check_report,
    SDF_NEG,
    SDF_POS,
    grasp_annotation,
    render_report_images,
    sdf_heatmap,
)


@pytest.fixture(scope="module")
def planned():
    scene = render_scene(bench_suite(3)[2]).to_scene()
    outcome = run_pipeline(scene, Config())
    return scene, outcome, json.loads(json.dumps(outcome.report(scene.digest)))


def test_heatmap_is_affine_in_sdf():
    sdf = np.linspace(-50, 50, 101).reshape(1, -1)
    img = sdf_heatmap(sdf).astype(float)
    t = (sdf[0] + 50) / 100
    expect = SDF_NEG + t[:, None] * (SDF_POS - SDF_NEG)
    assert np.all(np.abs(img[0] - expect) <= 0.5)
    clipped = sdf_heatmap(np.array([[-1e9, 1e9, np.inf]]))
    assert np.all(clipped[0, 0] == np.rint(SDF_NEG)) and np.all(clipped[0, 1:] == np.rint(SDF_POS))


def test_grasp_marker_at_report_pixel(planned):
    scene, _, report = planned
    img = grasp_annotation(scene, report)
    u, v = report["grasp"]["pixel"]
    assert tuple(img[v, u]) == GRASP_RGB
    # the cross arms extend along the pixel's row and column
    assert tuple(img[v, u + 5]) == GRASP_RGB and tuple(img[v - 5, u]) == GRASP_RGB


def test_images_byte_identical(tmp_path, planned):
    scene, outcome, report = planned
    a = render_report_images(scene, report, tmp_path / "a", field=outcome.field)
    b = render_report_images(scene, report, tmp_path / "b")
    assert [p.rsplit("/", 1)[1] for p in a] == ["overlay_masks.png", "overlay_sdf.png", "overlay_grasp.png"]
    for pa, pb in zip(a, b):
        assert open(pa, "rb").read() == open(pb, "rb").read()


def test_mismatched_report_rejected(tmp_path, planned):
    scene, _, report = planned
    bad = dict(report, scene_digest="0" * 64)
    with pytest.raises(InputError):
        check_report(scene, bad)
    bad = dict(report, scene_id="someone_else", scene_digest=None)
    with pytest.raises(InputError):
        render_report_images(scene, bad, tmp_path)
    off = json.loads(json.dumps(report))
    off["grasp"]["pixel"] = [0, 0]
    with pytest.raises(InputError):
        render_report_images(scene, off, tmp_path)
    with pytest.raises(InputError):
        render_report_images(scene, {"status": "error"}, tmp_path)


def test_viz_cli(tmp_path, planned):
    from leafgrasp.cli import main
    from leafgrasp.io import write_scene

    scene, _, report = planned
    manifest = write_scene(tmp_path / "scene", scene)
    rpath = tmp_path / "report.json"
    rpath.write_text(json.dumps(report))
    assert main(["viz", "--manifest", manifest, "--report", str(rpath), "--out-dir", str(tmp_path / "img")]) == 0
    assert (tmp_path / "img" / "overlay_sdf.png").exists()
    rpath.write_text("not json")
    assert main(["viz", "--manifest", manifest, "--report", str(rpath)]) == 2
