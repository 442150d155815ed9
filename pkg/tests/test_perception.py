import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leafgrasp.errors import DegeneratePatchError
from leafgrasp.perception import (
    LeafDroppedWarning,
    build_scene_field,
    extract_instances,
    plane_fit_normal,
    visibility_ratio,
)
from leafgrasp.stereo import DepthImage
from leafgrasp.synthetic import LeafSpec, SceneSpec, render_scene

from conftest import down_rig, ellipse_mask, flat_depth


def _instances(labels, depth, rig):
    return extract_instances(labels, depth, rig)


def test_three_disjoint_masks():
    rig = down_rig()
    labels = np.zeros(rig.shape, np.int64)
    for k, c in enumerate([(30, 30), (90, 30), (60, 95)], start=1):
        labels[ellipse_mask(rig.shape, c, (18, 12))] = k * 10
    inst = _instances(labels, flat_depth(rig, 0.4), rig)
    assert [i.id for i in inst] == [10, 20, 30]
    for i in inst:
        assert abs(np.linalg.norm(i.mean_normal) - 1) < 1e-9
        assert np.allclose(i.centroid3d, i.cloud.mean(axis=0))


def test_fronto_parallel_normal():
    rig = down_rig()
    labels = ellipse_mask(rig.shape, (64, 64), (30, 20)).astype(np.int64)
    (inst,) = _instances(labels, flat_depth(rig, 0.4), rig)
    assert np.allclose(inst.mean_normal, (0, 0, 1), atol=1e-3)
    assert inst.planarity < 1e-6


def test_invalid_depth_leaf_dropped():
    rig = down_rig()
    labels = np.zeros(rig.shape, np.int64)
    labels[10:40, 10:40] = 1
    labels[60:100, 60:100] = 2
    depth = flat_depth(rig, 0.4, mask=labels == 2)
    with pytest.warns(LeafDroppedWarning):
        inst = _instances(labels, depth, rig)
    assert [i.id for i in inst] == [2]


def test_no_labels_is_empty():
    rig = down_rig()
    assert _instances(np.zeros(rig.shape, np.int64), flat_depth(rig, 0.4), rig) == []


def test_small_leaf_dropped():
    rig = down_rig()
    labels = np.zeros(rig.shape, np.int64)
    labels[5:10, 5:10] = 1
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert _instances(labels, flat_depth(rig, 0.4), rig) == []
    assert any(issubclass(x.category, LeafDroppedWarning) for x in w)


def test_cloud_sizes_bounded():
    rig = down_rig()
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 4, size=rig.shape)
    vals = np.where(rng.random(rig.shape) < 0.3, 0.0, 0.5)
    inst = _instances(labels, DepthImage(vals, rig), rig)
    total = sum(len(i.cloud) for i in inst)
    assert total <= int(((labels > 0) & (vals > 0)).sum())


def test_plane_fit_examples():
    rng = np.random.default_rng(1)
    xy = rng.uniform(-1, 1, (50, 2))
    n, r = plane_fit_normal(np.c_[xy, np.full(50, 0.4)])
    assert np.allclose(n, (0, 0, 1)) and r < 1e-12
    t = math.radians(30)
    # plane tilted 30 deg about x: z = y * tan(30)
    pts = np.c_[xy, xy[:, 1] * math.tan(t)]
    n, _ = plane_fit_normal(pts)
    assert np.allclose(n, (0, -0.5, math.cos(t)), atol=1e-6)
    with pytest.raises(DegeneratePatchError):
        plane_fit_normal([[0, 0, 0], [1, 1, 1], [2, 2, 2]])
    with pytest.raises(DegeneratePatchError):
        plane_fit_normal([[0, 0, 0], [1, 1, 1]])


def _rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_plane_fit_rotation_equivariant(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(40, 3)) * np.array([1.0, 0.6, 0.02])
    R = _rotation(rng)
    n0, _ = plane_fit_normal(pts)
    n1, _ = plane_fit_normal(pts @ R.T)
    m = R @ n0
    if m[2] < 0:
        m = -m
    if abs(m[2]) < 1e-6:
        return  # horizontal normal: upward canonicalisation is ambiguous
    assert np.allclose(n1, m, atol=1e-6)


def test_circle_sdf():
    rig = down_rig()
    labels = ellipse_mask(rig.shape, (64, 64), (20, 20)).astype(np.int64)
    inst = _instances(labels, flat_depth(rig, 0.4), rig)
    f = build_scene_field(inst, rig)
    assert abs(f.sdf[64, 64] + 20) <= 1
    assert abs(f.sdf[64, 64 + 30] - 10) <= 1
    # zero level set: sign change across the union boundary
    assert f.sdf[64, 84] <= 0 < f.sdf[64, 86]


def test_empty_scene_field():
    rig = down_rig()
    f = build_scene_field([], rig)
    assert np.all(np.isinf(f.sdf)) and np.all(f.sdf > 0)
    assert f.occupancy.sum() == 0


def test_cloud_points_in_occupied_voxels():
    rig = down_rig()
    spec = SceneSpec(rig, (LeafSpec((1.5, 0.75, 0.5), 0.06, 0.04, tilt=0.6, curl=4.0),))
    r = render_scene(spec)
    inst = _instances(r.labels, r.depth, rig)
    f = build_scene_field(inst, rig, voxel_size=0.005)
    assert f.is_occupied(inst[0].cloud).all()


def test_visibility_examples():
    rig = down_rig(256, 256)
    a, b = 0.08, 0.05
    r = render_scene(SceneSpec(rig, (LeafSpec((1.5, 0.75, 0.5), a, b),)))
    (full,) = _instances(r.labels, r.depth, rig)
    assert visibility_ratio(full) >= 0.98

    # a bite removing 30% of the blade, placed so the leaf outline survives
    radius = math.sqrt(0.3 * a * b)
    bitten = LeafSpec((1.5, 0.75, 0.5), a, b, occluders=((0.01, 0.0, radius),))
    rb = render_scene(SceneSpec(rig, (bitten,)))
    assert rb.truth[1].visibility == pytest.approx(0.7, abs=0.02)
    (inst,) = _instances(rb.labels, rb.depth, rig)
    assert visibility_ratio(inst) == pytest.approx(0.7, abs=0.05)

    line = np.zeros(rig.shape, np.int64)
    line[100, 20:220] = 1
    vals = 0.4 + 0.001 * np.random.default_rng(0).random(rig.shape)  # non-collinear cloud
    (ln,) = _instances(line, DepthImage(vals, rig), rig)
    assert visibility_ratio(ln) == 0.0
