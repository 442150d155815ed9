import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from leafgrasp.edt import boundary_pixels, distance_transform, signed_distance, squared_edt
from leafgrasp.oracle import brute_boundary, brute_distance_transform


def test_single_pixel_345():
    m = np.zeros((10, 10), bool)
    m[1, 1] = True
    d = distance_transform(m, "outside")
    assert d[1 + 4, 1 + 3] == 5.0
    assert d[1, 1] == 0.0


def test_square_center_is_ten():
    m = np.zeros((25, 25), bool)
    m[2:23, 2:23] = True
    d = distance_transform(m, "inside")
    assert d[12, 12] == 10.0
    assert d[2, 12] == 0.0  # boundary pixel
    assert d[0, 0] == 0.0  # background


def test_inside_positive_strictly_inside():
    m = np.zeros((30, 30), bool)
    m[5:25, 3:20] = True
    d = distance_transform(m, "inside")
    b = boundary_pixels(m)
    assert np.all(d[b] == 0)
    assert np.all(d[m & ~b] > 0)


def test_full_and_empty_masks():
    full = np.ones((7, 9), bool)
    d = distance_transform(full, "inside")
    # image edge pixels count as boundary
    assert d[0, 4] == 0 and d[3, 4] == 3.0
    assert np.all(distance_transform(full, "outside") == 0)
    empty = np.zeros((7, 9), bool)
    assert np.all(np.isinf(distance_transform(empty, "outside")))
    assert np.all(distance_transform(empty, "inside") == 0)
    assert np.all(np.isinf(signed_distance(empty)))


def test_bad_side():
    with pytest.raises(ValueError):
        distance_transform(np.ones((3, 3), bool), "sideways")


def test_squared_edt_matches_brute():
    rng = np.random.default_rng(3)
    sites = rng.random((20, 31)) < 0.05
    sites[0, 0] = True
    d2 = squared_edt(sites)
    ys, xs = np.nonzero(sites)
    v, u = np.mgrid[0:20, 0:31]
    brute = ((v[..., None] - ys) ** 2 + (u[..., None] - xs) ** 2).min(axis=-1)
    assert np.array_equal(d2, brute)


masks = arrays(bool, st.tuples(st.integers(1, 24), st.integers(1, 24)))


@settings(max_examples=80, deadline=None)
@given(masks)
def test_boundary_matches_brute(m):
    assert np.array_equal(boundary_pixels(m), brute_boundary(m))


@settings(max_examples=80, deadline=None)
@given(masks, st.sampled_from(["inside", "outside"]))
def test_distance_matches_brute(m, side):
    assert np.array_equal(distance_transform(m, side), brute_distance_transform(m, side))


@settings(max_examples=40, deadline=None)
@given(masks.filter(lambda m: m.any() and not m.all()), st.data())
def test_sdf_one_lipschitz(m, data):
    sdf = signed_distance(m)
    h, w = m.shape
    for _ in range(10):
        a = (data.draw(st.integers(0, h - 1)), data.draw(st.integers(0, w - 1)))
        b = (data.draw(st.integers(0, h - 1)), data.draw(st.integers(0, w - 1)))
        dist = np.hypot(a[0] - b[0], a[1] - b[1])
        assert abs(sdf[a] - sdf[b]) <= dist + 1.0 + 1e-9
