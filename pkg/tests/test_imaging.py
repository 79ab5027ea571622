import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from drowsiness.imaging import (
    AffineMap,
    Rect,
    as_gray,
    downsample,
    hist_equalize,
    integral,
    iou,
    rect_sum,
    remap_rect,
    resize,
    rotate,
)

images = arrays(np.uint8, st.tuples(st.integers(1, 24), st.integers(1, 24)))


def test_integral_small_cases():
    ii = integral([[1, 2], [3, 4]])
    assert ii[-1, -1] == 10
    assert ii.shape == (3, 3)
    assert (integral(np.zeros((5, 7))) == 0).all()
    assert integral([[7]]).tolist() == [[0, 0], [0, 7]]


@given(images)
def test_integral_padding_and_monotone(img):
    ii = integral(img)
    assert (ii[0] == 0).all() and (ii[:, 0] == 0).all()
    assert (np.diff(ii, axis=0) >= 0).all() and (np.diff(ii, axis=1) >= 0).all()


@given(images, st.data())
def test_rect_sum_matches_slice_sum(img, data):
    h, w = img.shape
    x = data.draw(st.integers(0, w - 1))
    y = data.draw(st.integers(0, h - 1))
    rw = data.draw(st.integers(1, w - x))
    rh = data.draw(st.integers(1, h - y))
    assert rect_sum(integral(img), Rect(x, y, rw, rh)) == int(img[y : y + rh, x : x + rw].sum(dtype=np.int64))


def test_rect_sum_full_and_outside():
    ii = integral([[1, 2], [3, 4]])
    assert rect_sum(ii, Rect(0, 0, 2, 2)) == 10
    assert rect_sum(integral(np.zeros((4, 4))), Rect(1, 1, 2, 3)) == 0
    with pytest.raises(IndexError):
        rect_sum(ii, Rect(1, 1, 2, 2))


def test_as_gray_rejects_bad_input():
    with pytest.raises(ValueError):
        as_gray(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        as_gray(np.full((2, 2), 300))
    with pytest.raises(ValueError):
        integral(np.zeros((4097, 2), np.uint8))


@pytest.mark.parametrize("sf", [1, 2, 4, 6, 8])
def test_downsample_size(sf, rng):
    img = rng.integers(0, 256, (480, 640), dtype=np.uint8)
    out = downsample(img, sf)
    assert out.shape == (480 // sf, 640 // sf)
    if sf == 1:
        assert (out == img).all()


def test_downsample_values():
    assert downsample(np.full((12, 13), 77, np.uint8), 3).tolist() == [[77] * 4] * 4
    # block mean rounds half up: (1 + 2 + 1 + 2) / 4 = 1.5 -> 2
    assert downsample(np.array([[1, 2], [1, 2]], np.uint8), 2)[0, 0] == 2
    assert downsample(np.zeros((480, 640), np.uint8), 6).shape == (80, 106)
    with pytest.raises(ValueError):
        downsample(np.zeros((4, 4), np.uint8), 0)


def test_remap_rect():
    assert remap_rect(Rect(10, 12, 20, 20), 6) == Rect(60, 72, 120, 120)
    assert remap_rect(Rect(3, 4, 5, 6), 1) == Rect(3, 4, 5, 6)


def test_iou():
    a = Rect(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, Rect(20, 20, 5, 5)) == 0.0
    assert iou(a, Rect(5, 0, 10, 10)) == pytest.approx(50 / 150)


def test_rotate_identity_and_half_turn(rng):
    img = rng.integers(0, 256, (41, 41), dtype=np.uint8)
    assert (rotate(img, 0.0) == img).all()
    back = rotate(rotate(img, math.pi), math.pi)
    inner = (slice(2, -2), slice(2, -2))
    assert np.abs(back[inner].astype(int) - img[inner].astype(int)).max() <= 1


def _centroid(img):
    ys, xs = np.nonzero(img > 100)
    w = img[ys, xs].astype(float)
    return np.array([np.sum(xs * w), np.sum(ys * w)]) / w.sum()


@pytest.mark.parametrize("deg", [17, 40, -65])
def test_rotate_keeps_collinear_points_collinear(deg):
    pts = [(30, 40), (50, 50), (70, 60)]
    moved = []
    for x, y in pts:
        img = np.zeros((101, 101), np.uint8)
        img[y - 1 : y + 2, x - 1 : x + 2] = 255
        moved.append(_centroid(rotate(img, math.radians(deg))))
    moved = np.array(moved)
    expected = AffineMap.rotation(math.radians(deg), (50, 50)).apply(pts)
    assert np.abs(moved - expected).max() < 0.5
    # collinearity: distance of the middle point from the line through the ends
    d = moved[2] - moved[0]
    off = abs(d[0] * (moved[1][1] - moved[0][1]) - d[1] * (moved[1][0] - moved[0][0])) / np.hypot(*d)
    assert off < 0.5
    assert np.abs(moved[1] - (moved[0] + moved[2]) / 2).max() < 0.5


def test_affine_inverse_and_compose():
    a = AffineMap.rotation(0.3, (4, 5))
    b = AffineMap.rotation(-0.3, (4, 5))
    pts = np.array([[1.0, 2.0], [7.0, -3.0]])
    assert np.allclose(a.compose(b).apply(pts), pts)
    assert np.allclose(a.inverse().apply(a.apply(pts)), pts)
    assert np.allclose(a.matrix()[2], [0, 0, 1])


def test_hist_equalize_cases():
    const = np.full((5, 5), 99, np.uint8)
    assert (hist_equalize(const) == const).all()
    two = np.array([[50, 200] * 4] * 4, np.uint8)
    eq = hist_equalize(two)
    assert set(np.unique(eq)) == {0, 255}
    assert (eq[two == 50] == 0).all()


@settings(max_examples=50)
@given(images)
def test_hist_equalize_spans_range_and_is_idempotent(img):
    eq = hist_equalize(img)
    if len(np.unique(img)) >= 2:
        assert int(eq.max()) - int(eq.min()) >= 0.9 * 255
    assert (hist_equalize(eq) == eq).all()


def test_resize_cases(rng):
    img = rng.integers(0, 256, (30, 40), dtype=np.uint8)
    assert (resize(img, 40, 30) == img).all()
    assert (resize(np.full((7, 9), 42, np.uint8), 20, 3) == 42).all()
    yy, xx = np.mgrid[0:40, 0:60]
    grad = (xx * 2 + yy * 1.5).astype(np.uint8)
    back = resize(resize(grad, 120, 80), 60, 40)
    inner = (slice(1, -1), slice(1, -1))
    assert np.abs(back[inner].astype(int) - grad[inner].astype(int)).max() <= 2


def test_rect_clamp_and_inside():
    r = Rect(-5, -5, 20, 20).clamp(10, 8)
    assert r == Rect(0, 0, 10, 8)
    assert r.inside(10, 8)
    assert not Rect(5, 5, 10, 10).inside(10, 10)
