"""Grayscale raster primitives shared by every detector.

Images are plain ``numpy`` arrays of dtype ``uint8`` and shape ``(height, width)``.
Coordinates follow the usual raster convention: x grows rightward, y grows
downward and the origin is the top-left pixel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# 255 * 4096 * 4096 < 2**32, so a 64-bit accumulator is far from overflowing.
MAX_SIDE = 4096


class Rect(NamedTuple):
    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def inside(self, width: int, height: int) -> bool:
        return (
            self.w >= 1
            and self.h >= 1
            and self.x >= 0
            and self.y >= 0
            and self.x + self.w <= width
            and self.y + self.h <= height
        )

    def clamp(self, width: int, height: int) -> "Rect":
        x0 = min(max(self.x, 0), width - 1)
        y0 = min(max(self.y, 0), height - 1)
        x1 = min(max(self.x + self.w, x0 + 1), width)
        y1 = min(max(self.y + self.h, y0 + 1), height)
        return Rect(int(x0), int(y0), int(x1 - x0), int(y1 - y0))


def iou(a: Rect, b: Rect) -> float:
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


def as_gray(img) -> np.ndarray:
    """Validate and return ``img`` as a 2-D ``uint8`` array."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("pixel values must lie in 0..255")
        arr = arr.astype(np.uint8)
    return arr


def integral(img) -> np.ndarray:
    """Summed-area table with a zero first row and column.

    ``ii[y + 1, x + 1]`` holds the sum of every pixel at or above-left of
    ``(x, y)``, so the result has shape ``(h + 1, w + 1)``.
    """
    img = as_gray(img)
    h, w = img.shape
    if h > MAX_SIDE or w > MAX_SIDE:
        raise ValueError(f"integral images are limited to {MAX_SIDE}x{MAX_SIDE}")
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(img, axis=0, dtype=np.int64, out=ii[1:, 1:])
    np.cumsum(ii[1:, 1:], axis=1, out=ii[1:, 1:])
    return ii


def squared_integral(img) -> np.ndarray:
    """Summed-area table of squared intensities (used for window variance)."""
    img = as_gray(img).astype(np.int64)
    h, w = img.shape
    sq = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq[1:, 1:] = (img * img).cumsum(axis=0).cumsum(axis=1)
    return sq


def rect_sum(ii: np.ndarray, r: Rect) -> int:
    """Sum of the pixels inside ``r`` from four table lookups."""
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    if not Rect(*r).inside(w, h):
        raise IndexError(f"rect {tuple(r)} outside {w}x{h} image")
    x, y, rw, rh = r
    # P1 + P4 - P2 - P3 with P1 top-left, P4 bottom-right
    return int(ii[y, x] + ii[y + rh, x + rw] - ii[y, x + rw] - ii[y + rh, x])


def window_std(ii: np.ndarray, sq: np.ndarray, r: Rect) -> float:
    n = r.w * r.h
    s = rect_sum(ii, r)
    s2 = rect_sum(sq, r)
    var = (s2 - s * s / n) / n
    return float(np.sqrt(max(var, 0.0)))


def downsample(img, sf: int) -> np.ndarray:
    """Block-mean downsampling by an integer factor.

    Each output pixel is the mean of an ``sf x sf`` source block, rounded half
    up. Trailing rows and columns that do not fill a block are dropped.
    """
    img = as_gray(img)
    sf = int(sf)
    if sf < 1:
        raise ValueError("scale factor must be >= 1")
    if sf == 1:
        return img.copy()
    h, w = img.shape
    oh, ow = h // sf, w // sf
    if oh < 1 or ow < 1:
        raise ValueError(f"scale factor {sf} leaves nothing of a {w}x{h} image")
    blocks = img[: oh * sf, : ow * sf].reshape(oh, sf, ow, sf)
    sums = blocks.sum(axis=(1, 3), dtype=np.int64)
    n = sf * sf
    return ((sums * 2 + n) // (2 * n)).astype(np.uint8)


def remap_rect(r: Rect, sf: int) -> Rect:
    """Map a rectangle found on a downsampled image back to full resolution."""
    return Rect(r.x * sf, r.y * sf, r.w * sf, r.h * sf)


@dataclass(frozen=True)
class AffineMap:
    """``p -> A @ p + b`` on 2-D points given as ``(x, y)``."""

    A: np.ndarray
    b: np.ndarray

    @classmethod
    def rotation(cls, theta: float, center=(0.0, 0.0)) -> "AffineMap":
        c, s = np.cos(theta), np.sin(theta)
        A = np.array([[c, -s], [s, c]])
        center = np.asarray(center, dtype=float)
        return cls(A, center - A @ center)

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(np.eye(2), np.zeros(2))

    def matrix(self) -> np.ndarray:
        """The 3x3 augmented form."""
        m = np.eye(3)
        m[:2, :2] = self.A
        m[:2, 2] = self.b
        return m

    def inverse(self) -> "AffineMap":
        Ai = np.linalg.inv(self.A)
        return AffineMap(Ai, -Ai @ self.b)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """``self`` applied after ``other``."""
        return AffineMap(self.A @ other.A, self.A @ other.b + self.b)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.A.T + self.b


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: float = 0.0) -> np.ndarray:
    """Sample ``img`` at real pixel-index coordinates; outside samples get ``fill``."""
    h, w = img.shape
    src = img.astype(np.float64)
    inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    xc = np.clip(xs, 0, w - 1)
    yc = np.clip(ys, 0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.where(inside, out, fill)


def rotate(img, theta: float, center=None) -> np.ndarray:
    """Rotate image content by ``theta`` radians about ``center``.

    ``center`` is given in pixel-index coordinates and defaults to the image
    centre. A point ``p`` of the input lands at
    ``AffineMap.rotation(theta, center).apply(p)`` in the output. Output
    pixels are pulled back through the inverse map and bilinearly
    interpolated; samples falling outside the source are 0.
    """
    img = as_gray(img)
    if not np.isfinite(theta):
        raise ValueError("rotation angle must be finite")
    h, w = img.shape
    if center is None:
        center = ((w - 1) / 2.0, (h - 1) / 2.0)
    if theta == 0.0:
        return img.copy()
    inv = AffineMap.rotation(theta, center).inverse()
    yy, xx = np.mgrid[0:h, 0:w]
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(float)
    src = inv.apply(pts)
    # tolerate round-off at exact source borders
    sx = np.round(src[:, 0], 9)
    sy = np.round(src[:, 1], 9)
    vals = bilinear_sample(img, sx, sy)
    return np.clip(np.rint(vals), 0, 255).astype(np.uint8).reshape(h, w)


def hist_equalize(img) -> np.ndarray:
    """Cumulative-histogram equalization onto the full 0..255 range."""
    img = as_gray(img)
    hist = np.bincount(img.ravel(), minlength=256)
    cdf = hist.cumsum()
    n = cdf[-1]
    cdf_min = cdf[hist.nonzero()[0][0]]
    if n == cdf_min:
        return img.copy()
    lut = np.floor((cdf - cdf_min) * 255.0 / (n - cdf_min) + 0.5)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return lut[img]


def resize(img, w: int, h: int) -> np.ndarray:
    """Bilinear resampling to exactly ``w x h`` with pixel-centre alignment."""
    img = as_gray(img)
    if w < 1 or h < 1:
        raise ValueError("target size must be at least 1x1")
    sh, sw = img.shape
    if (sh, sw) == (h, w):
        return img.copy()
    xs = (np.arange(w) + 0.5) * (sw / w) - 0.5
    ys = (np.arange(h) + 0.5) * (sh / h) - 0.5
    xs = np.clip(xs, 0, sw - 1)
    ys = np.clip(ys, 0, sh - 1)
    gx, gy = np.meshgrid(xs, ys)
    vals = bilinear_sample(img, gx, gy)
    return np.clip(np.rint(vals), 0, 255).astype(np.uint8)


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    return img[r.y : r.y + r.h, r.x : r.x + r.w]
