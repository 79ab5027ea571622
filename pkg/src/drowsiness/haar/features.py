"""Rectangular Haar-like features and their integral-image evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..imaging import Rect, rect_sum, window_std

KINDS = ("two_lr", "two_tb", "three_lr", "three_tb", "four", "custom")


@dataclass(frozen=True)
class HaarFeature:
    """Weighted rectangles in base-window coordinates.

    The weights must cancel on a constant patch, i.e. ``sum(weight * area)``
    is zero, so every feature responds with 0 to a flat image.
    """

    rects: tuple[tuple[Rect, float], ...]
    kind: str = "custom"

    def __post_init__(self):
        if not self.rects:
            raise ValueError("a feature needs at least one rectangle")
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        total = sum(wt * r.w * r.h for r, wt in self.rects)
        scale = sum(abs(wt) * r.w * r.h for r, wt in self.rects)
        if abs(total) > 1e-9 * max(scale, 1.0):
            raise ValueError("feature weights do not cancel on a constant image")

    def fits(self, base_w: int, base_h: int) -> bool:
        return all(r.inside(base_w, base_h) for r, _ in self.rects)

    @classmethod
    def two_lr(cls, x, y, w, h):
        """Left half minus right half; ``w`` is the full width and must be even."""
        half = w // 2
        return cls(((Rect(x, y, half, h), 1.0), (Rect(x + half, y, half, h), -1.0)), "two_lr")

    @classmethod
    def two_tb(cls, x, y, w, h):
        """Top half minus bottom half."""
        half = h // 2
        return cls(((Rect(x, y, w, half), 1.0), (Rect(x, y + half, w, half), -1.0)), "two_tb")

    @classmethod
    def three_lr(cls, x, y, w, h):
        t = w // 3
        return cls(
            ((Rect(x, y, t, h), -1.0), (Rect(x + t, y, t, h), 2.0), (Rect(x + 2 * t, y, t, h), -1.0)),
            "three_lr",
        )

    @classmethod
    def three_tb(cls, x, y, w, h):
        t = h // 3
        return cls(
            ((Rect(x, y, w, t), -1.0), (Rect(x, y + t, w, t), 2.0), (Rect(x, y + 2 * t, w, t), -1.0)),
            "three_tb",
        )

    @classmethod
    def four(cls, x, y, w, h):
        hw, hh = w // 2, h // 2
        return cls(
            (
                (Rect(x, y, hw, hh), 1.0),
                (Rect(x + hw, y, hw, hh), -1.0),
                (Rect(x, y + hh, hw, hh), -1.0),
                (Rect(x + hw, y + hh, hw, hh), 1.0),
            ),
            "four",
        )


def _round(v: float) -> int:
    return int(np.floor(v + 0.5))


def scaled_rects(f: HaarFeature, base_w: int, base_h: int, win_w: int, win_h: int) -> list[tuple[int, int, int, int, float]]:
    """Feature rectangles stretched to a ``win_w x win_h`` window.

    Offsets are window-relative. After rounding, the first weight is re-solved
    so the scaled feature still cancels on flat patches.
    """
    sx = win_w / base_w
    sy = win_h / base_h
    out = []
    for r, wt in f.rects:
        x = min(_round(r.x * sx), win_w - 1)
        y = min(_round(r.y * sy), win_h - 1)
        w = max(1, min(_round(r.w * sx), win_w - x))
        h = max(1, min(_round(r.h * sy), win_h - y))
        out.append([x, y, w, h, wt])
    if len(out) > 1:
        rest = sum(wt * w * h for _, _, w, h, wt in out[1:])
        x, y, w, h, _ = out[0]
        out[0][4] = -rest / (w * h)
    return [tuple(o) for o in out]


def eval_feature(
    ii: np.ndarray,
    f: HaarFeature,
    window: Rect,
    base_size: tuple[int, int],
    sq_ii: np.ndarray | None = None,
) -> float:
    """Weighted rectangle sum of ``f`` stretched over ``window``.

    When ``sq_ii`` is given the response is divided by the window's pixel
    standard deviation, floored at 1.
    """
    window = Rect(*window)
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    if not window.inside(w, h):
        raise IndexError(f"window {tuple(window)} outside {w}x{h} image")
    total = 0.0
    for dx, dy, rw, rh, wt in scaled_rects(f, base_size[0], base_size[1], window.w, window.h):
        total += wt * rect_sum(ii, Rect(window.x + dx, window.y + dy, rw, rh))
    if sq_ii is not None:
        total /= max(window_std(ii, sq_ii, window), 1.0)
    return total


def feature_values(iis: np.ndarray, f: HaarFeature) -> np.ndarray:
    """Base-scale responses of ``f`` on a stack of integral images ``(n, h+1, w+1)``."""
    out = np.zeros(iis.shape[0], dtype=np.float64)
    for r, wt in f.rects:
        x, y, w, h = r
        s = iis[:, y, x] + iis[:, y + h, x + w] - iis[:, y, x + w] - iis[:, y + h, x]
        out += wt * s
    return out


def enumerate_features(base_w: int, base_h: int, step: int = 1, min_size: int = 2) -> list[HaarFeature]:
    """Every feature of the five standard layouts on a grid of ``step`` pixels."""
    feats = []
    layouts = (
        (HaarFeature.two_lr, 2, 1),
        (HaarFeature.two_tb, 1, 2),
        (HaarFeature.three_lr, 3, 1),
        (HaarFeature.three_tb, 1, 3),
        (HaarFeature.four, 2, 2),
    )
    for make, ux, uy in layouts:
        for w in range(max(ux, min_size), base_w + 1, ux):
            for h in range(max(uy, min_size), base_h + 1, uy):
                for y in range(0, base_h - h + 1, step):
                    for x in range(0, base_w - w + 1, step):
                        feats.append(make(x, y, w, h))
    return feats


def random_features(base_w: int, base_h: int, n: int, rng: np.random.Generator, min_size: int = 2) -> list[HaarFeature]:
    pool = enumerate_features(base_w, base_h, min_size=min_size)
    if n >= len(pool):
        return pool
    idx = np.sort(rng.choice(len(pool), size=n, replace=False))
    return [pool[i] for i in idx]


def check_zero_sum(features: Sequence[HaarFeature]) -> bool:
    return all(abs(sum(wt * r.w * r.h for r, wt in f.rects)) < 1e-9 for f in features)
