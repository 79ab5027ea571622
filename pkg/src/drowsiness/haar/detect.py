"""Multi-scale sliding-window detection with a Haar cascade.

Windows of one scale are evaluated together: each stump is computed for all
still-alive windows with array lookups into the integral image, and windows
drop out at the first stage they fail.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from ..imaging import AffineMap, Rect, as_gray, downsample, integral, remap_rect, resize, rotate, squared_integral
from .cascade import Cascade, EvalCounter
from .features import scaled_rects

DEFAULT_TILTS = tuple(math.radians(a) for a in (20, -20, 40, -40, 60, -60, 70, -70))

EYE_ROI_SIZE = (200, 70)
# eyes fill about 50x40 of the ROI; narrower windows only see parts of one
EYE_MIN_WINDOW = 36


@dataclass(frozen=True)
class DetectParams:
    scale_step: float = 1.2
    min_window: int = 0
    window_stride: int = 2
    min_neighbors: int = 5
    sf: int = 1
    tilt_angles: tuple[float, ...] = DEFAULT_TILTS
    group_iou: float = 0.4

    def __post_init__(self):
        if not self.scale_step > 1.0:
            raise ValueError("scale_step must exceed 1")
        if self.window_stride < 1:
            raise ValueError("window_stride must be >= 1")
        if self.min_neighbors < 0:
            raise ValueError("min_neighbors must be >= 0")
        if self.sf < 1:
            raise ValueError("sf must be >= 1")


@dataclass(frozen=True)
class Detection:
    """A detected object in full-resolution frame coordinates.

    For detections from a rotation branch, ``tilt`` is the in-plane angle of
    the object in the frame, ``pivot`` the rotation centre (pixel-index
    coordinates) and ``upright_rect`` the box in the frame rotated by
    ``-tilt`` about ``pivot``, where the object stands upright.
    """

    rect: Rect
    score: float
    tilt: float = 0.0
    upright_rect: Rect | None = None
    pivot: tuple[float, float] | None = None
    members: int = 1


def _scales(c: Cascade, w: int, h: int, p: DetectParams):
    k = 0
    while True:
        s = p.scale_step**k
        ww = int(math.floor(c.base_width * s + 0.5))
        wh = int(math.floor(c.base_height * s + 0.5))
        if ww > w or wh > h:
            return
        if max(ww, wh) >= p.min_window:
            yield s, ww, wh
        k += 1


class _CompiledStage:
    """One stage's stumps stretched to a window size, as flat arrays."""

    def __init__(self, stage, base_w, base_h, ww, wh):
        dx, dy, rw, rh, owner, wt = [], [], [], [], [], []
        for j, s in enumerate(stage.stumps):
            for x, y, w, h, weight in scaled_rects(s.feature, base_w, base_h, ww, wh):
                dx.append(x)
                dy.append(y)
                rw.append(w)
                rh.append(h)
                owner.append(j)
                wt.append(weight)
        self.dx = np.array(dx, dtype=np.intp)
        self.dy = np.array(dy, dtype=np.intp)
        self.rw = np.array(rw, dtype=np.intp)
        self.rh = np.array(rh, dtype=np.intp)
        n = len(stage.stumps)
        self.weights = np.zeros((len(dx), n))
        self.weights[np.arange(len(dx)), owner] = wt
        self.signed_thr = np.array([s.polarity * s.threshold for s in stage.stumps])
        self.polarity = np.array([s.polarity for s in stage.stumps], dtype=np.float64)
        self.votes = np.array([s.vote for s in stage.stumps])
        self.threshold = stage.threshold
        self.n_stumps = n

    def offsets(self, stride_row: int):
        tl = self.dy * stride_row + self.dx
        tr = tl + self.rw
        bl = tl + self.rh * stride_row
        return tl, tr, bl, bl + self.rw


_compiled: dict[int, tuple[weakref.ref, dict]] = {}


def _compile(c: Cascade, ww: int, wh: int) -> list[_CompiledStage]:
    entry = _compiled.get(id(c))
    if entry is None or entry[0]() is not c:
        entry = (weakref.ref(c, lambda _, k=id(c): _compiled.pop(k, None)), {})
        _compiled[id(c)] = entry
    stages = entry[1].get((ww, wh))
    if stages is None:
        stages = [_CompiledStage(st, c.base_width, c.base_height, ww, wh) for st in c.stages]
        entry[1][(ww, wh)] = stages
    return stages


def _scale_hits(c: Cascade, ii, sq, ww, wh, stride, counter: EvalCounter | None):
    H, W = ii.shape[0] - 1, ii.shape[1] - 1
    ys, xs = np.mgrid[0 : H - wh + 1 : stride, 0 : W - ww + 1 : stride]
    xs = xs.ravel()
    ys = ys.ravel()
    n = xs.size
    if n == 0:
        return xs, ys, np.zeros(0)
    row = W + 1
    flat = ii.ravel()
    origin = ys * row + xs
    area_ratio = (c.base_width * c.base_height) / (ww * wh)
    if c.variance_normalize:
        s1 = ii[ys, xs] + ii[ys + wh, xs + ww] - ii[ys, xs + ww] - ii[ys + wh, xs]
        s2 = sq[ys, xs] + sq[ys + wh, xs + ww] - sq[ys, xs + ww] - sq[ys + wh, xs]
        npx = ww * wh
        var = (s2 - s1.astype(np.float64) ** 2 / npx) / npx
        norm = area_ratio / np.maximum(np.sqrt(np.maximum(var, 0.0)), 1.0)
    else:
        norm = np.full(n, area_ratio)
    alive = np.arange(n)
    per_window = np.zeros(n, dtype=np.int64) if counter is not None else None
    margin = np.zeros(n)
    for cs in _compile(c, ww, wh):
        if alive.size == 0:
            break
        o = origin[alive][:, None]
        tl, tr, bl, br = cs.offsets(row)
        sums = flat[o + tl] + flat[o + br] - flat[o + tr] - flat[o + bl]
        v = (sums @ cs.weights) * norm[alive][:, None]
        fires = cs.polarity * v < cs.signed_thr
        votes = fires @ cs.votes
        if counter is not None:
            counter.stumps += cs.n_stumps * alive.size
            counter.stages += alive.size
            per_window[alive] += cs.n_stumps
        margin[alive] = votes - cs.threshold
        alive = alive[votes >= cs.threshold]
    if counter is not None:
        counter.windows += n
        counter.per_window.extend(per_window.tolist())
    return xs[alive], ys[alive], margin[alive]


def raw_hits(c: Cascade, img, p: DetectParams = DetectParams(), counter: EvalCounter | None = None) -> list[tuple[Rect, float]]:
    """Every window passing the cascade, scales ascending then row-major."""
    img = as_gray(img)
    h, w = img.shape
    ii = integral(img)
    sq = squared_integral(img) if c.variance_normalize else None
    hits = []
    for s, ww, wh in _scales(c, w, h, p):
        stride = max(1, int(math.floor(p.window_stride * s + 0.5)))
        xs, ys, sc = _scale_hits(c, ii, sq, ww, wh, stride, counter)
        hits.extend((Rect(int(x), int(y), ww, wh), float(m)) for x, y, m in zip(xs, ys, sc))
    return hits


def group_hits(hits: list[tuple[Rect, float]], min_neighbors: int, min_iou: float = 0.4) -> list[Detection]:
    """Union-find over overlapping hits; groups smaller than ``min_neighbors`` are dropped."""
    n = len(hits)
    if n == 0:
        return []
    rects = np.array([h[0] for h in hits], dtype=np.float64)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    chunk = 512
    for i0 in range(0, n, chunk):
        block = rects[i0 : i0 + chunk]
        x0, y0 = block[:, 0], block[:, 1]
        x1, y1 = x0 + block[:, 2], y0 + block[:, 3]
        iw = np.clip(np.minimum(x1[:, None], rects[None, :, 0] + rects[None, :, 2]) - np.maximum(x0[:, None], rects[None, :, 0]), 0, None)
        ih = np.clip(np.minimum(y1[:, None], rects[None, :, 1] + rects[None, :, 3]) - np.maximum(y0[:, None], rects[None, :, 1]), 0, None)
        inter = iw * ih
        area_b = block[:, 2] * block[:, 3]
        area = rects[:, 2] * rects[:, 3]
        ov = inter / (area_b[:, None] + area[None] - inter)
        ii_, jj = np.nonzero(ov >= min_iou)
        for a, b in zip(ii_ + i0, jj):
            if b > a:
                ra, rb = find(a), find(int(b))
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for root in sorted(groups):
        members = groups[root]
        if len(members) < max(min_neighbors, 1):
            continue
        m = rects[members].mean(axis=0)
        r = Rect(*(int(math.floor(v + 0.5)) for v in m))
        out.append(Detection(r, max(hits[i][1] for i in members), members=len(members)))
    return out


def detect(c: Cascade, img, p: DetectParams = DetectParams(), counter: EvalCounter | None = None) -> list[Detection]:
    """Detect at every scale ``base * scale_step**k`` that fits in ``img``."""
    return group_hits(raw_hits(c, img, p, counter), p.min_neighbors, p.group_iou)


def detect_fast(c: Cascade, img, p: DetectParams = DetectParams(), counter: EvalCounter | None = None) -> list[Detection]:
    """Detect on the image downsampled by ``p.sf`` and report full-resolution boxes."""
    img = as_gray(img)
    if p.sf == 1:
        return detect(c, img, p, counter)
    small = downsample(img, p.sf)
    if small.shape[1] < c.base_width or small.shape[0] < c.base_height:
        raise ValueError(f"sf={p.sf} shrinks the image below the {c.base_width}x{c.base_height} base window")
    return [
        Detection(remap_rect(d.rect, p.sf), d.score, members=d.members)
        for d in detect(c, small, p, counter)
    ]


def _corners(r: Rect) -> np.ndarray:
    return np.array([[r.x, r.y], [r.x + r.w, r.y], [r.x, r.y + r.h], [r.x + r.w, r.y + r.h]], dtype=float)


def _bbox(points: np.ndarray, width: int, height: int) -> Rect:
    x0 = max(0, int(math.floor(points[:, 0].min() + 1e-9)))
    y0 = max(0, int(math.floor(points[:, 1].min() + 1e-9)))
    x1 = min(width, int(math.ceil(points[:, 0].max() - 1e-9)))
    y1 = min(height, int(math.ceil(points[:, 1].max() - 1e-9)))
    x0 = min(x0, width - 1)
    y0 = min(y0, height - 1)
    return Rect(x0, y0, max(1, x1 - x0), max(1, y1 - y0))


def detect_tilted(c: Cascade, img, p: DetectParams = DetectParams(), counter: EvalCounter | None = None) -> list[Detection]:
    """Upright detection, falling back to rotated copies of the downsampled image.

    Branch angles are tried in the order of ``p.tilt_angles``; the first
    branch producing a detection wins. Boxes found on a rotated copy are
    rotated back (corner-wise) and reported as their axis-aligned bounds in
    the original frame.
    """
    img = as_gray(img)
    found = detect_fast(c, img, p, counter)
    if found:
        return [Detection(d.rect, d.score, 0.0, d.rect, None, d.members) for d in found]
    H, W = img.shape
    small = downsample(img, p.sf)
    hd, wd = small.shape
    c_small = ((wd - 1) / 2.0, (hd - 1) / 2.0)
    pivot = ((c_small[0] + 0.5) * p.sf - 0.5, (c_small[1] + 0.5) * p.sf - 0.5)
    for angle in p.tilt_angles:
        rotated = rotate(small, angle, c_small)
        dets = detect(c, rotated, p, counter)
        if not dets:
            continue
        back = AffineMap.rotation(angle, c_small).inverse()
        out = []
        for d in dets:
            # rect corners are pixel edges; rotation acts on pixel-index coordinates
            pts = back.apply(_corners(d.rect) - 0.5) + 0.5
            rect = _bbox(pts * p.sf, W, H)
            upright = remap_rect(d.rect, p.sf).clamp(W, H)
            out.append(Detection(rect, d.score, -angle, upright, pivot, d.members))
        return out
    return []


def upright_frame(frame, det: Detection) -> tuple[np.ndarray, Rect]:
    """The frame turned so the detected object stands upright, and its box there."""
    frame = as_gray(frame)
    if det.tilt == 0.0 or det.pivot is None:
        return frame, det.rect
    return rotate(frame, -det.tilt, det.pivot), det.upright_rect


def eye_band(face: Rect, height: int) -> tuple[int, int]:
    """Rows ``[top, bottom)`` of the eye band: from ``h/5`` below the face top to ``h/3`` above its bottom."""
    top = face.y + face.h // 5
    bottom = face.y + face.h - face.h // 3
    top = max(top, 0)
    bottom = min(bottom, height)
    return top, bottom


def select_eye_roi(face: Rect, frame) -> np.ndarray:
    """Crop the eye band of ``face`` and resize it to 200x70."""
    frame = as_gray(frame)
    H, W = frame.shape
    face = Rect(*face)
    top, bottom = eye_band(face, H)
    x0 = max(face.x, 0)
    x1 = min(face.x + face.w, W)
    if bottom - top < 2 or x1 - x0 < 1:
        raise ValueError(f"face {tuple(face)} leaves a degenerate eye band")
    band = frame[top:bottom, x0:x1]
    return resize(band, *EYE_ROI_SIZE)


def tilted_eye_roi(frame, det: Detection) -> np.ndarray:
    """Eye ROI taken from the de-rotated face."""
    upright, rect = upright_frame(frame, det)
    return select_eye_roi(rect, upright)
