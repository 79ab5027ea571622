"""Synthetic corpora: textured backgrounds, cartoon faces and eye crops.

Faces are rendered analytically so they can be placed at any position, size
and in-plane tilt with an exact ground-truth box. A face occupies the unit
square in face coordinates ``(u, v)`` (u rightward, v downward):

* skin fills the square, a dark hair band covers its top, a dark mouth bar
  sits near the bottom;
* the two eyes are drawn with the same eye model used for stand-alone
  50x40 eye crops, so a face's eye ROI contains realistic eye windows.

Nothing here is needed at run time; it exists so the detectors can be
trained and checked end to end without external footage.
"""

from __future__ import annotations

import math
from pathlib import Path
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .imaging import Rect, downsample

EYE_W, EYE_H = 50, 40

# eye boxes in face coordinates (u0, v0, u1, v1); chosen so a 50x40 window of
# the 200x70 eye ROI covers one eye box
LEFT_EYE = (0.175, 0.247, 0.425, 0.513)
RIGHT_EYE = (0.575, 0.247, 0.825, 0.513)


@dataclass(frozen=True)
class EyeStyle:
    """Per-instance variation of the eye model."""

    state: str = "open"
    skin: float = 170.0
    sclera: float = 235.0
    iris: float = 35.0
    half_w: float = 18.0
    half_h: float = 9.0
    iris_r: float = 7.0
    iris_dx: float = 0.0
    lid_drop: float = 2.0
    lid_curve: float = 0.010
    lid_thick: float = 1.6
    dx: float = 0.0
    dy: float = 0.0

    @classmethod
    def random(cls, state: str, rng: np.random.Generator, skin: float | None = None) -> "EyeStyle":
        return cls(
            state=state,
            skin=float(rng.uniform(150, 190)) if skin is None else skin,
            sclera=float(rng.uniform(220, 250)),
            iris=float(rng.uniform(20, 55)),
            half_w=float(rng.uniform(16, 20)),
            half_h=float(rng.uniform(7.5, 10.5)),
            iris_r=float(rng.uniform(6, 8)),
            iris_dx=float(rng.uniform(-4, 4)),
            lid_drop=float(rng.uniform(0.5, 3.5)),
            lid_curve=float(rng.uniform(0.006, 0.014)),
            lid_thick=float(rng.uniform(1.3, 2.0)),
            dx=float(rng.uniform(-2, 2)),
            dy=float(rng.uniform(-2, 2)),
        )


def eye_value(s: np.ndarray, t: np.ndarray, st: EyeStyle) -> np.ndarray:
    """Eye intensity at crop coordinates ``s, t`` in [0, 1] (50x40 crop frame)."""
    X = (s - 0.5) * EYE_W - st.dx
    Y = (t - 0.5) * EYE_H - st.dy
    out = np.full(np.broadcast(X, Y).shape, st.skin, dtype=np.float64)
    ell = (X / st.half_w) ** 2 + (Y / st.half_h) ** 2
    if st.state == "open":
        out = np.where(ell <= 1.0, st.sclera, out)
        r = np.hypot(X - st.iris_dx, Y)
        out = np.where((r <= st.iris_r) & (ell <= 1.0), st.iris, out)
        out = np.where((r <= st.iris_r * 0.4) & (ell <= 1.0), st.iris * 0.5, out)
        ring = (ell > 0.80) & (ell <= 1.15)
        out = np.where(ring, np.minimum(out, st.skin * 0.45), out)
    elif st.state == "closed":
        lid = st.lid_drop + st.lid_curve * X**2
        on = (np.abs(Y - lid) <= st.lid_thick) & (np.abs(X) <= st.half_w)
        out = np.where(on, st.skin * 0.3, out)
        lash = (Y > lid) & (Y < lid + 3.0) & (np.abs(X) <= st.half_w * 0.8) & (np.mod(X, 4.0) < 1.2)
        out = np.where(lash, st.skin * 0.5, out)
    else:
        raise ValueError(f"unknown eye state {st.state!r}")
    return out


def eye_crop(state: str, rng: np.random.Generator, noise: float = 6.0, style: EyeStyle | None = None) -> np.ndarray:
    """A 50x40 grayscale eye crop, open or closed."""
    st = style or EyeStyle.random(state, rng)
    ys, xs = np.mgrid[0:EYE_H, 0:EYE_W]
    ss = 2
    acc = np.zeros((EYE_H, EYE_W))
    for oy in range(ss):
        for ox in range(ss):
            acc += eye_value((xs + (ox + 0.5) / ss) / EYE_W, (ys + (oy + 0.5) / ss) / EYE_H, st)
    img = acc / ss**2
    shade = rng.uniform(-15, 15) * (xs / EYE_W - 0.5) + rng.uniform(-10, 10) * (ys / EYE_H - 0.5)
    img = img + shade + rng.normal(0, noise, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def nir_eye_crop(state: str, rng: np.random.Generator) -> np.ndarray:
    """Eye crop with a compressed, offset tone curve as under NIR lighting."""
    img = eye_crop(state, rng, noise=4.0).astype(np.float64)
    gain = rng.uniform(0.45, 0.65)
    offset = rng.uniform(40, 80)
    return np.clip(np.rint(img * gain + offset), 0, 255).astype(np.uint8)


def background(h: int, w: int, rng: np.random.Generator, mean: float = 95.0) -> np.ndarray:
    """Smooth clutter plus fine noise."""
    coarse = ndimage.gaussian_filter(rng.normal(0, 1, (h, w)), sigma=rng.uniform(6, 14))
    coarse = coarse / (coarse.std() + 1e-9) * 28
    fine = rng.normal(0, 10, (h, w))
    return np.clip(mean + coarse + fine, 0, 255)


@dataclass(frozen=True)
class FaceStyle:
    skin: float = 190.0
    hair: float = 45.0
    mouth: float = 60.0
    left: EyeStyle = EyeStyle()
    right: EyeStyle = EyeStyle()

    @classmethod
    def random(cls, rng: np.random.Generator, eye_state: str | None = None) -> "FaceStyle":
        skin = float(rng.uniform(165, 215))
        state = eye_state or ("open" if rng.random() < 0.5 else "closed")
        eye_skin = skin * 0.92
        return cls(
            skin=skin,
            hair=float(rng.uniform(25, 70)),
            mouth=float(rng.uniform(40, 90)),
            left=EyeStyle.random(state, rng, skin=eye_skin),
            right=EyeStyle.random(state, rng, skin=eye_skin),
        )


def face_value(u: np.ndarray, v: np.ndarray, st: FaceStyle) -> np.ndarray:
    """Face intensity at face coordinates; NaN outside the unit square."""
    inside = (u >= 0) & (u < 1) & (v >= 0) & (v < 1)
    out = np.full(u.shape, st.skin)
    out = np.where(v < 0.12, st.hair, out)
    out = np.where((v >= 0.70) & (v < 0.80) & (u >= 0.30) & (u < 0.70), st.mouth, out)
    for box, es in ((LEFT_EYE, st.left), (RIGHT_EYE, st.right)):
        u0, v0, u1, v1 = box
        inb = (u >= u0) & (u < u1) & (v >= v0) & (v < v1)
        if inb.any():
            s = (u[inb] - u0) / (u1 - u0)
            t = (v[inb] - v0) / (v1 - v0)
            out[inb] = eye_value(s, t, es)
    return np.where(inside, out, np.nan)


def paint_face(canvas: np.ndarray, x: float, y: float, size: float, style: FaceStyle, tilt: float = 0.0, ss: int = 2) -> Rect:
    """Render a face with top-left ``(x, y)`` (before tilt) onto a float canvas.

    ``tilt`` rotates the face about its centre, in the same sense as
    :func:`drowsiness.imaging.rotate`. Returns the axis-aligned ground-truth
    box of the (possibly tilted) face, clipped to the canvas.
    """
    H, W = canvas.shape
    cx, cy = x + size / 2.0, y + size / 2.0
    half = size / 2.0 * (abs(math.cos(tilt)) + abs(math.sin(tilt)))
    x0 = max(int(math.floor(cx - half)) - 1, 0)
    y0 = max(int(math.floor(cy - half)) - 1, 0)
    x1 = min(int(math.ceil(cx + half)) + 1, W)
    y1 = min(int(math.ceil(cy + half)) + 1, H)
    if x1 <= x0 or y1 <= y0:
        return Rect(0, 0, 1, 1)
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    c, s = math.cos(-tilt), math.sin(-tilt)
    acc = np.zeros(xs.shape)
    cov = np.zeros(xs.shape)
    for oy in range(ss):
        for ox in range(ss):
            # pixel-index coordinates rotate about the centre's index position
            px = xs + (ox + 0.5) / ss - 0.5 - (cx - 0.5)
            py = ys + (oy + 0.5) / ss - 0.5 - (cy - 0.5)
            qx = c * px - s * py
            qy = s * px + c * py
            u = (qx + size / 2.0) / size
            v = (qy + size / 2.0) / size
            val = face_value(u, v, style)
            hit = ~np.isnan(val)
            acc += np.where(hit, val, 0.0)
            cov += hit
    region = canvas[y0:y1, x0:x1]
    frac = cov / ss**2
    with np.errstate(invalid="ignore", divide="ignore"):
        face = np.where(cov > 0, acc / np.maximum(cov, 1), 0.0)
    canvas[y0:y1, x0:x1] = region * (1 - frac) + face * frac
    corners = np.array([[-1, -1], [1, -1], [-1, 1], [1, 1]], dtype=float) * size / 2.0
    cr, sr = math.cos(tilt), math.sin(tilt)
    pts = corners @ np.array([[cr, -sr], [sr, cr]]).T + [cx, cy]
    bx0 = max(0, int(math.floor(pts[:, 0].min() + 1e-9)))
    by0 = max(0, int(math.floor(pts[:, 1].min() + 1e-9)))
    bx1 = min(W, int(math.ceil(pts[:, 0].max() - 1e-9)))
    by1 = min(H, int(math.ceil(pts[:, 1].max() - 1e-9)))
    return Rect(bx0, by0, max(1, bx1 - bx0), max(1, by1 - by0))


def finish(canvas: np.ndarray, rng: np.random.Generator | None = None, noise: float = 3.0) -> np.ndarray:
    if rng is not None and noise > 0:
        canvas = canvas + rng.normal(0, noise, canvas.shape)
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def face_frame(
    rng: np.random.Generator,
    size=(640, 480),
    faces=((100, 80, 60),),
    tilt: float = 0.0,
    eye_state: str | None = None,
    styles=None,
) -> tuple[np.ndarray, list[Rect]]:
    """A frame with faces given as ``(x, y, side)``; returns image and ground truth."""
    W, H = size
    canvas = background(H, W, rng)
    truth = []
    for i, (x, y, side) in enumerate(faces):
        st = styles[i] if styles is not None else FaceStyle.random(rng, eye_state)
        truth.append(paint_face(canvas, x, y, side, st, tilt))
    return finish(canvas, rng), truth


# ---------------------------------------------------------------------------
# training samples for the face cascade


def face_sample(base: int, rng: np.random.Generator, tilt: float = 0.0, shift=(0.0, 0.0), scale: float = 1.0, up: int = 4) -> np.ndarray:
    """A ``base x base`` window holding a face, rendered large and block-averaged down."""
    n = base * up
    canvas = background(n, n, rng)
    side = n * scale * rng.uniform(0.8, 1.15)
    x = (n - side) / 2.0 + rng.uniform(-0.15, 0.15) * n + shift[0] * n
    y = (n - side) / 2.0 + rng.uniform(-0.15, 0.15) * n + shift[1] * n
    paint_face(canvas, x, y, side, FaceStyle.random(rng), tilt)
    img = finish(canvas, rng, noise=2.0)
    return downsample(img, up)


def background_sample(base: int, rng: np.random.Generator) -> np.ndarray:
    up = int(rng.integers(1, 7))
    n = base * up
    canvas = background(n, n, rng, mean=float(rng.uniform(40, 200)))
    if rng.random() < 0.3:
        # hard edges such as the zero fill left by rotating a frame
        k = int(rng.integers(1, n))
        if rng.random() < 0.5:
            canvas[:, :k] = 0
        else:
            yy, xx = np.mgrid[0:n, 0:n]
            canvas[(xx + yy) < k] = 0
    if rng.random() < 0.3:
        bx, by = rng.integers(0, n, 2)
        bw, bh = rng.integers(n // 4 + 1, n + 1, 2)
        canvas[by : by + bh, bx : bx + bw] = rng.uniform(150, 230)
    return downsample(finish(canvas, rng), up)


def face_negative(base: int, rng: np.random.Generator) -> np.ndarray:
    """Face-like windows the detector must reject: tilted, off-centre or wrongly scaled faces."""
    kind = rng.integers(0, 3)
    if kind == 0:
        tilt = math.radians(float(rng.uniform(12, 180))) * (1 if rng.random() < 0.5 else -1)
        return face_sample(base, rng, tilt=tilt)
    if kind == 1:
        ang = rng.uniform(0, 2 * math.pi)
        r = rng.uniform(0.4, 0.8)
        return face_sample(base, rng, shift=(r * math.cos(ang), r * math.sin(ang)))
    scale = rng.uniform(0.4, 0.6) if rng.random() < 0.5 else rng.uniform(1.6, 2.5)
    return face_sample(base, rng, scale=scale)


def face_training_set(base: int, n_pos: int, n_neg: int, rng: np.random.Generator):
    pos = [face_sample(base, rng) for _ in range(n_pos)]
    n_face_neg = n_neg // 2
    neg = [face_negative(base, rng) for _ in range(n_face_neg)]
    neg += [background_sample(base, rng) for _ in range(n_neg - n_face_neg)]
    return pos, neg


def frame_negatives(base: int, n: int, rng: np.random.Generator, size=(640, 480)) -> list[np.ndarray]:
    """Random base-size windows cut from face-free frames at random scales."""
    W, H = size
    out = []
    frame = finish(background(H, W, rng), rng)
    for i in range(n):
        if i % 200 == 199:
            frame = finish(background(H, W, rng), rng)
        up = int(rng.integers(1, 9))
        n_px = base * up
        x = int(rng.integers(0, W - n_px))
        y = int(rng.integers(0, H - n_px))
        out.append(downsample(frame[y : y + n_px, x : x + n_px], up))
    return out


def face_corpus(n: int, rng: np.random.Generator, size=(640, 480), side_range=(60, 76)):
    """Frames with one upright face each, at random position and size."""
    W, H = size
    frames, truth = [], []
    for _ in range(n):
        side = float(rng.uniform(*side_range))
        x = float(rng.uniform(10, W - side - 10))
        y = float(rng.uniform(10, H - side - 10))
        img, gt = face_frame(rng, size, faces=((x, y, side),))
        frames.append(img)
        truth.append(gt[0])
    return frames, truth


# ---------------------------------------------------------------------------
# eye training sets


def eye_set(state: str, n: int, rng: np.random.Generator, nir: bool = False) -> list[np.ndarray]:
    make = nir_eye_crop if nir else eye_crop
    return [make(state, rng) for _ in range(n)]


def weight_clusters(n_per_class: int, dim: int, rng: np.random.Generator, separation: float = 1.0):
    """Projected-weight vectors for open (+1) and closed (-1) eyes.

    The two classes differ in the profile of their leading components, with
    class-dependent spread, mimicking the weight patterns of projected
    block-LBP descriptors.
    """
    k = np.arange(dim)
    decay = np.exp(-k / 6.0)
    open_mean = separation * 3.0 * decay * np.cos(0.9 * k)
    closed_mean = separation * 3.0 * decay * np.cos(0.9 * k + 2.2)
    spread = 0.6 + 1.4 * decay
    xo = open_mean + rng.normal(0, 1, (n_per_class, dim)) * spread
    xc = closed_mean + rng.normal(0, 1, (n_per_class, dim)) * spread * 0.8
    xs = np.vstack([xo, xc])
    ys = np.r_[np.ones(n_per_class), -np.ones(n_per_class)]
    perm = rng.permutation(len(ys))
    return xs[perm], ys[perm]


def mine_negatives(cascade, n: int, rng: np.random.Generator, base: int, size=(320, 240), per_frame: int = 40) -> list[np.ndarray]:
    """Windows the partial ``cascade`` wrongly accepts, cut from face-free regions.

    Frames carry clutter, tilted faces and upright faces; windows overlapping
    an upright face by IoU >= 0.3 are never taken. With ``cascade=None``
    windows are drawn at random.
    """
    from .haar.detect import _scale_hits
    from .imaging import integral, iou

    W, H = size
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < n and attempts < 400:
        attempts += 1
        canvas = background(H, W, rng, mean=float(rng.uniform(60, 150)))
        upright = []
        for _ in range(int(rng.integers(0, 3))):
            side = float(rng.uniform(30, 120))
            x, y = rng.uniform(0, W - side), rng.uniform(0, H - side)
            if rng.random() < 0.5:
                tilt = math.radians(float(rng.uniform(12, 180))) * (1 if rng.random() < 0.5 else -1)
                paint_face(canvas, x, y, side, FaceStyle.random(rng), tilt)
            else:
                upright.append(paint_face(canvas, x, y, side, FaceStyle.random(rng)))
        frame = finish(canvas, rng)
        if rng.random() < 0.3:
            from .imaging import rotate

            frame = rotate(frame, float(rng.uniform(-1.3, 1.3)))
        up = int(rng.integers(1, 7))
        small = downsample(frame, up)
        hs, ws = small.shape
        if hs < base or ws < base:
            continue
        if cascade is None:
            xs = rng.integers(0, ws - base + 1, per_frame)
            ys = rng.integers(0, hs - base + 1, per_frame)
        else:
            xs, ys, _ = _scale_hits(cascade, integral(small), None, base, base, 1, None)
            if xs.size > per_frame:
                pick = rng.choice(xs.size, per_frame, replace=False)
                xs, ys = xs[pick], ys[pick]
        for x, y in zip(xs, ys):
            r = Rect(int(x) * up, int(y) * up, base * up, base * up)
            if any(iou(r, g) >= 0.3 for g in upright):
                continue
            out.append(small[y : y + base, x : x + base].copy())
            if len(out) >= n:
                break
    return out


def train_face_cascade(seed: int = 0, base: int = 8, stage_specs=(4, 8, 12, 16, 20, 24, 28, 32), n_pos: int = 600, n_neg: int = 1500):
    """Toy upright-face cascade trained on rendered faces with mined negatives."""
    from .haar.features import enumerate_features
    from .haar.train import build_cascade

    rng = np.random.default_rng(seed)
    pos, neg = face_training_set(base, n_pos, n_neg // 2, rng)
    pool = enumerate_features(base, base)
    return build_cascade(
        pos,
        neg,
        pool,
        stage_specs,
        refill=lambda c, k: mine_negatives(c, k, rng, base),
        min_negatives=n_neg,
    )


# ---------------------------------------------------------------------------
# driver sequences and eye-ROI training crops

# eye window origins inside the 200x70 ROI of an exactly boxed upright face
ROI_EYE_ORIGINS = {"left": (35, 7), "right": (115, 7)}

# active NIR lighting: bright close face, dark surroundings, little noise
NIR_GAIN = 0.9
NIR_OFFSET = 15.0
NIR_BACKGROUND = 55.0
DAY_NOISE = 3.0
NIR_NOISE = 0.5


def with_eye_state(style: FaceStyle, state: str) -> FaceStyle:
    return replace(style, left=replace(style.left, state=state), right=replace(style.right, state=state))


def driver_frame(
    rng: np.random.Generator,
    face: tuple[float, float, float] | None,
    style: FaceStyle,
    eye_state: str = "open",
    night: bool = False,
    size=(640, 480),
    tilt: float = 0.0,
) -> tuple[np.ndarray, Rect | None]:
    """One camera frame with the driver's face at ``(x, y, side)``, or no face."""
    W, H = size
    canvas = background(H, W, rng, mean=NIR_BACKGROUND if night else 95.0)
    truth = None
    if face is not None:
        truth = paint_face(canvas, *face, with_eye_state(style, eye_state), tilt)
    if night:
        canvas = canvas * NIR_GAIN + NIR_OFFSET
    return finish(canvas, rng, NIR_NOISE if night else DAY_NOISE), truth


def eye_schedule(n: int, rng: np.random.Generator, closed_fraction: float = 0.1, blink: int = 2) -> list[str]:
    """Open/closed state per frame: closures of ``blink`` frames at random onsets."""
    states = ["open"] * n
    target = int(round(closed_fraction * n))
    closed = 0
    while closed < target:
        start = int(rng.integers(0, n))
        for i in range(start, min(n, start + blink)):
            if states[i] == "open" and closed < target:
                states[i] = "closed"
                closed += 1
    return states


def driver_sequence(
    n: int,
    rng: np.random.Generator,
    night: bool = False,
    states: list[str] | None = None,
    absent: tuple[int, ...] = (),
    size=(640, 480),
    side: float = 150.0,
):
    """Frames of one driver drifting slowly; returns frames, boxes and eye states.

    Frames listed in ``absent`` show no face (box ``None``).
    """
    W, H = size
    style = FaceStyle.random(rng)
    states = states if states is not None else eye_schedule(n, rng)
    if len(states) != n:
        raise ValueError("need one eye state per frame")
    x0 = (W - side) / 2.0
    y0 = (H - side) / 2.0
    phase = float(rng.uniform(0, 2 * math.pi))
    frames, boxes = [], []
    for i in range(n):
        face = None
        if i not in absent:
            face = (x0 + 40.0 * math.sin(0.07 * i + phase), y0 + 15.0 * math.sin(0.05 * i + 2 * phase), side)
        img, truth = driver_frame(rng, face, style, states[i], night, size)
        frames.append(img)
        boxes.append(truth)
    return frames, boxes, states


def _jitter_box(truth: Rect, rng: np.random.Generator, pos: float, scale: float) -> Rect:
    s = truth.w * (1.0 + rng.uniform(-scale, scale))
    cx = truth.x + truth.w / 2.0 + rng.uniform(-pos, pos) * truth.w
    cy = truth.y + truth.h / 2.0 + rng.uniform(-pos, pos) * truth.h
    return Rect(int(round(cx - s / 2)), int(round(cy - s / 2)), int(round(s)), int(round(s)))


def eye_rois(state: str, n: int, rng: np.random.Generator, night: bool = False, side_range=(120, 180), pos: float = 0.02, scale: float = 0.04):
    """Eye ROIs (200x70) of rendered faces, boxed with a little detector-like error."""
    from .haar.detect import select_eye_roi

    out = []
    for _ in range(n):
        side = float(rng.uniform(*side_range))
        pad = int(side * 0.3)
        size = (int(side) + 2 * pad, int(side) + 2 * pad)
        img, truth = driver_frame(rng, (pad, pad, side), FaceStyle.random(rng), state, night, size)
        out.append(select_eye_roi(_jitter_box(truth, rng, pos, scale).clamp(*size), img))
    return out


def roi_eye_crops(state: str, n: int, rng: np.random.Generator, night: bool = False, equalize: bool = False) -> list[np.ndarray]:
    """50x40 eye windows cut from eye ROIs at the nominal eye positions."""
    from .imaging import hist_equalize

    out = []
    for roi in eye_rois(state, (n + 1) // 2, rng, night):
        if equalize:
            roi = hist_equalize(roi)
        for x, y in ROI_EYE_ORIGINS.values():
            out.append(roi[y : y + EYE_H, x : x + EYE_W].copy())
    return out[:n]


# ---------------------------------------------------------------------------
# toy eye cascades for the day-haar mode

EYE_BASE = (10, 8)


def _roi_eye_boxes() -> list[Rect]:
    return [Rect(x, y, EYE_W, EYE_H) for x, y in ROI_EYE_ORIGINS.values()]


def _cut(img: np.ndarray, r: Rect, base=EYE_BASE) -> np.ndarray:
    from .imaging import resize

    r = r.clamp(img.shape[1], img.shape[0])
    return resize(img[r.y : r.y + r.h, r.x : r.x + r.w], *base)


def eye_window_samples(state: str, n: int, rng: np.random.Generator, jitter: float = 3.0, scale=(0.85, 1.15)) -> list[np.ndarray]:
    """Base-sized eye windows cut from ROIs with position and scale jitter."""
    out = []
    while len(out) < n:
        roi = eye_rois(state, 1, rng)[0]
        for box in _roi_eye_boxes():
            s = float(rng.uniform(*scale))
            w, h = EYE_W * s, EYE_H * s
            cx = box.x + box.w / 2 + rng.uniform(-jitter, jitter)
            cy = box.y + box.h / 2 + rng.uniform(-jitter, jitter)
            out.append(_cut(roi, Rect(int(round(cx - w / 2)), int(round(cy - h / 2)), int(round(w)), int(round(h)))))
    return out[:n]


def mine_eye_negatives(cascade, state: str, n: int, rng: np.random.Generator, per_roi: int = 20) -> list[np.ndarray]:
    """Windows of eye ROIs the partial ``cascade`` accepts that are not a ``state`` eye.

    ROIs of both eye states are used; in a ROI of the target state, windows
    overlapping either eye by IoU >= 0.3 are skipped.
    """
    from .haar.detect import EYE_MIN_WINDOW, DetectParams, raw_hits
    from .imaging import iou

    bw, bh = EYE_BASE
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < n and attempts < 2000:
        attempts += 1
        roi_state = "open" if rng.random() < 0.5 else "closed"
        roi = eye_rois(roi_state, 1, rng)[0]
        if cascade is None:
            rects = []
            for _ in range(per_roi):
                w = int(rng.integers(EYE_MIN_WINDOW, 90))
                h = max(bh, int(round(w * bh / bw)))
                if h > roi.shape[0]:
                    continue
                rects.append(Rect(int(rng.integers(0, roi.shape[1] - w + 1)), int(rng.integers(0, roi.shape[0] - h + 1)), w, h))
        else:
            hits = raw_hits(cascade, roi, DetectParams(window_stride=1, min_window=EYE_MIN_WINDOW))
            rects = [r for r, _ in hits]
            if len(rects) > per_roi:
                rects = [rects[i] for i in sorted(rng.choice(len(rects), per_roi, replace=False))]
        for r in rects:
            if roi_state == state and any(iou(r, e) >= 0.3 for e in _roi_eye_boxes()):
                continue
            out.append(_cut(roi, r))
            if len(out) >= n:
                break
    return out


def train_eye_cascade(state: str, seed: int = 0, stage_specs=(3, 6, 10, 14, 18, 22), n_pos: int = 400, n_neg: int = 800):
    """Toy cascade that fires on eyes in ``state`` and rejects the other state."""
    from .haar.features import enumerate_features
    from .haar.train import build_cascade

    rng = np.random.default_rng(seed)
    other = "closed" if state == "open" else "open"
    pos = eye_window_samples(state, n_pos, rng)
    neg = eye_window_samples(other, n_neg // 2, rng, jitter=4.0, scale=(0.7, 1.4)) + mine_eye_negatives(None, state, n_neg // 2, rng)
    return build_cascade(
        pos,
        neg,
        enumerate_features(*EYE_BASE),
        stage_specs,
        refill=lambda c, k: mine_eye_negatives(c, state, k, rng),
        min_negatives=n_neg,
    )


# ---------------------------------------------------------------------------
# toy eye models for the day-pca and night-lbp modes

TOY_MODEL_FILES = {"eigen": "eye_day.eigen", "nir": "eye_nir.lbpeigen", "svm": "eye_state.svm"}


def toy_eye_models(out_dir, seed: int = 0, n_per_class: int = 150, k_day: int = 20) -> dict[str, Path]:
    """Train and save the day eigen-eye models, the NIR model and its SVM.

    Training crops come from rendered faces boxed with detector-like error,
    so the models see the same eye placement the pipeline produces.
    """
    from . import eigen, lbp, svm

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = {k: out_dir / v for k, v in TOY_MODEL_FILES.items()}

    day = [roi_eye_crops(s, n_per_class, rng, equalize=True) for s in ("open", "closed")]
    eigen.save_class_models(paths["eigen"], eigen.train_class_models(eigen.eye_vectors(day[0]), eigen.eye_vectors(day[1]), k_day))

    night = [roi_eye_crops(s, n_per_class, rng, night=True) for s in ("open", "closed")]
    nir = lbp.train_nir(night[0] + night[1])
    lbp.save_nir(paths["nir"], nir)
    w = nir.eigen.project(np.vstack([lbp.crop_descriptor(c) for c in night[0] + night[1]]))
    y = np.r_[np.ones(len(night[0])), -np.ones(len(night[1]))]
    svm.save_model(paths["svm"], svm.train(w, y, svm.Kernel.polynomial(), svm.TrainConfig(C=1.0), standardize=True))
    return paths
