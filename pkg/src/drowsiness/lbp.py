"""Local binary patterns, block-histogram descriptors and the NIR eye localizer."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import EigenError, EigenModel, ModelFormatError, pca_train, read_model, write_model
from .imaging import Rect, as_gray

EYE_W, EYE_H = 50, 40
NIR_K = 40

# (dx, dy) of the 3x3 neighbours, bit 0 first: top-left, then clockwise
_SQUARE_RING = ((-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0))


@dataclass(frozen=True)
class LbpParams:
    """Neighbour count ``P`` on a circle of radius ``R``.

    With ``interpolate`` off and ``P=8, R=1`` the neighbours are the eight
    pixels of the 3x3 ring, weighted 1 at the top-left and doubling
    clockwise. Otherwise neighbour ``n`` sits at
    ``(-R sin(2 pi n / P), R cos(2 pi n / P))``, sampled bilinearly when
    ``interpolate`` is set and rounded to the nearest pixel when not.
    """

    P: int = 8
    R: float = 1.0
    interpolate: bool = False

    def __post_init__(self):
        if self.P < 4:
            raise ValueError("P must be >= 4")
        if not self.R > 0:
            raise ValueError("R must be positive")

    @property
    def border(self) -> int:
        return int(math.ceil(self.R - 1e-9))

    def offsets(self) -> list[tuple[float, float]]:
        if self.P == 8 and self.R == 1 and not self.interpolate:
            return [(float(dx), float(dy)) for dx, dy in _SQUARE_RING]
        out = []
        for n in range(self.P):
            a = 2.0 * math.pi * n / self.P
            dx, dy = -self.R * math.sin(a), self.R * math.cos(a)
            # snap values that are integers up to trig rounding
            dx = round(dx) if abs(dx - round(dx)) < 1e-9 else dx
            dy = round(dy) if abs(dy - round(dy)) < 1e-9 else dy
            if not self.interpolate:
                dx, dy = float(round(dx)), float(round(dy))
            out.append((dx, dy))
        return out


def _neighbour_diff(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Neighbour minus centre at integer centres ``(xs, ys)``.

    Differences are interpolated from integer differences, so adding a
    constant to the image leaves them unchanged bit for bit.
    """
    centre = img[ys, xs]
    x0, y0 = math.floor(dx), math.floor(dy)
    fx, fy = dx - x0, dy - y0
    total = np.zeros(xs.shape, dtype=np.float64)
    for ox, oy, wt in ((x0, y0, (1 - fx) * (1 - fy)), (x0 + 1, y0, fx * (1 - fy)), (x0, y0 + 1, (1 - fx) * fy), (x0 + 1, y0 + 1, fx * fy)):
        if wt == 0.0:
            continue
        total += wt * (img[ys + oy, xs + ox] - centre)
    return total


def lbp_code(img, x: int, y: int, p: LbpParams = LbpParams()) -> int:
    img = as_gray(img).astype(np.int64)
    b = p.border
    h, w = img.shape
    if not (b <= x < w - b and b <= y < h - b):
        raise IndexError(f"({x}, {y}) is closer than {b} px to the border of a {w}x{h} image")
    xs, ys = np.array([x]), np.array([y])
    code = 0
    for n, (dx, dy) in enumerate(p.offsets()):
        if _neighbour_diff(img, xs, ys, dx, dy)[0] >= 0:
            code |= 1 << n
    return code


def lbp_image(img, p: LbpParams = LbpParams()) -> np.ndarray:
    """Codes at every pixel at least ``ceil(R)`` from the border."""
    img = as_gray(img).astype(np.int64)
    b = p.border
    h, w = img.shape
    if h <= 2 * b or w <= 2 * b:
        raise ValueError(f"{w}x{h} image is too small for radius {p.R}")
    ys, xs = np.mgrid[b : h - b, b : w - b]
    code = np.zeros(ys.shape, dtype=np.int64)
    for n, (dx, dy) in enumerate(p.offsets()):
        code |= (_neighbour_diff(img, xs, ys, dx, dy) >= 0).astype(np.int64) << n
    dtype = np.uint8 if p.P <= 8 else np.uint32 if p.P <= 32 else np.uint64
    return code.astype(dtype)


def lbp_image_padded(img, p: LbpParams = LbpParams()) -> np.ndarray:
    """Codes for every pixel of ``img``, replicating edge pixels beyond the border."""
    img = as_gray(img)
    return lbp_image(np.pad(img, p.border, mode="edge"), p)


@dataclass(frozen=True)
class BlockSpec:
    block_w: int = 5
    block_h: int = 4
    bins: int = 16
    levels: int = 256

    def __post_init__(self):
        if self.block_w < 1 or self.block_h < 1:
            raise ValueError("block sizes must be positive")
        if self.bins < 1 or self.levels % self.bins:
            raise ValueError("bins must divide the number of code levels")

    @property
    def bin_width(self) -> int:
        return self.levels // self.bins


def block_histograms(codes: np.ndarray, spec: BlockSpec = BlockSpec()) -> np.ndarray:
    """Per-block code histograms as an array ``(block_rows, block_cols, bins)``.

    Rows and columns that do not fill a whole block are dropped.
    """
    codes = np.asarray(codes)
    nr, nc = codes.shape[0] // spec.block_h, codes.shape[1] // spec.block_w
    if nr == 0 or nc == 0:
        raise ValueError("code image is smaller than one block")
    bins = codes[: nr * spec.block_h, : nc * spec.block_w].astype(np.int64) // spec.bin_width
    blocks = bins.reshape(nr, spec.block_h, nc, spec.block_w).transpose(0, 2, 1, 3).reshape(nr, nc, -1)
    flat = (np.arange(nr * nc).reshape(nr, nc, 1) * spec.bins + blocks).ravel()
    return np.bincount(flat, minlength=nr * nc * spec.bins).reshape(nr, nc, spec.bins)


def window_blocks(spec: BlockSpec = BlockSpec(), window=(EYE_W, EYE_H)) -> tuple[int, int]:
    ww, wh = window
    if ww % spec.block_w or wh % spec.block_h:
        raise ValueError(f"window {ww}x{wh} is not a whole number of {spec.block_w}x{spec.block_h} blocks")
    return ww // spec.block_w, wh // spec.block_h


def window_descriptor(grid: np.ndarray, origin: tuple[int, int], spec: BlockSpec = BlockSpec(), window=(EYE_W, EYE_H)) -> np.ndarray:
    """Concatenated block histograms of the window whose top-left pixel is ``origin``.

    Blocks are taken row by row, each contributing its ``bins`` counts.
    """
    x, y = origin
    if x % spec.block_w or y % spec.block_h:
        raise ValueError(f"origin {origin} is not aligned to the {spec.block_w}x{spec.block_h} block grid")
    nbx, nby = window_blocks(spec, window)
    bx, by = x // spec.block_w, y // spec.block_h
    if bx < 0 or by < 0 or by + nby > grid.shape[0] or bx + nbx > grid.shape[1]:
        raise IndexError(f"window at {origin} runs past the block grid")
    return grid[by : by + nby, bx : bx + nbx].reshape(-1).astype(np.float64)


def descriptor(codes: np.ndarray, spec: BlockSpec = BlockSpec()) -> np.ndarray:
    """Descriptor of a window-sized code image, computed from scratch."""
    return block_histograms(codes, spec).reshape(-1).astype(np.float64)


def crop_descriptor(crop, p: LbpParams = LbpParams(), spec: BlockSpec = BlockSpec()) -> np.ndarray:
    return descriptor(lbp_image_padded(crop, p), spec)


@dataclass
class BlockCache:
    """Lazily computed block histograms with hit/miss counters."""

    codes: np.ndarray
    spec: BlockSpec = BlockSpec()
    hits: int = 0
    misses: int = 0
    _store: dict = field(default_factory=dict, repr=False)

    def block(self, bx: int, by: int) -> np.ndarray:
        key = (bx, by)
        if key in self._store:
            self.hits += 1
        else:
            self.misses += 1
            s = self.spec
            patch = self.codes[by * s.block_h : (by + 1) * s.block_h, bx * s.block_w : (bx + 1) * s.block_w]
            self._store[key] = np.bincount(patch.astype(np.int64).ravel() // s.bin_width, minlength=s.bins)
        return self._store[key]

    def descriptor(self, origin: tuple[int, int], window=(EYE_W, EYE_H)) -> np.ndarray:
        x, y = origin
        s = self.spec
        if x % s.block_w or y % s.block_h:
            raise ValueError(f"origin {origin} is not aligned to the block grid")
        nbx, nby = window_blocks(s, window)
        bx, by = x // s.block_w, y // s.block_h
        return np.concatenate([self.block(bx + i, by + j) for j in range(nby) for i in range(nbx)]).astype(np.float64)


def window_origins(width: int, height: int, stride=(5, 4), window=(EYE_W, EYE_H)) -> list[tuple[int, int]]:
    ww, wh = window
    sx, sy = stride
    return [(x, y) for y in range(0, height - wh + 1, sy) for x in range(0, width - ww + 1, sx)]


# --- NIR eye model ---------------------------------------------------------


@dataclass(frozen=True)
class NirEyeModel:
    eigen: EigenModel
    tau: float
    stride: tuple[int, int] = (5, 4)
    spec: BlockSpec = BlockSpec()
    lbp: LbpParams = LbpParams()

    def __post_init__(self):
        sx, sy = self.stride
        if sx % self.spec.block_w or sy % self.spec.block_h:
            raise ValueError("stride must be a whole number of blocks")


@dataclass
class SearchStats:
    windows: int = 0


@dataclass(frozen=True)
class EyeMatch:
    rect: Rect
    error: float
    weights: np.ndarray


def train_nir(crops, k: int = NIR_K, factor: float = 1.1, percentile: float = 99.0) -> NirEyeModel:
    crops = [as_gray(c) for c in crops]
    if len(crops) < k + 1:
        raise EigenError(f"need at least {k + 1} crops for K={k}, got {len(crops)}")
    for i, c in enumerate(crops):
        if c.shape != (EYE_H, EYE_W):
            raise ValueError(f"crop {i} is {c.shape[1]}x{c.shape[0]}, expected {EYE_W}x{EYE_H}")
    X = np.vstack([crop_descriptor(c) for c in crops])
    model = pca_train(X, k)
    tau = float(np.percentile(model.recon_error(X), percentile)) * factor
    return NirEyeModel(model, tau)


def locate_eye_nir(m: NirEyeModel, roi, stats: SearchStats | None = None) -> EyeMatch | None:
    """Window with the smallest reconstruction error, if it is below ``tau``."""
    roi = as_gray(roi)
    codes = lbp_image_padded(roi, m.lbp)
    grid = block_histograms(codes, m.spec)
    nbx, nby = window_blocks(m.spec)
    step_x, step_y = m.stride[0] // m.spec.block_w, m.stride[1] // m.spec.block_h
    bys = np.arange(0, grid.shape[0] - nby + 1, step_y)
    bxs = np.arange(0, grid.shape[1] - nbx + 1, step_x)
    if bys.size == 0 or bxs.size == 0:
        return None
    # gather every window's blocks at once: (windows, nby, nbx, bins)
    rows = bys[:, None, None, None] + np.arange(nby)[None, None, :, None]
    cols = bxs[None, :, None, None] + np.arange(nbx)[None, None, None, :]
    X = grid[rows, cols].reshape(bys.size * bxs.size, -1).astype(np.float64)
    if stats is not None:
        stats.windows += X.shape[0]
    err = m.eigen.recon_error(X)
    j = int(np.argmin(err))
    if not err[j] < m.tau:
        return None
    by, bx = divmod(j, bxs.size)
    rect = Rect(int(bxs[bx]) * m.spec.block_w, int(bys[by]) * m.spec.block_h, EYE_W, EYE_H)
    return EyeMatch(rect, float(err[j]), m.eigen.project(X[j]))


def detect_eye_nir(m: NirEyeModel, roi, stats: SearchStats | None = None) -> Rect | None:
    hit = locate_eye_nir(m, roi, stats)
    return None if hit is None else hit.rect


def dumps_nir(m: NirEyeModel) -> str:
    buf = io.StringIO()
    buf.write("LBPEIGEN v1\n")
    write_model(buf, m.eigen)
    buf.write(f"STRIDE {m.stride[0]} {m.stride[1]}\n")
    buf.write(f"BLOCK {m.spec.block_w} {m.spec.block_h} {m.spec.bins}\n")
    buf.write(f"THRESHOLD {m.tau:.17g}\n")
    return buf.getvalue()


def loads_nir(text: str) -> NirEyeModel:
    lines = iter([ln for ln in text.splitlines() if ln.strip()])
    if next(lines, "").split() != ["LBPEIGEN", "v1"]:
        raise ModelFormatError("missing LBPEIGEN v1 header")
    eigen = read_model(lines)
    fields = {}
    for ln in lines:
        tag, *rest = ln.split()
        fields[tag] = rest
    try:
        stride = tuple(int(v) for v in fields["STRIDE"])
        bw, bh, bins = (int(v) for v in fields["BLOCK"])
        tau = float(fields["THRESHOLD"][0])
        return NirEyeModel(eigen, tau, stride, BlockSpec(bw, bh, bins))
    except (KeyError, IndexError, ValueError) as exc:
        raise ModelFormatError(f"bad NIR model trailer: {exc}") from None


def save_nir(path, m: NirEyeModel) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps_nir(m))


def load_nir(path) -> NirEyeModel:
    with open(path, encoding="ascii") as fh:
        return loads_nir(fh.read())
