"""End-to-end processing: face search, tracking, eye state and PERCLOS per frame."""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import eigen, lbp, svm
from .haar import (
    DEFAULT_TILTS,
    EYE_MIN_WINDOW,
    Cascade,
    DetectParams,
    Detection,
    detect,
    detect_fast,
    detect_tilted,
    load_cascade,
    select_eye_roi,
    tilted_eye_roi,
)
from .imaging import Rect, as_gray, hist_equalize, iou
from .perclos import CLOSED, OPEN, UNKNOWN, AlarmConfig, FrameRecord, PerclosMonitor, Row, write_csv
from .pgm import list_frames, read_pgm
from .tracker import UNINITIALIZED, Tracker

MODES = ("day-haar", "day-pca", "night-lbp")
DATA_DIR = Path(__file__).parent / "data"


class ConfigError(ValueError):
    """Bad configuration, missing or unreadable model, or unusable input."""


class FrameError(RuntimeError):
    """A frame could not be read or processed mid-stream."""


@dataclass(frozen=True)
class PipelineConfig:
    mode: str
    face_cascade: Path
    perclos_threshold: float
    fps: float = 10.0
    sf: int = 4
    tilt_angles: tuple[float, ...] = DEFAULT_TILTS
    window_seconds: float = 60.0
    slide_seconds: float = 5.0
    min_valid_fraction: float = 0.25
    partial_windows: bool = False
    eye_open_cascade: Path | None = None
    eye_closed_cascade: Path | None = None
    eigen_model: Path | None = None
    nir_model: Path | None = None
    svm_model: Path | None = None
    eye_min_neighbors: int = 3

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose one of {', '.join(MODES)}")
        if not self.fps > 0:
            raise ConfigError("fps must be positive")
        if self.sf < 1:
            raise ConfigError("sf must be >= 1")
        if not 0 < self.perclos_threshold < 1:
            raise ConfigError("PERCLOS threshold must lie strictly between 0 and 1")
        if not self.window_seconds > 0 or not self.slide_seconds > 0:
            raise ConfigError("window and slide lengths must be positive")
        needed = {
            "day-haar": ("eye_open_cascade", "eye_closed_cascade"),
            "day-pca": ("eigen_model",),
            "night-lbp": ("nir_model", "svm_model"),
        }[self.mode]
        for name in ("face_cascade",) + needed:
            if getattr(self, name) is None:
                raise ConfigError(f"mode {self.mode} needs --{name.replace('_', '-')}")


@dataclass(frozen=True)
class Models:
    face: Cascade
    eye_open: Cascade | None = None
    eye_closed: Cascade | None = None
    eigen: eigen.ClassModels | None = None
    nir: lbp.NirEyeModel | None = None
    svm: svm.SvmModel | None = None


def _load(kind: str, path: Path, loader):
    try:
        return loader(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {kind} {path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise ConfigError(f"bad {kind} {path}: {exc}") from None


def load_models(cfg: PipelineConfig) -> Models:
    """Load the face cascade and the eye models of ``cfg.mode`` only."""
    cfg.validate()
    face = _load("face cascade", cfg.face_cascade, load_cascade)
    if cfg.mode == "day-haar":
        return Models(
            face,
            eye_open=_load("open-eye cascade", cfg.eye_open_cascade, load_cascade),
            eye_closed=_load("closed-eye cascade", cfg.eye_closed_cascade, load_cascade),
        )
    if cfg.mode == "day-pca":
        cm = _load("eigen model", cfg.eigen_model, eigen.load_class_models)
        if cm.dim != lbp.EYE_W * lbp.EYE_H:
            raise ConfigError(f"eigen model has dimension {cm.dim}, expected {lbp.EYE_W * lbp.EYE_H} (50x40 crops)")
        return Models(face, eigen=cm)
    nir = _load("NIR model", cfg.nir_model, lbp.load_nir)
    sv = _load("SVM model", cfg.svm_model, svm.load_model)
    if sv.dim != nir.eigen.k:
        raise ConfigError(f"SVM expects {sv.dim} weights but the NIR model yields {nir.eigen.k}")
    return Models(face, nir=nir, svm=sv)


def _pick(dets: list[Detection]) -> Detection:
    """Largest box; ties go to the higher score, then to the earlier detection."""
    return max(enumerate(dets), key=lambda t: (t[1].rect.area, t[1].score, -t[0]))[1]


@dataclass
class FrameStats:
    tilted_fallbacks: int = 0


class FrameProcessor:
    """Per-stream state (tracker) plus the loaded models."""

    def __init__(self, cfg: PipelineConfig, models: Models, frame_size: tuple[int, int]):
        self.cfg = cfg
        self.models = models
        self.frame_size = frame_size
        self.tracker = Tracker(frame_size)
        self.params = DetectParams(sf=cfg.sf, tilt_angles=tuple(cfg.tilt_angles))
        self.eye_params = DetectParams(window_stride=1, min_window=EYE_MIN_WINDOW, min_neighbors=cfg.eye_min_neighbors)
        self.stats = FrameStats()

    def find_face(self, frame: np.ndarray) -> Detection | None:
        roi = self.tracker.search_roi() if self.tracker.mode != UNINITIALIZED else self.tracker.full_frame()
        patch = frame[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w]
        try:
            dets = detect_fast(self.models.face, patch, self.params)
        except ValueError:
            # ROI too small for this scale factor
            dets = []
        dets = [Detection(Rect(d.rect.x + roi.x, d.rect.y + roi.y, d.rect.w, d.rect.h), d.score, members=d.members) for d in dets]
        if not dets:
            self.stats.tilted_fallbacks += 1
            dets = detect_tilted(self.models.face, frame, self.params)
        return _pick(dets) if dets else None

    def eye_state(self, frame: np.ndarray, face: Detection) -> str | None:
        try:
            roi = tilted_eye_roi(frame, face) if face.tilt else select_eye_roi(face.rect, frame)
        except ValueError:
            return None
        m = self.models
        if self.cfg.mode == "day-haar":
            # closed first, then open
            if detect(m.eye_closed, roi, self.eye_params):
                return CLOSED
            if detect(m.eye_open, roi, self.eye_params):
                return OPEN
            return None
        if self.cfg.mode == "day-pca":
            hit = eigen.detect_eye_pca(m.eigen, hist_equalize(roi))
            return None if hit is None else hit[1]
        match = lbp.locate_eye_nir(m.nir, roi)
        if match is None:
            return None
        return svm.classify_eye_state(m.svm, match.weights)

    def process(self, index: int, frame) -> FrameRecord:
        frame = as_gray(frame)
        if (frame.shape[1], frame.shape[0]) != self.frame_size:
            raise FrameError(f"frame {index} is {frame.shape[1]}x{frame.shape[0]}, expected {self.frame_size[0]}x{self.frame_size[1]}")
        face = self.find_face(frame)
        self.tracker.step(None if face is None else face.rect)
        state = None if face is None else self.eye_state(frame, face)
        return FrameRecord(index, index / self.cfg.fps, face is not None, state is not None, state or UNKNOWN)


class Session:
    """One stream: the first frame fixes the size, then frames go through in order."""

    def __init__(self, cfg: PipelineConfig, models: Models):
        self.cfg = cfg
        self.models = models
        self.monitor = PerclosMonitor(
            AlarmConfig(cfg.perclos_threshold, cfg.min_valid_fraction), cfg.window_seconds, cfg.slide_seconds, cfg.partial_windows
        )
        self.processor: FrameProcessor | None = None
        self.frames = 0

    def push(self, frame) -> Row:
        frame = as_gray(frame)
        if self.processor is None:
            self.processor = FrameProcessor(self.cfg, self.models, (frame.shape[1], frame.shape[0]))
        row = self.monitor.push(self.processor.process(self.frames, frame))
        self.frames += 1
        return row


def read_frames(paths: list[Path]) -> Iterator[np.ndarray]:
    for i, p in enumerate(paths):
        try:
            yield read_pgm(p)
        except (OSError, ValueError) as exc:
            raise FrameError(f"frame {i} ({p.name}): {exc}") from None


@dataclass(frozen=True)
class RunResult:
    frames: int
    windows: int
    alarms: int

    def summary(self) -> str:
        return f"PERCLOS windows: {self.windows}, alarms: {self.alarms}"


def run(cfg: PipelineConfig, frames: Iterable, output: Path | str, models: Models | None = None) -> RunResult:
    """Process ``frames`` and write the CSV to ``output``.

    Rows are kept in memory and written only once every frame succeeded, so
    a failed run leaves no CSV behind.
    """
    models = models or load_models(cfg)
    output = Path(output)
    session = Session(cfg, models)
    rows = [session.push(f) for f in frames]
    if not rows:
        raise ConfigError("no frames to process")
    fd, tmp = tempfile.mkstemp(prefix=".perclos-", suffix=".csv", dir=output.parent)
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="") as fh:
            write_csv(fh, rows)
        os.replace(tmp, output)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return RunResult(session.frames, session.monitor.windows, session.monitor.alarms)


def run_directory(cfg: PipelineConfig, input_dir, output, models: Models | None = None) -> RunResult:
    try:
        paths = list_frames(input_dir)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    if not paths:
        raise ConfigError(f"no .pgm frames in {input_dir}")
    return run(cfg, read_frames(paths), output, models)


# --- scale-factor benchmark ------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    sf: int
    ms_per_frame: float
    fps: float
    detections: int
    agreement: float


def frames_agree(reference: list[Rect], other: list[Rect], min_iou: float = 0.5) -> bool:
    """Same number of boxes, each reference box matched one-to-one at IoU >= ``min_iou``."""
    if len(reference) != len(other):
        return False
    free = list(other)
    for r in reference:
        best = max(range(len(free)), key=lambda j: iou(r, free[j]), default=None)
        if best is None or iou(r, free[best]) < min_iou:
            return False
        free.pop(best)
    return True


def bench(cascade: Cascade, frames: list[np.ndarray], sfs: Iterable[int], params: DetectParams = DetectParams()) -> list[BenchRow]:
    """Time face detection per scale factor and compare boxes against sf=1."""
    sfs = list(sfs)
    if not frames:
        raise ConfigError("benchmark needs at least one frame")
    results: dict[int, tuple[float, list[list[Rect]]]] = {}
    for sf in sorted(set(sfs) | {1}):
        p = DetectParams(params.scale_step, params.min_window, params.window_stride, params.min_neighbors, sf, params.tilt_angles, params.group_iou)
        boxes = []
        t0 = time.perf_counter()
        for f in frames:
            try:
                boxes.append([d.rect for d in detect_fast(cascade, f, p)])
            except ValueError:
                boxes.append([])
        results[sf] = ((time.perf_counter() - t0) / len(frames), boxes)
    ref = results[1][1]
    rows = []
    for sf in sfs:
        dt, boxes = results[sf]
        agree = sum(frames_agree(a, b) for a, b in zip(ref, boxes)) / len(frames)
        rows.append(BenchRow(sf, dt * 1000.0, 1.0 / dt if dt > 0 else float("inf"), sum(len(b) for b in boxes), agree))
    return rows


def write_bench_csv(fh, rows: list[BenchRow]) -> None:
    fh.write("sf,ms_per_frame,fps,detections,agreement\n")
    for r in rows:
        fh.write(f"{r.sf},{r.ms_per_frame:.3f},{r.fps:.3f},{r.detections},{r.agreement:.4f}\n")


def bundled(name: str) -> Path:
    """Path of a toy model shipped with the package."""
    return DATA_DIR / name
