"""Command line: ``detect``, ``bench`` and ``train``.

Exit codes: 0 success, 1 configuration or input error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import eigen, lbp, svm
from .haar import DEFAULT_TILTS, load_cascade
from .imaging import as_gray
from .pgm import iter_raw_frames, list_frames, read_pgm
from .pipeline import MODES, ConfigError, FrameError, PipelineConfig, bench, run, run_directory, write_bench_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("scale factors must be positive integers")
    return vals


def _angles(text: str) -> tuple[float, ...]:
    try:
        return tuple(math.radians(float(t)) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated degrees, got {text!r}") from None


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("frame size must be positive")
    return w, h


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="drowsiness", description="Driver eye-closure monitoring on grayscale frame sequences.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="run the per-frame pipeline and write a PERCLOS CSV")
    d.add_argument("--mode", required=True, choices=MODES)
    d.add_argument("--input", required=True, help="directory of PGM frames, or - for raw frames on stdin")
    d.add_argument("--raw-size", type=_size, help="WxH of raw 8-bit frames read from stdin")
    d.add_argument("--fps", type=float, default=10.0, help="nominal frame rate used for timestamps")
    d.add_argument("--sf", type=int, default=4, help="downsampling factor for face detection")
    d.add_argument("--perclos-threshold", type=float, required=True)
    d.add_argument("--window-seconds", type=float, default=60.0)
    d.add_argument("--slide-seconds", type=float, default=5.0)
    d.add_argument("--min-valid-fraction", type=float, default=0.25)
    d.add_argument("--partial-windows", action="store_true", help="judge windows shorter than --window-seconds at stream start")
    d.add_argument("--tilt-angles", type=_angles, default=DEFAULT_TILTS, help="rotation branches in degrees, in search order")
    d.add_argument("--face-cascade", type=Path, required=True)
    d.add_argument("--eye-open-cascade", type=Path)
    d.add_argument("--eye-closed-cascade", type=Path)
    d.add_argument("--eigen-model", type=Path)
    d.add_argument("--nir-model", type=Path)
    d.add_argument("--svm-model", type=Path)
    d.add_argument("--output", type=Path, required=True)

    b = sub.add_parser("bench", help="time face detection over a set of scale factors")
    b.add_argument("--input", required=True, type=Path)
    b.add_argument("--face-cascade", type=Path, required=True)
    b.add_argument("--sf", type=_int_list, default=[1, 2, 4, 6, 8])
    b.add_argument("--output", type=Path, required=True)

    t = sub.add_parser("train", help="train eye models from directories of 50x40 PGM crops")
    t.add_argument("target", choices=("eigen-day", "nir", "svm"))
    t.add_argument("--open", required=True, type=Path)
    t.add_argument("--closed", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--k", type=int, help="subspace size (default 20 for eigen-day, 40 for nir)")
    t.add_argument("--nir-model", type=Path, help="NIR model whose projection feeds the SVM (svm only)")
    t.add_argument("--kernel", default="polynomial:3:1", help="linear | quadratic:C0 | polynomial:D:C0 | rbf:GAMMA")
    t.add_argument("--C", type=float, default=1.0)
    t.add_argument("--validate", type=Path, help="directory with open/ and closed/ crops for a held-out accuracy")
    return p


def load_crops(directory: Path, size=(lbp.EYE_W, lbp.EYE_H)) -> list[np.ndarray]:
    try:
        paths = list_frames(directory)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    crops = []
    for p in paths:
        try:
            img = read_pgm(p)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{p}: {exc}") from None
        if (img.shape[1], img.shape[0]) != size:
            raise ConfigError(f"{p}: crop is {img.shape[1]}x{img.shape[0]}, expected {size[0]}x{size[1]}")
        crops.append(img)
    if not crops:
        raise ConfigError(f"no .pgm crops in {directory}")
    return crops


def _cmd_detect(a) -> int:
    cfg = PipelineConfig(
        mode=a.mode,
        face_cascade=a.face_cascade,
        perclos_threshold=a.perclos_threshold,
        fps=a.fps,
        sf=a.sf,
        tilt_angles=a.tilt_angles,
        window_seconds=a.window_seconds,
        slide_seconds=a.slide_seconds,
        min_valid_fraction=a.min_valid_fraction,
        partial_windows=a.partial_windows,
        eye_open_cascade=a.eye_open_cascade,
        eye_closed_cascade=a.eye_closed_cascade,
        eigen_model=a.eigen_model,
        nir_model=a.nir_model,
        svm_model=a.svm_model,
    )
    if a.input == "-":
        if a.raw_size is None:
            raise ConfigError("--input - needs --raw-size WxH")
        result = run(cfg, iter_raw_frames(sys.stdin.buffer, *a.raw_size), a.output)
    else:
        result = run_directory(cfg, a.input, a.output)
    print(result.summary())
    return EXIT_OK


def _cmd_bench(a) -> int:
    try:
        cascade = load_cascade(a.face_cascade)
    except OSError as exc:
        raise ConfigError(f"cannot read face cascade {a.face_cascade}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise ConfigError(f"bad face cascade {a.face_cascade}: {exc}") from None
    try:
        paths = list_frames(a.input)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    if not paths:
        raise ConfigError(f"no .pgm frames in {a.input}")
    frames = [read_pgm(p) for p in paths]
    rows = bench(cascade, frames, a.sf)
    with open(a.output, "w", encoding="ascii", newline="") as fh:
        write_bench_csv(fh, rows)
    for r in rows:
        print(f"sf={r.sf}: {r.ms_per_frame:.1f} ms/frame, {r.fps:.1f} fps, {r.detections} detections, agreement {r.agreement:.1%}")
    return EXIT_OK


def _validation_sets(directory: Path | None):
    if directory is None:
        return None
    return load_crops(directory / "open"), load_crops(directory / "closed")


def _train_eigen(a, open_crops, closed_crops) -> None:
    k = a.k or 20
    try:
        cm = eigen.train_class_models(eigen.eye_vectors(open_crops), eigen.eye_vectors(closed_crops), k)
    except eigen.EigenError as exc:
        raise ConfigError(str(exc)) from None
    eigen.save_class_models(a.out, cm)
    again = eigen.load_class_models(a.out)
    for label in (eigen.OPEN, eigen.CLOSED):
        m = again.models[label]
        print(f"{label}: K={m.k}, tau={again.thresholds[label]:.3f}, eigenvalues {' '.join(f'{v:.4g}' for v in m.eigvals[:8])} ...")
    val = _validation_sets(a.validate)
    if val:
        hits = total = 0
        for label, crops in zip((eigen.OPEN, eigen.CLOSED), val):
            for c in crops:
                hits += again.classify(as_gray(c).astype(float).ravel()) == label
                total += 1
        print(f"held-out accuracy: {hits / total:.1%} ({hits}/{total})")


def _train_nir(a, open_crops, closed_crops) -> None:
    try:
        m = lbp.train_nir(open_crops + closed_crops, k=a.k or lbp.NIR_K)
    except eigen.EigenError as exc:
        raise ConfigError(str(exc)) from None
    lbp.save_nir(a.out, m)
    print(f"NIR model: K={m.eigen.k}, tau={m.tau:.3f}, eigenvalues {' '.join(f'{v:.4g}' for v in m.eigen.eigvals[:8])} ...")


def _train_svm(a, open_crops, closed_crops) -> None:
    if a.nir_model is None:
        raise ConfigError("train svm needs --nir-model")
    try:
        nir = lbp.load_nir(a.nir_model)
        kernel = svm.Kernel.parse(a.kernel)
    except OSError as exc:
        raise ConfigError(f"cannot read NIR model {a.nir_model}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    def weights(crops):
        return nir.eigen.project(np.vstack([lbp.crop_descriptor(c) for c in crops]))

    X = np.vstack([weights(open_crops), weights(closed_crops)])
    y = np.r_[np.ones(len(open_crops)), -np.ones(len(closed_crops))]
    try:
        model = svm.train(X, y, kernel, svm.TrainConfig(C=a.C), standardize=True)
    except svm.ConvergenceError as exc:
        print(f"warning: {exc}; saving the best-effort model", file=sys.stderr)
        model = exc.model
    except svm.SvmError as exc:
        raise ConfigError(str(exc)) from None
    svm.save_model(a.out, model)
    acc = float(np.mean(model.classify(X) == y))
    print(f"SVM: {len(model.alpha)} support vectors, sum(alpha*y)={float(model.alpha @ model.y):.3g}, training accuracy {acc:.1%}")
    val = _validation_sets(a.validate)
    if val:
        Xv = np.vstack([weights(val[0]), weights(val[1])])
        yv = np.r_[np.ones(len(val[0])), -np.ones(len(val[1]))]
        print(f"held-out accuracy: {float(np.mean(model.classify(Xv) == yv)):.1%}")


def _cmd_train(a) -> int:
    open_crops, closed_crops = load_crops(a.open), load_crops(a.closed)
    {"eigen-day": _train_eigen, "nir": _train_nir, "svm": _train_svm}[a.target](a, open_crops, closed_crops)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        return {"detect": _cmd_detect, "bench": _cmd_bench, "train": _cmd_train}[a.command](a)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FrameError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
