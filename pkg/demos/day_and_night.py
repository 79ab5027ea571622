"""Follow one driver through the three eye-state modes.

A rendered driver keeps the eyes open, then lets them droop shut. The same
story is told in daylight (Haar eye cascades, then eigen-eyes) and under NIR
lighting (block-LBP search with an SVM on the projected weights). Each row
shows the per-frame verdict: '.' open, 'x' closed, '?' no eye, ' ' no face.
"""

import tempfile
from pathlib import Path

import numpy as np

from drowsiness import synth
from drowsiness.perclos import CLOSED, OPEN
from drowsiness.pipeline import DATA_DIR, PipelineConfig, Session, load_models

N = 40
truth = [OPEN] * 24 + [CLOSED] * 16


def strip(records):
    out = []
    for r in records:
        out.append(" " if not r.face_found else {"open": ".", "closed": "x"}.get(r.eye_state, "?"))
    return "".join(out)


print("training toy eye models ...")
models = synth.toy_eye_models(Path(tempfile.mkdtemp()) / "models")

day, _, _ = synth.driver_sequence(N, np.random.default_rng(21), states=truth, absent=(10,))
night, _, _ = synth.driver_sequence(N, np.random.default_rng(22), night=True, states=truth, absent=(10,))

print(f"\n{'truth':10s} {''.join('.' if s == OPEN else 'x' for s in truth)}")
for mode, extra, frames in (
    ("day-haar", dict(eye_open_cascade=DATA_DIR / "eye_open.cascade", eye_closed_cascade=DATA_DIR / "eye_closed.cascade"), day),
    ("day-pca", dict(eigen_model=models["eigen"]), day),
    ("night-lbp", dict(nir_model=models["nir"], svm_model=models["svm"]), night),
):
    cfg = PipelineConfig(
        mode=mode, face_cascade=DATA_DIR / "face.cascade", perclos_threshold=0.3,
        fps=2.0, window_seconds=8.0, slide_seconds=2.0, **extra,
    )  # fmt: skip
    session = Session(cfg, load_models(cfg))
    rows = [session.push(f) for f in frames]
    print(f"{mode:10s} {strip(r.record for r in rows)}")
    judged = [(r.record.timestamp, r.perclos, r.alarm) for r in rows if r.evaluated and r.perclos is not None]
    print(" " * 11 + "  ".join(f"t={t:.0f}s {p:.2f}{'!' if a else ''}" for t, p, a in judged))

print("\nPERCLOS is judged every 2 s over the last 8 s; '!' marks windows above 0.30.")
