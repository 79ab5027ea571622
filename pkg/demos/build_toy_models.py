"""Build everything the CLI needs from rendered data.

Writes, under OUT (default ./toy):
  models/   eye_day.eigen, eye_nir.lbpeigen, eye_state.svm
  crops/    50x40 training crops, day/ and night/, each with open/ and closed/
  day/      a 60-frame daytime driver sequence (PGM)
  night/    the same schedule under NIR lighting

The three cascades already ship with the package. Pass --cascades to
retrain them as well (several minutes on one core).

    python3 demos/build_toy_models.py toy
    drowsiness detect --mode day-pca --input toy/day --eigen-model toy/models/eye_day.eigen \
        --face-cascade src/drowsiness/data/face.cascade --perclos-threshold 0.15 \
        --fps 2 --window-seconds 10 --slide-seconds 2 --output day.csv
"""

import argparse
import time
from pathlib import Path

import numpy as np

from drowsiness import synth
from drowsiness.haar import save_cascade
from drowsiness.pgm import write_frames, write_pgm


def step(msg):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out", nargs="?", default="toy", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cascades", action="store_true", help="also retrain the face and eye cascades")
    a = ap.parse_args()

    step("training eye models on rendered eye regions")
    paths = synth.toy_eye_models(a.out / "models", seed=a.seed)
    for name, p in paths.items():
        print(f"    {name:6s} -> {p}")

    rng = np.random.default_rng(a.seed + 1)
    step("writing training crops, usable with `drowsiness train`")
    for light in ("day", "night"):
        for state in ("open", "closed"):
            d = a.out / "crops" / light / state
            d.mkdir(parents=True, exist_ok=True)
            for i, crop in enumerate(synth.roi_eye_crops(state, 60, rng, night=light == "night", equalize=light == "day")):
                write_pgm(d / f"{state}_{i:03d}.pgm", crop)

    # one eye schedule, so both sequences tell the same story
    states = synth.eye_schedule(60, rng, closed_fraction=0.25, blink=3)
    for light in ("day", "night"):
        step(f"rendering the {light} driver sequence")
        frames, _, _ = synth.driver_sequence(60, np.random.default_rng(a.seed + 2), night=light == "night", states=states, absent=(20, 21))
        write_frames(a.out / light, frames)
    print(f"    eye schedule: {''.join('x' if s == 'closed' else '.' for s in states)}  (x = closed, frames 20-21 have no face)")

    if a.cascades:
        cdir = a.out / "cascades"
        cdir.mkdir(exist_ok=True)
        step("training the face cascade (slow)")
        save_cascade(cdir / "face.cascade", synth.train_face_cascade(seed=a.seed))
        for state in ("open", "closed"):
            step(f"training the {state}-eye cascade")
            save_cascade(cdir / f"eye_{state}.cascade", synth.train_eye_cascade(state, seed=a.seed))
    step("done")


if __name__ == "__main__":
    main()
