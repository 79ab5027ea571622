"""Finding faces that lean over.

The cascade only knows upright faces. When the upright search finds nothing,
the frame is rotated by each candidate angle in turn and searched again; the
first angle that yields a face wins, and its box is rotated back into frame
coordinates.
"""

import math

import numpy as np

from drowsiness import synth
from drowsiness.haar import DetectParams, detect_tilted, load_cascade
from drowsiness.imaging import iou
from drowsiness.pipeline import DATA_DIR

cascade = load_cascade(DATA_DIR / "face.cascade")
print(" tilt   found at   IoU with truth")
for deg in (0, 20, -20, 40, -40, 60, -60, 70, -70, 85):
    img, truth = synth.face_frame(np.random.default_rng(900 + deg), faces=((260, 170, 110),), tilt=math.radians(deg))
    dets = detect_tilted(cascade, img, DetectParams(sf=2))
    if not dets:
        print(f"{deg:+5d}   nothing")
        continue
    best = max(dets, key=lambda d: iou(d.rect, truth[0]))
    print(f"{deg:+5d}   {math.degrees(best.tilt):+6.0f}     {iou(best.rect, truth[0]):.2f}")
print("\n85 degrees lies beyond the last search branch (70), so it may be missed.")
