"""How far can the frame be shrunk before face detection suffers?

Detection runs on the frame downsampled by an integer scale factor (SF), and
boxes are mapped back up. Fewer pixels means fewer windows, so time drops
quickly; once faces shrink toward the cascade's base window, boxes start to
disagree with the full-resolution result.
"""

import numpy as np

from drowsiness import synth
from drowsiness.haar import load_cascade
from drowsiness.pipeline import DATA_DIR, bench

frames, truth = synth.face_corpus(60, np.random.default_rng(0))
print(f"{len(frames)} frames of 640x480, faces {min(t.w for t in truth)}-{max(t.w for t in truth)} px wide\n")
rows = bench(load_cascade(DATA_DIR / "face.cascade"), frames, [1, 2, 4, 6, 8, 10])
print(" sf   ms/frame     fps   agreement with sf=1")
for r in rows:
    bar = "#" * int(round(r.agreement * 30))
    print(f"{r.sf:3d} {r.ms_per_frame:10.1f} {r.fps:7.1f}   {r.agreement:6.1%} {bar}")
