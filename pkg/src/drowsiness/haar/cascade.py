"""Boosted stump stages, the cascade container and its text file format.

File layout (one record per line, decimal numbers)::

    HAARCASCADE v1 <base_w> <base_h> <variance_normalize:0|1> <n_stages>
    STAGE <n_stumps> <threshold>
    STUMP <vote_weight> <threshold> <polarity> <n_rects>
    RECT <x> <y> <w> <h> <weight>
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..imaging import Rect, window_std
from .features import HaarFeature, eval_feature


class CascadeFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Stump:
    feature: HaarFeature
    threshold: float
    polarity: int
    vote: float

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")
        if not self.vote > 0:
            raise ValueError("vote weight must be positive")

    def fires(self, value):
        """Vote condition ``polarity * value < polarity * threshold``."""
        return self.polarity * value < self.polarity * self.threshold


@dataclass(frozen=True)
class Stage:
    stumps: tuple[Stump, ...]
    threshold: float

    def __post_init__(self):
        if not self.stumps:
            raise ValueError("a stage needs at least one stump")


@dataclass(frozen=True)
class Cascade:
    base_width: int
    base_height: int
    stages: tuple[Stage, ...]
    variance_normalize: bool = False

    def __post_init__(self):
        if not self.stages:
            raise ValueError("a cascade needs at least one stage")
        if self.base_width < 8 or self.base_height < 8:
            raise ValueError("base window must be at least 8x8")
        for st in self.stages:
            for s in st.stumps:
                if not s.feature.fits(self.base_width, self.base_height):
                    raise ValueError("feature rectangle outside the base window")

    @property
    def base_size(self) -> tuple[int, int]:
        return (self.base_width, self.base_height)

    @property
    def n_stumps(self) -> int:
        return sum(len(s.stumps) for s in self.stages)


@dataclass
class EvalCounter:
    """Instrumentation for cascade evaluation cost."""

    windows: int = 0
    stumps: int = 0
    stages: int = 0
    per_window: list = field(default_factory=list)

    def reset(self):
        self.windows = self.stumps = self.stages = 0
        self.per_window.clear()


def eval_cascade(
    c: Cascade,
    ii: np.ndarray,
    window: Rect,
    sq_ii: np.ndarray | None = None,
    counter: EvalCounter | None = None,
) -> tuple[bool, float]:
    """Run the stages in order on one window.

    Returns ``(passed, score)`` where ``score`` is the vote margin of the last
    stage evaluated. Evaluation stops at the first failing stage.
    """
    window = Rect(*window)
    scale_area = (c.base_width * c.base_height) / (window.w * window.h)
    std = 1.0
    if c.variance_normalize:
        if sq_ii is None:
            raise ValueError("cascade needs a squared integral image for variance normalization")
        std = max(window_std(ii, sq_ii, window), 1.0)
    evaluated = 0
    margin = 0.0
    passed = True
    if counter is not None:
        counter.windows += 1
    for stage in c.stages:
        votes = 0.0
        for s in stage.stumps:
            v = eval_feature(ii, s.feature, window, c.base_size) * scale_area / std
            if s.fires(v):
                votes += s.vote
            evaluated += 1
        if counter is not None:
            counter.stages += 1
        margin = votes - stage.threshold
        if votes < stage.threshold:
            passed = False
            break
    if counter is not None:
        counter.stumps += evaluated
        counter.per_window.append(evaluated)
    return passed, margin


def _fmt(v: float) -> str:
    if v == np.inf:
        return "inf"
    if v == -np.inf:
        return "-inf"
    return repr(float(v))


def dumps(c: Cascade) -> str:
    lines = [f"HAARCASCADE v1 {c.base_width} {c.base_height} {int(c.variance_normalize)} {len(c.stages)}"]
    for st in c.stages:
        lines.append(f"STAGE {len(st.stumps)} {_fmt(st.threshold)}")
        for s in st.stumps:
            lines.append(f"STUMP {_fmt(s.vote)} {_fmt(s.threshold)} {s.polarity} {len(s.feature.rects)}")
            for r, wt in s.feature.rects:
                lines.append(f"RECT {r.x} {r.y} {r.w} {r.h} {_fmt(wt)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Cascade:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    pos = 0

    def take(tag: str, n: int) -> list[str]:
        nonlocal pos
        if pos >= len(rows):
            raise CascadeFormatError(f"unexpected end of file, wanted {tag}")
        row = rows[pos]
        if row[0] != tag or len(row) != n + 1:
            raise CascadeFormatError(f"line {pos + 1}: expected {tag} with {n} fields, got {' '.join(row)!r}")
        pos += 1
        return row[1:]

    try:
        head = take("HAARCASCADE", 5)
        if head[0] != "v1":
            raise CascadeFormatError(f"unsupported cascade version {head[0]}")
        bw, bh, vn, ns = int(head[1]), int(head[2]), int(head[3]), int(head[4])
        stages = []
        for _ in range(ns):
            n_stumps, sthr = take("STAGE", 2)
            stumps = []
            for _ in range(int(n_stumps)):
                vote, thr, pol, nr = take("STUMP", 4)
                rects = []
                for _ in range(int(nr)):
                    x, y, w, h, wt = take("RECT", 5)
                    rects.append((Rect(int(x), int(y), int(w), int(h)), float(wt)))
                stumps.append(Stump(HaarFeature(tuple(rects)), float(thr), int(pol), float(vote)))
            stages.append(Stage(tuple(stumps), float(sthr)))
        if pos != len(rows):
            raise CascadeFormatError(f"trailing content at line {pos + 1}")
        return Cascade(bw, bh, tuple(stages), bool(vn))
    except CascadeFormatError:
        raise
    except ValueError as exc:
        raise CascadeFormatError(str(exc)) from None


def save_cascade(path, c: Cascade) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps(c))


def load_cascade(path) -> Cascade:
    with open(path, encoding="ascii") as fh:
        return loads(fh.read())
