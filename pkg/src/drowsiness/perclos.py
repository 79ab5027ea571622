"""PERCLOS bookkeeping: per-frame eye states, sliding windows and the alarm rule."""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from typing import Iterable, TextIO

OPEN, CLOSED, UNKNOWN = "open", "closed", "unknown"
CSV_COLUMNS = ("frame", "timestamp", "face_found", "eye_found", "eye_state", "perclos", "alarm")


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    timestamp: float
    face_found: bool
    eye_found: bool
    eye_state: str = UNKNOWN

    def __post_init__(self):
        if self.eye_state not in (OPEN, CLOSED, UNKNOWN):
            raise ValueError(f"unknown eye state {self.eye_state!r}")
        if self.eye_found and self.eye_state == UNKNOWN:
            raise ValueError("a found eye needs an open or closed state")
        if not self.eye_found and self.eye_state != UNKNOWN:
            raise ValueError("eye state given but no eye found")
        if self.eye_found and not self.face_found:
            raise ValueError("eye found without a face")

    @classmethod
    def at(cls, index: int, fps: float, face_found: bool = False, eye_state: str | None = None) -> "FrameRecord":
        return cls(index, index / fps, face_found, eye_state is not None, eye_state or UNKNOWN)


@dataclass(frozen=True)
class AlarmConfig:
    threshold: float
    min_valid_fraction: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie strictly between 0 and 1")
        if not 0.0 <= self.min_valid_fraction <= 1.0:
            raise ValueError("min_valid_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class WindowCounts:
    frames: int
    eyes_found: int
    closed: int


class PerclosAccumulator:
    """Frame records in time order with prefix counts for O(log n) window queries.

    ``denominator="eyes"`` divides by frames where an eye was found;
    ``"frames"`` divides by every frame in the window.
    """

    def __init__(self, window_seconds: float = 60.0, min_valid_fraction: float = 0.25, denominator: str = "eyes"):
        if not window_seconds > 0:
            raise ValueError("window_seconds must be positive")
        if denominator not in ("eyes", "frames"):
            raise ValueError("denominator must be 'eyes' or 'frames'")
        self.window_seconds = window_seconds
        self.min_valid_fraction = min_valid_fraction
        self.denominator = denominator
        self.records: list[FrameRecord] = []
        self._times: list[float] = []
        self._found = [0]
        self._closed = [0]

    def record_frame(self, r: FrameRecord) -> "PerclosAccumulator":
        if self.records and r.frame_index <= self.records[-1].frame_index:
            raise ValueError(f"frame {r.frame_index} arrives after frame {self.records[-1].frame_index}")
        if self._times and r.timestamp < self._times[-1]:
            raise ValueError(f"frame {r.frame_index} goes back in time")
        self.records.append(r)
        self._times.append(r.timestamp)
        self._found.append(self._found[-1] + int(r.eye_found))
        self._closed.append(self._closed[-1] + int(r.eye_state == CLOSED))
        return self

    @property
    def eyes_found_count(self) -> int:
        return self._found[-1]

    @property
    def closed_count(self) -> int:
        return self._closed[-1]

    def counts(self, end_time: float) -> WindowCounts:
        """Counts over frames with ``end_time - window < t <= end_time``."""
        lo = bisect.bisect_right(self._times, end_time - self.window_seconds)
        hi = bisect.bisect_right(self._times, end_time)
        lo = min(lo, hi)
        return WindowCounts(hi - lo, self._found[hi] - self._found[lo], self._closed[hi] - self._closed[lo])

    def window_value(self, end_time: float, partial: bool = False) -> float | None:
        if end_time < self.window_seconds and not partial:
            raise ValueError(f"window ending at {end_time}s is shorter than {self.window_seconds}s; pass partial=True")
        c = self.counts(end_time)
        if c.eyes_found == 0 or c.eyes_found < self.min_valid_fraction * c.frames:
            return None
        denom = c.eyes_found if self.denominator == "eyes" else c.frames
        return c.closed / denom


def check_alarm(value: float | None, cfg: AlarmConfig) -> bool:
    """Strictly above the threshold; no value means no alarm."""
    return value is not None and value > cfg.threshold


@dataclass(frozen=True)
class Row:
    record: FrameRecord
    perclos: float | None
    evaluated: bool
    alarm: bool


class PerclosMonitor:
    """Feeds an accumulator and judges a window every ``slide_seconds``.

    A window is evaluated at the first frame whose timestamp reaches the
    next slide boundary, ending at that frame's timestamp. The first
    boundary is ``window_seconds`` (or ``slide_seconds`` when partial
    windows are allowed).
    """

    def __init__(self, alarm: AlarmConfig, window_seconds: float = 60.0, slide_seconds: float = 5.0, partial: bool = False, denominator: str = "eyes"):
        if not slide_seconds > 0:
            raise ValueError("slide_seconds must be positive")
        self.alarm = alarm
        self.slide_seconds = slide_seconds
        self.partial = partial
        self.acc = PerclosAccumulator(window_seconds, alarm.min_valid_fraction, denominator)
        self._next = slide_seconds if partial else window_seconds
        self.windows = 0
        self.alarms = 0

    def push(self, r: FrameRecord) -> Row:
        self.acc.record_frame(r)
        if r.timestamp < self._next:
            return Row(r, None, False, False)
        while self._next <= r.timestamp:
            self._next += self.slide_seconds
        value = self.acc.window_value(r.timestamp, partial=self.partial)
        fired = check_alarm(value, self.alarm)
        if value is not None:
            self.windows += 1
            self.alarms += int(fired)
        return Row(r, value, True, fired)

    def summary(self) -> str:
        return f"PERCLOS windows: {self.windows}, alarms: {self.alarms}"


def csv_fields(row: Row) -> list[str]:
    r = row.record
    return [
        str(r.frame_index),
        f"{r.timestamp:.3f}",
        str(int(r.face_found)),
        str(int(r.eye_found)),
        r.eye_state,
        "" if row.perclos is None else f"{row.perclos:.6f}",
        str(int(row.alarm)),
    ]


def write_csv(fh: TextIO, rows: Iterable[Row]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow(csv_fields(row))
