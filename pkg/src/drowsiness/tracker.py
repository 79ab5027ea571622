"""Constant-velocity Kalman tracking of a face bounding box.

The state is ``[x1, y1, x2, y2, vx1, vy1, vx2, vy2]``: the top-left and
bottom-right corners plus their per-frame velocities. Measurements are the
four corner coordinates of a detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imaging import Rect

UNINITIALIZED = "uninitialized"
TRACKING = "tracking"
COASTING = "coasting"


def constant_velocity(dt: float = 1.0) -> np.ndarray:
    F = np.eye(8)
    F[:4, 4:] = dt * np.eye(4)
    return F


def corner_measurement() -> np.ndarray:
    return np.hstack([np.eye(4), np.zeros((4, 4))])


@dataclass(frozen=True)
class KalmanConfig:
    F: np.ndarray = field(default_factory=constant_velocity)
    H: np.ndarray = field(default_factory=corner_measurement)
    Q: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(8))
    R: np.ndarray = field(default_factory=lambda: np.eye(4))
    P0: float = 100.0
    roi_margin: float = 0.5
    max_coast: int = 5

    def __post_init__(self):
        for name, m, n in (("F", self.F, (8, 8)), ("H", self.H, (4, 8)), ("Q", self.Q, (8, 8)), ("R", self.R, (4, 4))):
            if np.shape(m) != n:
                raise ValueError(f"{name} must be {n[0]}x{n[1]}")
        for name, m in (("Q", self.Q), ("R", self.R)):
            if not np.allclose(m, np.transpose(m)):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() < -1e-12:
                raise ValueError(f"{name} must be positive semi-definite")
        if self.max_coast < 0:
            raise ValueError("max_coast must be >= 0")
        if self.roi_margin < 0:
            raise ValueError("roi_margin must be >= 0")


@dataclass(frozen=True)
class KalmanState:
    x_hat: np.ndarray
    P: np.ndarray

    @classmethod
    def from_rect(cls, r: Rect, p0: float = 100.0) -> "KalmanState":
        x = np.zeros(8)
        x[:4] = _corners(r)
        return cls(x, p0 * np.eye(8))

    def box(self) -> np.ndarray:
        """Predicted corners ``(x1, y1, x2, y2)``."""
        return self.x_hat[:4].copy()


def _corners(r: Rect) -> np.ndarray:
    return np.array([r.x, r.y, r.x + r.w, r.y + r.h], dtype=float)


def _sym(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2.0


def predict(s: KalmanState, cfg: KalmanConfig = KalmanConfig()) -> KalmanState:
    x = cfg.F @ s.x_hat
    P = _sym(cfg.F @ s.P @ cfg.F.T + cfg.Q)
    return KalmanState(x, P)


def update(s: KalmanState, z, cfg: KalmanConfig = KalmanConfig()) -> KalmanState:
    z = np.asarray(z, dtype=float)
    if z.shape != (4,):
        raise ValueError("measurement must have 4 coordinates")
    H = cfg.H
    resid = z - H @ s.x_hat
    S = H @ s.P @ H.T + cfg.R
    try:
        K = np.linalg.solve(S.T, (s.P @ H.T).T).T
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("innovation covariance is singular; R must be positive definite") from None
    x = s.x_hat + K @ resid
    P = _sym((np.eye(8) - K @ H) @ s.P)
    return KalmanState(x, P)


class Tracker:
    """Single-face tracker that coasts through misses and then gives up.

    ``step`` consumes this frame's detection (or ``None``) and returns the
    region to search in the next frame.
    """

    def __init__(self, frame_size: tuple[int, int], cfg: KalmanConfig = KalmanConfig()):
        self.width, self.height = frame_size
        self.cfg = cfg
        self.mode = UNINITIALIZED
        self.frames_coasted = 0
        self.state: KalmanState | None = None

    def full_frame(self) -> Rect:
        return Rect(0, 0, self.width, self.height)

    def step(self, detection: Rect | None) -> Rect:
        if detection is not None:
            z = _corners(Rect(*detection))
            if self.mode == UNINITIALIZED:
                self.state = KalmanState.from_rect(Rect(*detection), self.cfg.P0)
            else:
                self.state = update(self.state, z, self.cfg)
            self.mode = TRACKING
            self.frames_coasted = 0
        elif self.mode != UNINITIALIZED:
            self.frames_coasted += 1
            if self.frames_coasted > self.cfg.max_coast:
                self.reset()
                return self.full_frame()
            self.mode = COASTING
        else:
            return self.full_frame()
        # the next frame is searched around the a-priori estimate
        self.state = predict(self.state, self.cfg)
        return self.search_roi()

    def reset(self) -> None:
        self.mode = UNINITIALIZED
        self.frames_coasted = 0
        self.state = None

    def predicted_box(self) -> np.ndarray | None:
        return None if self.state is None else self.state.box()

    def search_roi(self) -> Rect:
        if self.state is None:
            return self.full_frame()
        x1, y1, x2, y2 = self.state.box()
        lo_x, hi_x = min(x1, x2), max(x1, x2)
        lo_y, hi_y = min(y1, y2), max(y1, y2)
        mx = self.cfg.roi_margin * (hi_x - lo_x)
        my = self.cfg.roi_margin * (hi_y - lo_y)
        x0 = max(0, math.floor(lo_x - mx))
        y0 = max(0, math.floor(lo_y - my))
        x1_ = min(self.width, math.ceil(hi_x + mx))
        y1_ = min(self.height, math.ceil(hi_y + my))
        if x1_ - x0 < 1 or y1_ - y0 < 1:
            # the prediction left the frame entirely
            return self.full_frame()
        return Rect(x0, y0, x1_ - x0, y1_ - y0)

    def dump(self) -> str:
        """Text snapshot: mode, frames_coasted, x_hat (8 values), P (8 rows)."""
        lines = [f"mode {self.mode}", f"frames_coasted {self.frames_coasted}"]
        if self.state is not None:
            lines.append("x_hat " + " ".join(repr(float(v)) for v in self.state.x_hat))
            for row in self.state.P:
                lines.append("P " + " ".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"
