import numpy as np
import pytest

from drowsiness import synth
from drowsiness.haar import DetectParams, EvalCounter, detect_fast
from drowsiness.imaging import Rect
from drowsiness.tracker import (
    COASTING,
    TRACKING,
    UNINITIALIZED,
    KalmanConfig,
    KalmanState,
    Tracker,
    predict,
    update,
)


def _state(x, v=(0, 0, 0, 0), p=1.0):
    return KalmanState(np.r_[np.asarray(x, float), np.asarray(v, float)], p * np.eye(8))


def test_predict_zero_velocity_without_noise():
    cfg = KalmanConfig(Q=np.zeros((8, 8)))
    s = _state([10, 20, 50, 60])
    s2 = predict(s, cfg)
    assert np.array_equal(s2.x_hat, s.x_hat)
    assert np.allclose(s2.P, cfg.F @ s.P @ cfg.F.T)


def test_predict_moves_by_velocity_and_grows_uncertainty():
    s = _state([10, 20, 50, 60], v=[3, 0, 3, 0])
    s2 = predict(s)
    assert s2.x_hat[0] == 13 and s2.x_hat[2] == 53
    assert np.trace(s2.P) >= np.trace(s.P)


def test_update_limits():
    s = _state([10, 20, 50, 60], p=5.0)
    z = np.array([11, 21, 51, 61.0])
    loose = update(s, z, KalmanConfig(R=1e12 * np.eye(4)))
    assert np.linalg.norm(loose.x_hat - s.x_hat) < 1e-3
    tight = update(s, z, KalmanConfig(R=1e-12 * np.eye(4)))
    assert np.allclose(tight.x_hat[:4], z, atol=1e-6)


def test_singular_innovation_is_reported():
    s = KalmanState(np.zeros(8), np.zeros((8, 8)))
    with pytest.raises(np.linalg.LinAlgError):
        update(s, np.zeros(4), KalmanConfig(R=np.zeros((4, 4))))


def test_config_validation():
    with pytest.raises(ValueError):
        KalmanConfig(Q=np.eye(7))
    with pytest.raises(ValueError):
        KalmanConfig(R=-np.eye(4))
    with pytest.raises(ValueError):
        KalmanConfig(Q=np.triu(np.ones((8, 8))))


def test_noiseless_constant_velocity_track():
    t = Tracker((640, 480))
    x0, y0, vx, vy = 100.0, 80.0, 4.0, -2.0
    for k in range(10):
        t.step(Rect(int(x0 + vx * k), int(y0 + vy * k), 60, 60))
    predicted = t.predicted_box()
    truth = np.array([x0 + vx * 10, y0 + vy * 10, x0 + vx * 10 + 60, y0 + vy * 10 + 60])
    assert np.abs(predicted - truth).max() <= 0.5


def test_covariance_stays_symmetric(rng):
    cfg = KalmanConfig()
    s = KalmanState.from_rect(Rect(100, 100, 50, 50))
    for _ in range(10_000):
        s = predict(s, cfg)
        if rng.random() < 0.8:
            s = update(s, s.box() + rng.normal(0, 2, 4), cfg)
        assert np.abs(s.P - s.P.T).max() < 1e-9
        assert (np.diag(s.P) >= 0).all()


def test_step_initialises_on_first_detection():
    t = Tracker((640, 480))
    assert t.step(None) == Rect(0, 0, 640, 480)
    roi = t.step(Rect(200, 150, 80, 80))
    assert t.mode == TRACKING
    assert roi.center == pytest.approx((240, 190), abs=1)
    assert roi.w > 80 and roi.h > 80


def test_miss_follows_prediction():
    t = Tracker((640, 480))
    for k in range(8):
        t.step(Rect(100 + 10 * k, 150, 60, 60))
    last_measured = 100 + 10 * 7
    roi = t.step(None)
    assert t.mode == COASTING
    # the predicted box two frames after the last detection lies ahead of it
    assert t.predicted_box()[0] > last_measured + 15
    assert roi.center[0] > last_measured + 30 + 15


def test_coast_limit_resets_to_full_frame():
    cfg = KalmanConfig(max_coast=5)
    t = Tracker((640, 480), cfg)
    t.step(Rect(100, 100, 60, 60))
    for _ in range(5):
        assert t.step(None) != Rect(0, 0, 640, 480)
    assert t.step(None) == Rect(0, 0, 640, 480)
    assert t.mode == UNINITIALIZED


def test_roi_contains_prediction_and_stays_in_frame(rng):
    t = Tracker((320, 240))
    for _ in range(300):
        r = None if rng.random() < 0.3 else Rect(int(rng.integers(-20, 300)), int(rng.integers(-20, 220)), 40, 40)
        roi = t.step(r)
        assert roi.inside(320, 240)
        box = t.predicted_box()
        if box is not None:
            x1, y1, x2, y2 = np.clip(box, [0, 0, 0, 0], [320, 240, 320, 240])
            assert roi.x <= x1 + 1e-9 and roi.y <= y1 + 1e-9
            assert roi.x + roi.w >= x2 - 1e-9 and roi.y + roi.h >= y2 - 1e-9


def test_dump_lists_state():
    t = Tracker((100, 100))
    assert t.dump().startswith("mode uninitialized")
    t.step(Rect(10, 10, 20, 20))
    lines = t.dump().splitlines()
    assert lines[0] == "mode tracking" and len(lines) == 11


def test_tracked_search_evaluates_fewer_windows(face_cascade):
    frames, boxes, _ = synth.driver_sequence(6, np.random.default_rng(3))
    p = DetectParams(sf=2)
    t = Tracker((640, 480))
    full, tracked = EvalCounter(), EvalCounter()
    for f, b in zip(frames, boxes):
        roi = t.search_roi() if t.mode != UNINITIALIZED else t.full_frame()
        detect_fast(face_cascade, f[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w], p, tracked)
        detect_fast(face_cascade, f, p, full)
        t.step(b)
    assert tracked.windows < full.windows
