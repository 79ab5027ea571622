import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drowsiness.perclos import (
    CLOSED,
    CSV_COLUMNS,
    OPEN,
    UNKNOWN,
    AlarmConfig,
    FrameRecord,
    PerclosAccumulator,
    PerclosMonitor,
    check_alarm,
    write_csv,
)

FPS = 10.0


def _acc(states, window=60.0, **kw):
    acc = PerclosAccumulator(window, **kw)
    for i, s in enumerate(states):
        acc.record_frame(FrameRecord.at(i, FPS, s is not None, s))
    return acc


def test_quarter_closed_window():
    # 60 eye frames, 15 closed, inside a 6 s window
    states = [CLOSED] * 15 + [OPEN] * 45
    acc = _acc(states, window=6.0)
    assert acc.window_value(5.9, partial=True) == pytest.approx(0.25)


def test_no_eyes_gives_no_value():
    acc = _acc([None] * 100, window=5.0)
    assert acc.window_value(9.9) is None


def test_all_closed_is_one():
    acc = _acc([CLOSED] * 100, window=5.0)
    assert acc.window_value(9.9) == 1.0


def test_alarm_is_strictly_above_threshold():
    cfg = AlarmConfig(0.25)
    assert not check_alarm(0.25, cfg)
    assert check_alarm(0.2500001, cfg)
    assert not check_alarm(None, cfg)


def test_short_window_needs_partial_flag():
    acc = _acc([OPEN] * 10)
    with pytest.raises(ValueError):
        acc.window_value(0.9)
    assert acc.window_value(0.9, partial=True) == 0.0


def test_min_valid_fraction_blanks_sparse_windows():
    states = [CLOSED] * 2 + [None] * 18
    assert _acc(states, window=2.0).window_value(1.9, partial=True) is None
    assert _acc(states, window=2.0, min_valid_fraction=0.1).window_value(1.9, partial=True) == 1.0


def test_record_order_is_enforced():
    acc = _acc([OPEN])
    with pytest.raises(ValueError):
        acc.record_frame(FrameRecord.at(0, FPS, True, OPEN))


@pytest.mark.parametrize(
    "args",
    [(0, 0.0, False, True, OPEN), (0, 0.0, True, True, UNKNOWN), (0, 0.0, True, False, CLOSED), (0, 0.0, True, True, "blink")],
)
def test_inconsistent_records_rejected(args):
    with pytest.raises(ValueError):
        FrameRecord(*args)


def _brute(states, t, window, fps):
    sel = [s for i, s in enumerate(states) if t - window < i / fps <= t]
    found = [s for s in sel if s is not None]
    if not found or len(found) < 0.25 * len(sel):
        return None
    return sum(s == CLOSED for s in found) / len(found)


def test_matches_brute_force_on_random_streams():
    rng = np.random.default_rng(7)
    choices = np.array([OPEN, CLOSED, None], dtype=object)
    for _ in range(1000):
        n = int(rng.integers(1, 80))
        states = list(rng.choice(choices, n, p=rng.dirichlet(np.ones(3))))
        window = float(rng.choice([0.5, 1.0, 2.5, 4.0]))
        acc = _acc(states, window=window)
        for t in rng.uniform(0, n / FPS, 3):
            got = acc.window_value(float(t), partial=True)
            want = _brute(states, float(t), window, FPS)
            assert (got is None and want is None) or got == pytest.approx(want, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([OPEN, CLOSED]), min_size=20, max_size=60), st.integers(0, 59))
def test_closing_an_eye_never_lowers_perclos(states, flip):
    flip %= len(states)
    before = _acc(states, window=100.0).window_value(len(states) / FPS, partial=True)
    states = list(states)
    states[flip] = CLOSED
    after = _acc(states, window=100.0).window_value(len(states) / FPS, partial=True)
    assert after >= before


@pytest.mark.parametrize("state,value", [(OPEN, 0.0), (CLOSED, 1.0)])
def test_constant_stream(state, value):
    mon = PerclosMonitor(AlarmConfig(0.5), window_seconds=2.0, slide_seconds=1.0)
    rows = [mon.push(FrameRecord.at(i, FPS, True, state)) for i in range(60)]
    judged = [r for r in rows if r.evaluated]
    assert [r.record.frame_index for r in judged] == [20, 30, 40, 50]
    assert all(r.perclos == value for r in judged)
    assert mon.alarms == (4 if state == CLOSED else 0)


def test_partial_windows_start_after_one_slide():
    mon = PerclosMonitor(AlarmConfig(0.5), window_seconds=60.0, slide_seconds=1.0, partial=True)
    rows = [mon.push(FrameRecord.at(i, FPS, True, OPEN)) for i in range(25)]
    assert [r.record.frame_index for r in rows if r.evaluated] == [10, 20]


def test_csv_format():
    mon = PerclosMonitor(AlarmConfig(0.2), window_seconds=0.3, slide_seconds=0.3)
    recs = [
        FrameRecord.at(0, FPS, False),
        FrameRecord.at(1, FPS, True),
        FrameRecord.at(2, FPS, True, CLOSED),
        FrameRecord.at(3, FPS, True, OPEN),
    ]
    buf = io.StringIO()
    write_csv(buf, [mon.push(r) for r in recs])
    assert buf.getvalue().splitlines() == [
        ",".join(CSV_COLUMNS),
        "0,0.000,0,0,unknown,,0",
        "1,0.100,1,0,unknown,,0",
        "2,0.200,1,1,closed,,0",
        "3,0.300,1,1,open,0.500000,1",
    ]
