import io
import sys

import numpy as np
import pytest

from drowsiness import synth
from drowsiness.cli import main
from drowsiness.pgm import write_frames, write_pgm
from drowsiness.perclos import CLOSED, OPEN


@pytest.fixture(scope="module")
def frames_dir(tmp_path_factory):
    frames, _, _ = synth.driver_sequence(6, np.random.default_rng(11), states=[OPEN] * 3 + [CLOSED] * 3)
    d = tmp_path_factory.mktemp("frames")
    write_frames(d, frames)
    return d


@pytest.fixture
def pca_args(face_cascade_path, eye_models, tmp_path):
    return [
        "detect", "--mode", "day-pca", "--perclos-threshold", "0.2",
        "--face-cascade", str(face_cascade_path), "--eigen-model", str(eye_models["eigen"]),
        "--fps", "2", "--window-seconds", "2", "--slide-seconds", "1",
        "--output", str(tmp_path / "out.csv"),
    ]  # fmt: skip


def test_detect_ok(pca_args, frames_dir, tmp_path, capsys):
    assert main(pca_args + ["--input", str(frames_dir)]) == 0
    assert len((tmp_path / "out.csv").read_text().splitlines()) == 7
    assert capsys.readouterr().out.startswith("PERCLOS windows:")


def test_detect_from_raw_stdin(pca_args, frames_dir, tmp_path, monkeypatch):
    from drowsiness.pgm import list_frames, read_pgm

    imgs = [read_pgm(p) for p in list_frames(frames_dir)]
    raw = b"".join(i.tobytes() for i in imgs)
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(io.BytesIO(raw)))
    h, w = imgs[0].shape
    assert main(pca_args + ["--input", "-", "--raw-size", f"{w}x{h}"]) == 0
    piped = (tmp_path / "out.csv").read_bytes()
    assert main(pca_args + ["--input", str(frames_dir)]) == 0
    assert (tmp_path / "out.csv").read_bytes() == piped


def test_stdin_needs_a_frame_size(pca_args):
    assert main(pca_args + ["--input", "-"]) == 1


def test_config_errors_exit_1(pca_args, frames_dir, tmp_path):
    out = tmp_path / "out.csv"
    assert main(pca_args + ["--input", str(tmp_path / "empty")]) == 1
    (tmp_path / "empty").mkdir()
    assert main(pca_args + ["--input", str(tmp_path / "empty")]) == 1
    bad = list(pca_args)
    bad[bad.index("--eigen-model") + 1] = str(tmp_path / "missing.eigen")
    assert main(bad + ["--input", str(frames_dir)]) == 1
    assert main(["detect", "--mode", "dusk"]) == 1
    assert main(["frobnicate"]) == 1
    assert not out.exists()


def test_corrupt_frame_exits_2(pca_args, frames_dir, tmp_path, capsys):
    d = tmp_path / "broken"
    d.mkdir()
    for p in sorted(frames_dir.glob("*.pgm"))[:3]:
        (d / p.name).write_bytes(p.read_bytes())
    victim = sorted(d.glob("*.pgm"))[2]
    victim.write_bytes(victim.read_bytes()[:100])
    assert main(pca_args + ["--input", str(d)]) == 2
    assert "frame 2" in capsys.readouterr().err
    assert not (tmp_path / "out.csv").exists()


def test_bench_writes_csv(face_cascade_path, frames_dir, tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--input", str(frames_dir), "--face-cascade", str(face_cascade_path), "--sf", "1,4", "--output", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "sf,ms_per_frame,fps,detections,agreement"
    assert [l.split(",")[0] for l in lines[1:]] == ["1", "4"]
    assert lines[1].endswith(",1.0000")


@pytest.fixture(scope="module")
def crop_dirs(tmp_path_factory):
    rng = np.random.default_rng(5)
    root = tmp_path_factory.mktemp("crops")
    for light in ("day", "night"):
        for state in (OPEN, CLOSED):
            d = root / light / state
            d.mkdir(parents=True)
            for i, c in enumerate(synth.roi_eye_crops(state, 40, rng, night=light == "night", equalize=light == "day")):
                write_pgm(d / f"{i:03d}.pgm", c)
    return root


def test_train_round_trip(crop_dirs, face_cascade_path, frames_dir, tmp_path, capsys):
    day, night = crop_dirs / "day", crop_dirs / "night"
    eig, nir, sv = tmp_path / "e.eigen", tmp_path / "n.lbpeigen", tmp_path / "s.svm"
    assert main(["train", "eigen-day", "--open", str(day / OPEN), "--closed", str(day / CLOSED), "--out", str(eig), "--k", "10"]) == 0
    assert main(["train", "nir", "--open", str(night / OPEN), "--closed", str(night / CLOSED), "--out", str(nir), "--k", "20"]) == 0
    args = ["train", "svm", "--open", str(night / OPEN), "--closed", str(night / CLOSED), "--out", str(sv)]
    assert main(args) == 1  # needs the NIR model
    assert main(args + ["--nir-model", str(nir), "--validate", str(night)]) == 0
    out = capsys.readouterr().out
    assert "support vectors" in out and "held-out accuracy" in out
    common = ["--face-cascade", str(face_cascade_path), "--perclos-threshold", "0.2", "--input", str(frames_dir), "--fps", "2", "--window-seconds", "2", "--slide-seconds", "1"]
    assert main(["detect", "--mode", "day-pca", "--eigen-model", str(eig), "--output", str(tmp_path / "a.csv")] + common) == 0
    assert main(["detect", "--mode", "night-lbp", "--nir-model", str(nir), "--svm-model", str(sv), "--output", str(tmp_path / "b.csv")] + common) == 0


def test_train_rejects_wrong_crop_size(crop_dirs, tmp_path, capsys):
    d = tmp_path / "odd"
    d.mkdir()
    write_pgm(d / "x.pgm", np.zeros((30, 30), np.uint8))
    assert main(["train", "nir", "--open", str(d), "--closed", str(crop_dirs / "night" / CLOSED), "--out", str(tmp_path / "n")]) == 1
    assert "x.pgm" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    import subprocess

    r = subprocess.run([sys.executable, "-m", "drowsiness", "detect"], capture_output=True, text=True)
    assert r.returncode == 1 and "error" in r.stderr
