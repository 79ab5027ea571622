"""Binary PGM (P5, maxval 255) reading and writing, plus frame directories."""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .imaging import as_gray

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


class PgmError(ValueError):
    pass


def decode(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5"):
        raise PgmError("not a binary PGM (missing P5 magic)")
    pos = 2
    fields = []
    for _ in range(3):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PgmError("truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise PgmError(f"bad PGM header field: {exc}") from None
    if maxval != 255:
        raise PgmError(f"only maxval 255 is supported, got {maxval}")
    if w < 1 or h < 1:
        raise PgmError("PGM dimensions must be positive")
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    raster = data[pos : pos + w * h]
    if len(raster) != w * h:
        raise PgmError(f"expected {w * h} raster bytes, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def encode(img) -> bytes:
    img = as_gray(img)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())


def write_pgm(path, img) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(img))


def list_frames(directory) -> list[Path]:
    """PGM files of ``directory`` in lexicographic filename order."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"frame directory {d} does not exist")
    return sorted((p for p in d.iterdir() if p.suffix.lower() == ".pgm" and p.is_file()), key=lambda p: p.name)


def iter_raw_frames(stream: BinaryIO, width: int, height: int) -> Iterator[np.ndarray]:
    """Frames of raw 8-bit pixels read back to back from ``stream``."""
    n = width * height
    while True:
        buf = stream.read(n)
        if not buf:
            return
        if len(buf) != n:
            raise PgmError(f"short raw frame: {len(buf)} of {n} bytes")
        yield np.frombuffer(buf, dtype=np.uint8).reshape(height, width).copy()


def write_frames(directory, frames, prefix: str = "frame") -> list[Path]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, f in enumerate(frames):
        p = Path(directory) / f"{prefix}_{i:05d}.pgm"
        write_pgm(p, f)
        paths.append(p)
    return paths
