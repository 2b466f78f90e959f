"""Timestamp and histogram file formats.

Timestamp files: 8-byte magic ``SWTTAG01``, little-endian ``int64`` resolution
in picoseconds, then sorted little-endian ``int64`` records, one channel per file.
"""
from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import numpy as np

from ..errors import InputError
from .histogram import CoincidenceHistogram

MAGIC = b"SWTTAG01"
_RECORD = np.dtype("<i8")


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_timestamps(path, ps: np.ndarray, resolution_ps: int = 1) -> None:
    ps = np.asarray(ps)
    if ps.size and np.any(np.diff(ps) < 0):
        raise InputError("timestamps must be sorted")
    header = MAGIC + np.array([resolution_ps], dtype=_RECORD).tobytes()
    _atomic_write_bytes(Path(path), header + ps.astype(_RECORD).tobytes())


def read_timestamps(path) -> tuple[np.ndarray, int]:
    """Return ``(records, resolution_ps)``."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise InputError(f"{path}: not a timestamp file (bad magic)")
    if (len(raw) - 16) % 8:
        raise InputError(f"{path}: truncated record")
    resolution = int(np.frombuffer(raw[8:16], dtype=_RECORD)[0])
    return np.frombuffer(raw[16:], dtype=_RECORD).astype(np.int64), resolution


def histogram_csv(hist: CoincidenceHistogram) -> str:
    lines = ["delay_ps,counts"]
    lines += [f"{d},{c}" for d, c in hist.rows()]
    return "\n".join(lines) + "\n"


def write_histogram_csv(path, hist: CoincidenceHistogram) -> None:
    _atomic_write_bytes(Path(path), histogram_csv(hist).encode())


def read_histogram_csv(path, duration: float = 0.0) -> CoincidenceHistogram:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0] != ["delay_ps", "counts"]:
        raise InputError(f"{path}: expected header delay_ps,counts")
    data = np.array([[int(a), int(b)] for a, b in rows[1:]], dtype=np.int64)
    centers = data[:, 0] / 1e12
    width = float(np.diff(centers[:2])[0]) if len(centers) > 1 else 0.0
    return CoincidenceHistogram(width, centers, data[:, 1], duration)
