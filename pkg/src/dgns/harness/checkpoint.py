"""Binary velocity snapshots.

Layout, all little-endian: b"DGNS", u32 version (1), u64 points per axis,
f64 box length, f64 time, then u1, u2, u3 as n^3 f64 each in C order
(index (ix*n + iy)*n + iz).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..grid import GridSpec, Trajectory, VelocityField

MAGIC = b"DGNS"
VERSION = 1
_HEADER = struct.Struct("<4sIQdd")


class CheckpointError(ValueError):
    pass


def encode(u: VelocityField, time: float) -> bytes:
    g = u.grid
    header = _HEADER.pack(MAGIC, VERSION, g.n, float(g.box_length), float(time))
    return header + np.ascontiguousarray(u.data, dtype="<f8").tobytes()


def decode(blob: bytes, dealias_fraction: float = 2.0 / 3.0) -> tuple[VelocityField, float]:
    if len(blob) < _HEADER.size:
        raise CheckpointError(f"truncated header: {len(blob)} bytes")
    magic, version, n, box_length, time = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError("bad magic")
    if version != VERSION:
        raise CheckpointError(f"version mismatch: file has {version}, reader expects {VERSION}")
    expected = _HEADER.size + 3 * n**3 * 8
    if len(blob) != expected:
        raise CheckpointError(f"truncated payload: {len(blob)} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(3, n, n, n).astype(float)
    grid = GridSpec(int(n), box_length, dealias_fraction)
    return VelocityField(grid, data), time


def write_checkpoint(u: VelocityField, path, time: float = 0.0) -> Path:
    """Atomic write: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(encode(u, time))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_checkpoint(path, dealias_fraction: float = 2.0 / 3.0) -> tuple[VelocityField, float]:
    return decode(Path(path).read_bytes(), dealias_fraction)


def checkpoint_name(index: int) -> str:
    return f"snap_{index:05d}.dgns"


def write_trajectory(traj: Trajectory, directory) -> list[Path]:
    directory = Path(directory)
    return [write_checkpoint(traj.snapshot(i), directory / checkpoint_name(i), traj.times[i]) for i in range(len(traj))]


def load_trajectory(directory, dealias_fraction: float = 2.0 / 3.0) -> Trajectory:
    """Every *.dgns file in ``directory``, ordered by time stamp."""
    files = sorted(Path(directory).glob("*.dgns"))
    if not files:
        raise CheckpointError(f"no checkpoints in {directory}")
    loaded = [read_checkpoint(f, dealias_fraction) for f in files]
    loaded.sort(key=lambda pair: pair[1])
    grid = loaded[0][0].grid
    if any(u.grid != grid for u, _ in loaded):
        raise CheckpointError("checkpoints disagree on grid")
    return Trajectory(grid, np.array([t for _, t in loaded]), np.stack([u.data for u, _ in loaded]))
