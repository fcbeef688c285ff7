"""Snapshots, CSV tables, atomic writes and run manifests."""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import MochError
from .grid import Grid, RealField

MAGIC = b"MOCH"
VERSION = 1
_HEADER = struct.Struct("<4sIQd")


class SnapshotError(MochError, ValueError):
    """Malformed snapshot file."""


def fmt_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    raw = data.encode() if isinstance(data, str) else bytes(data)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def snapshot_bytes(field: RealField) -> bytes:
    g = field.grid
    head = _HEADER.pack(MAGIC, VERSION, g.num_points, g.period)
    return head + np.asarray(field.samples, dtype="<f8").tobytes()


def write_snapshot(path, field: RealField) -> Path:
    return atomic_write(path, snapshot_bytes(field))


def read_snapshot(path) -> RealField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotError("snapshot shorter than its header")
    magic, version, n, period = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    body = raw[_HEADER.size :]
    if len(body) != 8 * n:
        raise SnapshotError(f"expected {n} samples, found {len(body) // 8}")
    samples = np.frombuffer(body, dtype="<f8").astype(float)
    return RealField(Grid(int(n), float(period)), samples)


def field_csv(field: RealField) -> str:
    lines = ["x,value"]
    for x, v in zip(field.grid.nodes, field.samples):
        lines.append(f"{fmt_float(x)},{fmt_float(v)}")
    return "\n".join(lines) + "\n"


def table_csv(header, rows, int_columns=()) -> str:
    """CSV with ``%.17g`` floats; ``int_columns`` are written as integers."""
    ints = set(int_columns)
    out = [",".join(header)]
    for row in rows:
        cells = [str(int(v)) if h in ints else fmt_float(v) for h, v in zip(header, row)]
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def dump_json(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(config: dict, files, version: str, wall_clock: float) -> dict:
    inventory = {Path(f).name: sha256_file(f) for f in sorted(files, key=lambda p: Path(p).name)}
    return {
        "config": config,
        "version": version,
        "wall_clock_seconds": wall_clock,
        "files": inventory,
    }
