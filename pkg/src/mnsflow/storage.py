"""Snapshot files, checkpoint sidecars and CSV time series.

Snapshot layout (all little-endian)::

    offset  size  field
    0       4     magic b"MNS1"
    4       4     format version (u32, currently 1)
    8       4     n (u32)
    12      4     model id (u32, ModelKind.code)
    16      4     Riesz sign (i32)
    20      8     t (binary64)
    28      ...   3 components x n^3 binary64 physical samples

Each component is stored with the first spatial axis varying fastest.
A checkpoint adds a JSON sidecar (same stem, ``.json``) carrying the exact
energy-budget counters so a restart reproduces an uninterrupted run.
"""

import csv
import json
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from mnsflow.models import ModelKind

__all__ = [
    "MAGIC",
    "VERSION",
    "SnapshotError",
    "Snapshot",
    "write_snapshot",
    "read_snapshot",
    "sidecar_path",
    "write_sidecar",
    "read_sidecar",
    "format_float",
    "write_csv",
    "read_csv",
]

MAGIC = b"MNS1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIid")


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    n: int
    model: ModelKind
    sign: int
    t: float
    samples: np.ndarray  # (3, n, n, n) float64


def write_snapshot(path, samples, t, model, sign=1):
    """Write physical ``samples`` of shape ``(3, n, n, n)`` at time ``t``."""
    samples = np.asarray(samples)
    if samples.ndim != 4 or samples.shape[0] != 3 or len(set(samples.shape[1:])) != 1:
        raise SnapshotError(f"expected samples of shape (3, n, n, n), got {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise SnapshotError("refusing to write non-finite samples")
    n = samples.shape[1]
    header = _HEADER.pack(MAGIC, VERSION, n, ModelKind.parse(model).code, int(sign), float(t))
    body = np.asarray(samples, dtype="<f8").transpose(0, 3, 2, 1).tobytes(order="C")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(body)
    os.replace(tmp, path)


def read_snapshot(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, n, model_id, sign, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported format version {version}")
    if n < 8 or n % 2:
        raise SnapshotError(f"{path}: invalid grid size n={n}")
    try:
        model = ModelKind.from_code(model_id)
    except ValueError:
        raise SnapshotError(f"{path}: unknown model id {model_id}") from None
    if sign not in (1, -1):
        raise SnapshotError(f"{path}: invalid Riesz sign {sign}")
    expected = _HEADER.size + 3 * n**3 * 8
    if len(data) != expected:
        kind = "truncated" if len(data) < expected else "oversized"
        raise SnapshotError(f"{path}: {kind} body ({len(data)} bytes, expected {expected})")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(3, n, n, n)
    samples = np.ascontiguousarray(body.transpose(0, 3, 2, 1), dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise SnapshotError(f"{path}: non-finite samples")
    return Snapshot(n, model, int(sign), float(t), samples)


def sidecar_path(path):
    return os.path.splitext(path)[0] + ".json"


def write_sidecar(path, payload):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)


def read_sidecar(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def format_float(x):
    """Round-trip decimal with 17 significant digits (``inf``/``nan`` spelled out)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_csv(path, header, rows, append=False):
    mode = "a" if append else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if not append:
            w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def read_csv(path):
    """Header and rows (as strings) of a CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return rows[0], rows[1:]
