"""File formats: JSON reports, series CSV and the HRTRAJ01 binary dump.

HRTRAJ01 layout (all little-endian)::

    bytes 0..7    magic b"HRTRAJ01"
    uint64        n_modes
    uint64        n_samples
    float64[n_samples]                  sample times
    float64[n_samples, 3, n_modes]      coefficients (sample, component u/v/w, mode)
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"HRTRAJ01"
COMPONENTS = ("u", "v", "w")


def jsonable(obj):
    """Recursively convert dataclasses and numpy values to plain JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return jsonable(obj.to_dict())
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory_csv(path, times, norms) -> Path:
    """Rows ``t,comp,norm_L2,norm_H1``; ``norms`` has shape ``(S, 3, 2)``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "comp", "norm_L2", "norm_H1"])
        for t, row in zip(times, norms):
            for name, (l2, h1) in zip(COMPONENTS, row):
                w.writerow([_fmt(t), name, _fmt(l2), _fmt(h1)])
    return path


def write_series_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return path


def write_hrtraj(path, times, states) -> Path:
    times = np.ascontiguousarray(times, dtype="<f8")
    states = np.ascontiguousarray(states, dtype="<f8")
    if states.ndim != 3 or states.shape[1] != 3 or states.shape[0] != times.shape[0]:
        raise ValidationError(f"states must have shape (n_samples, 3, n_modes), got {states.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", states.shape[2], states.shape[0]))
        fh.write(times.tobytes())
        fh.write(states.tobytes())
    return path


def read_hrtraj(path):
    """Returns ``(times, states)`` from an HRTRAJ01 file."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValidationError(f"{path}: not an HRTRAJ01 file")
    n_modes, n_samples = struct.unpack("<QQ", raw[8:24])
    expected = 24 + 8 * n_samples * (1 + 3 * n_modes)
    if len(raw) != expected:
        raise ValidationError(f"{path}: truncated or oversized ({len(raw)} bytes, expected {expected})")
    times = np.frombuffer(raw, dtype="<f8", count=n_samples, offset=24).copy()
    states = np.frombuffer(raw, dtype="<f8", offset=24 + 8 * n_samples).reshape(n_samples, 3, n_modes).copy()
    return times, states
