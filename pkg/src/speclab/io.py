"""CSV, key-value and binary matrix persistence.

Floats are written with ``repr`` so every value round-trips bit for bit and
identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable) -> Path:
    """RFC 4180 CSV (CRLF line ends); rows may be sequences or mappings keyed by column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, Mapping):
                row = [row[c] for c in columns]
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_kv(path, items: Mapping) -> Path:
    """``key = value`` lines in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {_cell(v)}\n")
    return path


def read_kv(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# binary matrices: little-endian uint64 header, then float64 row-major data

def write_matrix(path, A: np.ndarray) -> Path:
    A = np.ascontiguousarray(A, dtype="<f8")
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {A.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", *A.shape))
        fh.write(A.tobytes(order="C"))
    return path


def read_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    n, m = struct.unpack_from("<QQ", raw)
    return np.frombuffer(raw, dtype="<f8", offset=16, count=n * m).reshape(n, m).copy()


def write_field(path, u: np.ndarray, h: float, dy: float) -> Path:
    """Field dump with header ``(nx, ny)`` as uint64 and ``(h, dy)`` as float64."""
    u = np.ascontiguousarray(u, dtype="<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQdd", u.shape[0], u.shape[1], h, dy))
        fh.write(u.tobytes(order="C"))
    return path


def read_field(path):
    raw = Path(path).read_bytes()
    nx, ny, h, dy = struct.unpack_from("<QQdd", raw)
    u = np.frombuffer(raw, dtype="<f8", offset=32, count=nx * ny).reshape(nx, ny).copy()
    return u, h, dy
