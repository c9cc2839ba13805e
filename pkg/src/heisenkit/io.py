"""CSV tables, a binary grid format, and deterministic JSON.

Binary grid layout (little endian)::

    b"HKGRID01" | uint32 header length | JSON header | float64 data (row-major)

The header carries ``shape``, ``origin``, ``spacing`` and, for non-uniform
axes, the full ``axes`` arrays.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .grids import GeometryError, TensorGrid

MAGIC = b"HKGRID01"


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_json(obj) -> str:
    """Byte-stable JSON: sorted keys, fixed indentation, shortest float repr."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj))
    return path


def write_csv(path, header, columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.ravel(np.asarray(c)) for c in columns]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) if not isinstance(v, (bool, np.bool_)) else int(v) for v in row])
    return path


def read_csv(path):
    """Returns ``(header, float array of shape (rows, cols))``."""
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))


def save_grid_binary(path, values, grid: TensorGrid) -> Path:
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.shape != grid.shape:
        raise GeometryError("values do not match the grid")
    h = grid.uniform_spacing()
    header = {"shape": list(grid.shape), "origin": grid.lower.tolist(),
              "spacing": None if h is None else h.tolist(), "dtype": "<f8"}
    if h is None:
        header["axes"] = [a.tolist() for a in grid.axes]
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(values.tobytes(order="C"))
    return path


def load_grid_binary(path):
    """Returns ``(values, TensorGrid)``."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise GeometryError(f"{path}: not a grid dump")
    (n,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + n])
    shape = tuple(header["shape"])
    if header.get("axes") is not None:
        axes = tuple(np.array(a) for a in header["axes"])
    else:
        axes = tuple(o + h * np.arange(m) for o, h, m in zip(header["origin"], header["spacing"], shape))
    values = np.frombuffer(data[12 + n:], dtype="<f8").reshape(shape).copy()
    return values, TensorGrid(axes)


def save_grid_csv(path, values, grid: TensorGrid) -> Path:
    pts = grid.points().reshape(-1, grid.dim)
    names = ["x1", "x2", "x3", "y"][:grid.dim]
    return write_csv(path, names + ["value"], [*pts.T, np.ravel(values)])


def load_grid_csv(path):
    header, data = read_csv(path)
    dim = len(header) - 1
    axes = tuple(np.unique(data[:, k]) for k in range(dim))
    grid = TensorGrid(axes)
    idx = tuple(np.searchsorted(axes[k], data[:, k]) for k in range(dim))
    values = np.full(grid.shape, np.nan)
    values[idx] = data[:, dim]
    return values, grid
