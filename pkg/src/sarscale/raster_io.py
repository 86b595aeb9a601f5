"""Flat raster files: little-endian float32, row-major, with a JSON sidecar.

``scene.f32`` holds the samples and ``scene.json`` the sidecar::

    {"rows": 512, "cols": 1024, "dtype": "f32le", "units": "dn2"}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import RasterFormatError
from .noise_field import SceneRaster

DTYPE = np.dtype("<f4")


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def write_grid(path, values, units="dn2"):
    path = Path(path)
    values = np.asarray(values)
    if values.ndim != 2:
        raise RasterFormatError(f"expected a 2-D grid, got shape {values.shape}")
    path.write_bytes(np.ascontiguousarray(values, dtype=DTYPE).tobytes())
    meta = {"rows": int(values.shape[0]), "cols": int(values.shape[1]),
            "dtype": "f32le", "units": units}
    sidecar_path(path).write_text(json.dumps(meta) + "\n")


def read_grid(path):
    """Return ``(values, sidecar)``; values are float64 copies of the f32 data."""
    path = Path(path)
    try:
        meta = json.loads(sidecar_path(path).read_text())
        rows, cols = int(meta["rows"]), int(meta["cols"])
    except FileNotFoundError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise RasterFormatError(f"{sidecar_path(path)}: bad sidecar ({exc})") from None
    if meta.get("dtype", "f32le") != "f32le":
        raise RasterFormatError(f"{path}: unsupported dtype {meta.get('dtype')!r}")
    data = np.frombuffer(path.read_bytes(), dtype=DTYPE)
    if data.size != rows * cols:
        raise RasterFormatError(
            f"{path}: {data.size} samples, sidecar says {rows}x{cols}")
    return data.reshape(rows, cols).astype(np.float64), meta


def read_raster(path, mask_threshold=0.0):
    values, _ = read_grid(path)
    return SceneRaster.from_values(values, mask_threshold)


def write_raster(path, raster, units="dn2"):
    write_grid(path, raster.values, units)
