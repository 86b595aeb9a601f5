"""Deterministic synthetic scenes and calibration documents.

The generated noise mimics extra-wide swath products: five range-adjacent
subswaths (EW1 widest, with a double-trough range pattern), rectangles that
shift slightly in range from one azimuth block to the next, and a periodic
burst scalloping along azimuth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .calibration import (SUBSWATHS, AzimuthNoiseVector, CalibrationSet,
                          RangeNoiseVector, SubswathRectangle)
from .noise_field import SceneRaster

WIDTH_FRACTIONS = (0.26, 0.19, 0.19, 0.18, 0.18)
NOISE_LEVEL = (320.0, 240.0, 215.0, 195.0, 180.0)
RANGE_AMPLITUDE = (0.9, 0.6, 0.55, 0.5, 0.45)
SCALLOP_DEPTH = (0.45, 0.3, 0.25, 0.2, 0.15)


@dataclass(frozen=True)
class Geometry:
    rows: int = 240
    cols: int = 500
    n_blocks: int = 3
    jitter: int = 2
    burst_period: tuple = (24, 30, 24, 30, 24)
    range_step: int = 6
    line_step: int = 12
    azimuth_step: int = 2


def _range_shape(a, u):
    """Relative noise along range; u runs 0..1 across the subswath."""
    amp = RANGE_AMPLITUDE[a]
    if a == 0:
        # high at both edges and in the middle, two troughs
        lobes = 0.5 + 0.5 * np.cos(4 * np.pi * u)
        return 1.0 + amp * lobes * (1.0 - 0.35 * np.sin(np.pi * u))
    return 1.0 + amp * (2 * u - 1) ** 2


def _boundaries(geom, rng):
    """Per-block subswath column boundaries: array (n_blocks, 6)."""
    edges = np.round(np.cumsum((0,) + WIDTH_FRACTIONS) * geom.cols).astype(int)
    edges[-1] = geom.cols
    out = np.tile(edges, (geom.n_blocks, 1))
    if geom.jitter:
        out[:, 1:-1] += rng.integers(-geom.jitter, geom.jitter + 1,
                                     size=(geom.n_blocks, len(edges) - 2))
    return out


def _block_rows(geom):
    cuts = np.linspace(0, geom.rows, geom.n_blocks + 1).round().astype(int)
    return [(int(cuts[b]), int(cuts[b + 1]) - 1) for b in range(geom.n_blocks)]


def make_calibration(geom=Geometry(), seed=0):
    """Synthetic CalibrationSet tiling a ``geom.rows`` x ``geom.cols`` scene."""
    rng = np.random.default_rng(seed)
    bounds = _boundaries(geom, rng)
    blocks = _block_rows(geom)
    phase = rng.uniform(0, 1, size=len(SUBSWATHS))
    drift = rng.uniform(-0.05, 0.05, size=len(SUBSWATHS))

    rectangles, azimuth_vectors, range_vectors = [], [], []
    for b, (r0, r1) in enumerate(blocks):
        for a, name in enumerate(SUBSWATHS):
            c0, c1 = int(bounds[b, a]), int(bounds[b, a + 1]) - 1
            rectangles.append(SubswathRectangle(name, r0, r1, c0, c1))
            lines = np.unique(np.r_[np.arange(r0, r1 + 1, geom.azimuth_step), r1])
            period = geom.burst_period[a]
            d = 1.0 + SCALLOP_DEPTH[a] * 0.5 * (
                1 - np.cos(2 * np.pi * (lines / period - phase[a])))
            azimuth_vectors.append(AzimuthNoiseVector(
                name, r0, r1, c0, c1, tuple(int(x) for x in lines),
                tuple(float(x) for x in d)))

        for line in np.unique(np.r_[np.arange(r0, r1 + 1, geom.line_step), r1]):
            pixels, values = [], []
            for a in range(len(SUBSWATHS)):
                c0, c1 = int(bounds[b, a]), int(bounds[b, a + 1]) - 1
                px = np.unique(np.r_[np.arange(c0, c1 + 1, geom.range_step), c1])
                u = (px - c0) / max(c1 - c0, 1)
                level = NOISE_LEVEL[a] * (1.0 + drift[a] * line / geom.rows)
                pixels += [int(p) for p in px]
                values += [float(v) for v in level * _range_shape(a, u)]
            range_vectors.append(RangeNoiseVector(int(line), tuple(pixels), tuple(values)))

    bursts = {name: max(1, int(round(geom.rows / p)))
              for name, p in zip(SUBSWATHS, geom.burst_period)}
    return CalibrationSet(tuple(range_vectors), tuple(azimuth_vectors), tuple(rectangles),
                          bursts, geom.rows, geom.cols)


def speckle(rng, shape, looks=4.0):
    """Unit-mean multiplicative gamma speckle."""
    return rng.gamma(looks, 1.0 / looks, size=shape)


def ocean_scene(rng, shape, level=300.0, trend=0.3, looks=4.0):
    """Homogeneous water whose backscatter falls linearly along range."""
    rows, cols = shape
    sigma = level * (1.0 - trend * np.arange(cols) / cols)
    return sigma[None, :] * speckle(rng, shape, looks)


def textured_scene(rng, shape, level=300.0, looks=4.0, n_floes=12, correlation=6.0):
    """Sea-ice-like texture: log-normal random field, bright floes, speckle."""
    rows, cols = shape
    field = ndimage.gaussian_filter(rng.standard_normal(shape), correlation, mode="wrap")
    field /= field.std() or 1.0
    img = np.exp(0.35 * field)
    yy, xx = np.mgrid[0:rows, 0:cols]
    for _ in range(n_floes):
        cy, cx = rng.uniform(0, rows), rng.uniform(0, cols)
        ry, rx = rng.uniform(4, rows / 6), rng.uniform(4, cols / 10)
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 < 1
        img[inside] *= rng.uniform(1.3, 2.2)
    img *= level / img.mean()
    return img * speckle(rng, shape, looks)


def ocean_with_ice(rng, shape, strip_rows, level=300.0, trend=0.3, looks=4.0):
    """Ocean scene with ice floes placed outside the evaluation strip rows."""
    img = ocean_scene(rng, shape, level, trend, looks)
    rows, cols = shape
    r0, r1 = strip_rows
    yy, xx = np.mgrid[0:rows, 0:cols]
    for _ in range(6):
        cy = rng.uniform(0, rows)
        if r0 - 10 <= cy <= r1 + 10:
            continue
        cx = rng.uniform(0, cols)
        ry, rx = rng.uniform(3, 8), rng.uniform(5, cols / 8)
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 < 1
        inside[r0:r1 + 1] = False
        img[inside] *= rng.uniform(2.0, 4.0)
    return img


def as_raster(values):
    return SceneRaster.from_values(values)


def scene_k(rng, k_ranges):
    lo, hi = np.array(k_ranges, dtype=np.float64).T
    return lo + (hi - lo) * rng.random(len(lo))


def write_fixture_set(outdir, n_scenes=10, seed=0, geom=Geometry(), snr=1.0,
                      k_ranges=None, polarization="HV", ipf_class="le_2_91"):
    """Write synthetic noisy scenes, their calibration and a manifest.

    Per scene ``<id>.f32`` (noisy x), ``<id>_clean.f32``, ``<id>.xml`` and
    ``<id>.cal.json`` (same calibration, both formats) plus ``truth.json``
    holding the injected scaling vectors and ``manifest.json`` for the
    evaluation harness. Returns the manifest path.
    """
    from pathlib import Path
    import json

    from .calibration import to_json, to_xml
    from .denoise import scale_grid
    from .noise_field import build_noise_field
    from .raster_io import write_grid
    from .simulation import PUBLISHED_K_RANGES

    k_ranges = PUBLISHED_K_RANGES if k_ranges is None else k_ranges
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(seed)
    scenes, truth = [], {}
    strip_rows = (geom.rows // 3, geom.rows // 3 + geom.rows // 4)
    for n, child in enumerate(root.spawn(n_scenes)):
        rng = np.random.default_rng(child)
        sid = f"scene{n:03d}"
        cal = make_calibration(geom, seed=int(rng.integers(2**31)))
        fld = build_noise_field(cal)
        clean = ocean_with_ice(rng, fld.shape, strip_rows,
                               level=snr * float(fld.values.mean()))
        k = scene_k(rng, k_ranges)
        noisy = clean + scale_grid(fld, k) * fld.values
        write_grid(outdir / f"{sid}.f32", noisy)
        write_grid(outdir / f"{sid}_clean.f32", clean)
        (outdir / f"{sid}.xml").write_bytes(to_xml(cal))
        (outdir / f"{sid}.cal.json").write_text(to_json(cal))
        truth[sid] = [float(x) for x in k]
        scenes.append({"scene_id": sid, "raster": f"{sid}.f32", "calibration": f"{sid}.xml",
                       "polarization": polarization,
                       "ocean_strip": {"rows": list(strip_rows), "cols": [0, geom.cols - 1]},
                       "ipf_class": ipf_class})
    (outdir / "truth.json").write_text(json.dumps(truth, indent=1) + "\n")
    manifest = outdir / "manifest.json"
    manifest.write_text(json.dumps({"scenes": scenes}, indent=1) + "\n")
    return manifest
