"""Full-resolution noise field reconstruction and scene rasters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import SUBSWATHS
from .errors import GeometryMismatch

NO_SUBSWATH = -1


@dataclass(frozen=True)
class SceneRaster:
    """Squared digital numbers ``x`` with a validity mask."""

    values: np.ndarray
    valid_mask: np.ndarray

    @classmethod
    def from_values(cls, values, mask_threshold=0.0):
        """Wrap a grid, masking cells ``<= mask_threshold`` (zero-DN borders)."""
        values = np.asarray(values, dtype=np.float64)
        mask = np.isfinite(values) & (values > mask_threshold)
        return cls(values, mask)

    @property
    def scene_rows(self):
        return self.values.shape[0]

    @property
    def scene_cols(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class NoiseField:
    """Estimated additive noise ``y`` with per-cell subswath labels.

    ``labels`` holds the index into ``SUBSWATHS`` for every cell, or -1 for
    cells outside every rectangle (those carry value 0 and never enter a sum).
    """

    values: np.ndarray
    labels: np.ndarray
    half_period: dict

    @property
    def shape(self):
        return self.values.shape

    def mask_of(self, subswath_id):
        return self.labels == SUBSWATHS.index(subswath_id)

    @property
    def valid(self):
        return self.labels != NO_SUBSWATH


def check_shapes(raster, field):
    if raster.shape != field.shape:
        raise GeometryMismatch(f"raster {raster.shape} and noise field {field.shape} differ")


def label_grid(cal):
    labels = np.full((cal.scene_rows, cal.scene_cols), NO_SUBSWATH, dtype=np.int8)
    for rect in cal.rectangles:
        if (rect.last_azimuth_line >= cal.scene_rows
                or rect.last_range_sample >= cal.scene_cols):
            raise GeometryMismatch(
                f"{rect.subswath_id} rectangle lines {rect.first_azimuth_line}-"
                f"{rect.last_azimuth_line}, samples {rect.first_range_sample}-"
                f"{rect.last_range_sample} exceeds scene "
                f"{cal.scene_rows}x{cal.scene_cols}")
        labels[rect.rows, rect.cols] = SUBSWATHS.index(rect.subswath_id)
    return labels


def range_component(cal):
    """Bilinear interpolation of the range lookup table onto the scene grid.

    Each vector is interpolated along range, then rows between two vectors
    are blended linearly. Values beyond the outermost knots are held.
    """
    cols = np.arange(cal.scene_cols)
    knots = np.array([rv.azimuth_line for rv in cal.range_vectors], dtype=np.float64)
    profiles = np.stack([np.interp(cols, rv.range_pixels, rv.noise_values)
                         for rv in cal.range_vectors])

    rows = np.arange(cal.scene_rows, dtype=np.float64)
    upper = np.clip(np.searchsorted(knots, rows, side="right"), 1, len(knots) - 1)
    lower = upper - 1
    t = (rows - knots[lower]) / (knots[upper] - knots[lower])
    t = np.clip(t, 0.0, 1.0)[:, None]
    return (1.0 - t) * profiles[lower] + t * profiles[upper]


def azimuth_component(cal):
    """Descalloping gain per cell; 1 where no azimuth vector applies."""
    gain = np.ones((cal.scene_rows, cal.scene_cols))
    for av in cal.azimuth_vectors:
        last_line = min(av.last_azimuth_line, cal.scene_rows - 1)
        last_sample = min(av.last_range_sample, cal.scene_cols - 1)
        if av.first_azimuth_line > last_line or av.first_range_sample > last_sample:
            continue
        lines = np.arange(av.first_azimuth_line, last_line + 1)
        d = np.interp(lines, av.azimuth_lines, av.noise_values)
        gain[av.first_azimuth_line:last_line + 1,
             av.first_range_sample:last_sample + 1] = d[:, None]
    return gain


def half_burst_period(cal, subswath_id):
    """Azimuth lines per half burst period: round(N_az / (2 N_burst)), at least 1."""
    n_az = cal.azimuth_extent(subswath_id)
    n_burst = cal.burst_counts.get(subswath_id, 1)
    return max(1, int(np.floor(n_az / (2.0 * n_burst) + 0.5)))


def build_noise_field(cal):
    labels = label_grid(cal)
    values = range_component(cal) * azimuth_component(cal)
    values[labels == NO_SUBSWATH] = 0.0
    half_period = {a: half_burst_period(cal, a) for a in cal.subswaths}
    return NoiseField(values, labels, half_period)


@dataclass(frozen=True)
class LineMeans:
    """Per-azimuth-line means of ``x`` and ``y`` for one subswath.

    Arrays run over every scene row; ``valid`` is False where the line has no
    valid cell in the subswath.
    """

    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray
    count: np.ndarray


def azimuth_line_means(raster, field, subswath_id):
    check_shapes(raster, field)
    cells = field.mask_of(subswath_id) & raster.valid_mask
    count = cells.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(cells, raster.values, 0.0).sum(axis=1) / count
        y = np.where(cells, field.values, 0.0).sum(axis=1) / count
    valid = count > 0
    x[~valid] = np.nan
    y[~valid] = np.nan
    return LineMeans(x, y, valid, count)
