"""Apply a noise scaling model to a scene."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import SUBSWATHS
from .noise_field import NO_SUBSWATH, SceneRaster, check_shapes

ESA_K = (1.0, 1.0, 1.0, 1.0, 1.0)
# mean dynamic estimates over the evaluation scenes, per cross-polarisation
STATIC_K = {
    "HV": (1.438, 0.942, 0.980, 1.010, 0.999),
    "VH": (1.37, 0.932, 0.969, 0.993, 1.000),
}
# centres of the sampling intervals of the re-estimation simulation
SIMULATION_BASELINE_K = (1.4, 0.925, 0.985, 1.0, 1.0)

MODES = ("esa", "static", "dynamic")


def static_defaults(polarization):
    try:
        return STATIC_K[polarization.upper()]
    except KeyError:
        raise ValueError(f"no static scaling for polarization {polarization!r}") from None


@dataclass(frozen=True)
class DenoiseConfig:
    mode: str = "dynamic"
    static_k: tuple = None
    negative_policy: str = None  # None picks clamp_zero for dn, keep for dn2
    output_units: str = "dn2"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "static" and self.static_k is None:
            raise ValueError("static mode needs static_k")
        if self.output_units not in ("dn2", "dn"):
            raise ValueError(f"unknown output units {self.output_units!r}")
        if self.negative_policy not in (None, "clamp_zero", "keep"):
            raise ValueError(f"unknown negative policy {self.negative_policy!r}")

    @property
    def policy(self):
        if self.negative_policy is not None:
            return self.negative_policy
        return "clamp_zero" if self.output_units == "dn" else "keep"


def scale_grid(field, k):
    """Per-cell scaling factor: k_a inside subswath a, 0 elsewhere."""
    k = np.asarray(k, dtype=np.float64)
    if k.shape != (len(SUBSWATHS),) or not np.all(np.isfinite(k)):
        raise ValueError(f"scaling vector must hold {len(SUBSWATHS)} finite values")
    lookup = np.append(k, 0.0)  # label -1 indexes the trailing zero
    return lookup[np.where(field.labels == NO_SUBSWATH, -1, field.labels)]


def apply(raster, field, k, config=DenoiseConfig()):
    """``x - k_a y`` per subswath; masked cells pass through unchanged."""
    check_shapes(raster, field)
    out = raster.values - scale_grid(field, k) * field.values
    out = np.where(raster.valid_mask, out, raster.values)
    if config.policy == "clamp_zero":
        out = np.where(raster.valid_mask, np.maximum(out, 0.0), out)
    if config.output_units == "dn":
        out = np.sqrt(np.maximum(out, 0.0))
    return SceneRaster(out, raster.valid_mask.copy())
