"""Dynamic per-subswath scaling of the thermal noise field in extra-wide swath SAR."""

__version__ = "0.1.0"

from .calibration import (CalibrationSet, load_calibration, parse_calibration,  # noqa: E402
                          validate_coverage)
from .denoise import DenoiseConfig, apply, static_defaults  # noqa: E402
from .estimate import estimate_scaling  # noqa: E402
from .noise_field import NoiseField, SceneRaster, build_noise_field  # noqa: E402
from .objective import ObjectiveParams, build_system  # noqa: E402
from .solver import ScalingEstimate, solve  # noqa: E402

__all__ = [
    "CalibrationSet", "load_calibration", "parse_calibration", "validate_coverage",
    "DenoiseConfig", "apply", "static_defaults", "estimate_scaling",
    "NoiseField", "SceneRaster", "build_noise_field", "ObjectiveParams", "build_system",
    "ScalingEstimate", "solve",
]
