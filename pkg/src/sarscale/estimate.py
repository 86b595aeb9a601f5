"""One-call dynamic estimation: objective assembly followed by the solve."""

from .objective import ObjectiveParams, build_system
from .solver import solve


def estimate_scaling(raster, field, cal, params=ObjectiveParams(), layout=None, strict=False):
    """Return ``(ScalingEstimate, LinearSystem)`` for one scene."""
    system = build_system(raster, field, cal, params, layout=layout, strict=strict)
    return solve(system), system
