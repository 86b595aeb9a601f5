"""Image quality and ocean flatness metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import DegenerateRange, ShapeMismatch
from .stats import paired_t_test_one_tailed  # noqa: F401  (re-exported)

# PSNR of identical images
PSNR_IDENTICAL = math.inf


def nrmse(pred, ref):
    """Root mean squared error divided by the range of ``ref``."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if pred.shape != ref.shape:
        raise ShapeMismatch(f"{pred.shape} vs {ref.shape}")
    if len(ref) < 2:
        raise ValueError("need at least two samples")
    span = float(ref.max() - ref.min())
    if span == 0.0:
        raise DegenerateRange("reference is constant")
    return math.sqrt(float(np.mean((pred - ref) ** 2))) / span


def psnr(pred, ref, peak=None):
    """Peak signal to noise ratio in dB; ``peak`` defaults to ``ref.max()``."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ShapeMismatch(f"{pred.shape} vs {ref.shape}")
    if peak is None:
        peak = float(ref.max())
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((pred - ref) ** 2))
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(peak * peak / mse)


def ssim(pred, ref, window=7, dynamic_range=None, k1=0.01, k2=0.03):
    """Mean structural similarity with a uniform ``window`` x ``window`` kernel.

    Local statistics use the unbiased (N - 1) covariance and the mean is taken
    over windows lying fully inside the image. ``dynamic_range`` defaults to
    the span of ``ref``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ShapeMismatch(f"{pred.shape} vs {ref.shape}")
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be odd and at least 3")
    if min(pred.shape) < window:
        raise ShapeMismatch(f"image {pred.shape} smaller than window {window}")
    if dynamic_range is None:
        dynamic_range = float(ref.max() - ref.min())
    if not dynamic_range > 0:
        raise DegenerateRange("SSIM needs a positive dynamic range")
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    n = window * window
    cov_norm = n / (n - 1.0)

    def local_mean(a):
        return uniform_filter(a, size=window, mode="reflect")

    ux, uy = local_mean(pred), local_mean(ref)
    vx = cov_norm * (local_mean(pred * pred) - ux * ux)
    vy = cov_norm * (local_mean(ref * ref) - uy * uy)
    vxy = cov_norm * (local_mean(pred * ref) - ux * uy)
    num = (2 * ux * uy + c1) * (2 * vxy + c2)
    den = (ux * ux + uy * uy + c1) * (vx + vy + c2)
    pad = (window - 1) // 2
    s = num / den
    return float(s[pad:s.shape[0] - pad, pad:s.shape[1] - pad].mean())


@dataclass(frozen=True)
class OceanStrip:
    """Evaluation strip: inclusive azimuth rows over the full range extent."""

    row_span: tuple
    col_span: tuple

    def check(self, shape):
        (r0, r1), (c0, c1) = self.row_span, self.col_span
        rows, cols = shape
        if not (0 <= r0 <= r1 < rows and 0 <= c0 <= c1 < cols):
            raise ValueError(f"strip {self.row_span}x{self.col_span} outside scene {shape}")


def range_profile(raster, strip):
    """Mean over the strip's rows of each range column, xi(j), valid cells only."""
    strip.check(raster.shape)
    (r0, r1), (c0, c1) = strip.row_span, strip.col_span
    vals = raster.values[r0:r1 + 1, c0:c1 + 1]
    mask = raster.valid_mask[r0:r1 + 1, c0:c1 + 1]
    count = mask.sum(axis=0)
    cols = np.arange(c0, c1 + 1)
    good = count > 0
    xi = np.where(mask, vals, 0.0).sum(axis=0)[good] / count[good]
    return cols[good], xi


def linear_fit(j, xi):
    slope, intercept = np.polyfit(j.astype(np.float64), xi, 1)
    return slope * j + intercept


def ocean_flatness_nrmse(denoised, strip, normalize="profile"):
    """Deviation of the strip's range profile from its own straight-line fit.

    Returns ``sqrt(mean((xi - fit)^2))`` divided by the span of the profile
    ``xi`` (default) or, with ``normalize="fit"``, by the span of the fitted
    line. The latter blows up whenever the fitted slope is near zero. A
    profile that is exactly a line scores 0.
    """
    if normalize not in ("fit", "profile"):
        raise ValueError(f"unknown normalisation {normalize!r}")
    j, xi = range_profile(denoised, strip)
    if len(xi) < 2:
        raise DegenerateRange("strip has fewer than two usable columns")
    fit = linear_fit(j, xi)
    rms = math.sqrt(float(np.mean((xi - fit) ** 2)))
    if rms <= 1e-12 * max(float(np.max(np.abs(xi))), 1e-300):
        return 0.0
    ref = fit if normalize == "fit" else xi
    span = float(ref.max() - ref.min())
    if span == 0.0:
        raise DegenerateRange("range profile has zero span")
    return rms / span
