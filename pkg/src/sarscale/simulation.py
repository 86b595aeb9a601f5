"""Re-estimation experiment: inject scaled noise into clean scenes, recover it.

Each (image, replicate) pair draws its true scaling vector from its own
random stream, ``SeedSequence(seed, spawn_key=(image, replicate))``, so the
records do not depend on how replicates are distributed over processes.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import SUBSWATHS
from .denoise import SIMULATION_BASELINE_K, DenoiseConfig, apply, scale_grid
from .errors import DegenerateField, DegenerateRange, DegenerateVariance
from .estimate import estimate_scaling
from .metrics import nrmse, psnr, ssim
from .noise_field import SceneRaster, check_shapes
from .objective import ObjectiveParams
from .stats import paired_t_test_one_tailed

PUBLISHED_K_RANGES = ((1.2, 1.6), (0.8, 1.0), (0.92, 1.02), (0.95, 1.05), (0.98, 1.02))
METHODS = ("noisy", "baseline", "proposed")
METRICS = ("nrmse", "psnr", "ssim")
HIGHER_IS_BETTER = {"nrmse": False, "psnr": True, "ssim": True}


@dataclass(frozen=True)
class SimulationSpec:
    k_ranges: tuple = PUBLISHED_K_RANGES
    replicates: int = 10
    seed: int = 0
    snr_target: float = 0.5
    baseline_k: tuple = SIMULATION_BASELINE_K

    def __post_init__(self):
        if len(self.k_ranges) != len(SUBSWATHS):
            raise ValueError("need one k interval per subswath")
        for lo, hi in self.k_ranges:
            if lo > hi:
                raise ValueError(f"empty k interval ({lo}, {hi})")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")


def inject_noise(clean, field, k_true):
    """``clean + k_a y`` in every subswath cell."""
    check_shapes(clean, field)
    noisy = clean.values + scale_grid(field, k_true) * field.values
    return SceneRaster(noisy, clean.valid_mask.copy())


def rescale_to_snr(clean, field, snr_target):
    """Scale ``clean`` so that mean(clean) / mean(noise) equals ``snr_target``."""
    check_shapes(clean, field)
    cells = field.valid & clean.valid_mask
    noise_mean = float(field.values[cells].mean()) if cells.any() else 0.0
    if noise_mean <= 0.0:
        raise DegenerateField("noise field has zero mean over the scene")
    clean_mean = float(clean.values[cells].mean())
    if clean_mean <= 0.0:
        raise DegenerateField("clean raster has zero mean over the scene")
    scale = snr_target * noise_mean / clean_mean
    return SceneRaster(clean.values * scale, clean.valid_mask.copy())


def draw_k(spec, image, replicate):
    seq = np.random.SeedSequence(spec.seed, spawn_key=(image, replicate))
    rng = np.random.Generator(np.random.PCG64(seq))
    lo, hi = np.array(spec.k_ranges, dtype=np.float64).T
    return lo + (hi - lo) * rng.random(len(lo))


def _score(pred, ref):
    try:
        e = nrmse(pred, ref)
    except DegenerateRange:
        e = math.nan
    try:
        s = ssim(pred, ref)
    except DegenerateRange:
        s = math.nan
    return {"nrmse": e, "psnr": psnr(pred, ref) if ref.max() > 0 else math.nan, "ssim": s}


def _replicate(args):
    image, replicate, clean, field, cal, spec, params = args
    k_true = draw_k(spec, image, replicate)
    noisy = inject_noise(clean, field, k_true)
    estimate, _ = estimate_scaling(noisy, field, cal, params)
    keep = DenoiseConfig(mode="dynamic", negative_policy="keep")
    outputs = {
        "noisy": noisy.values,
        "baseline": apply(noisy, field, spec.baseline_k, keep).values,
        "proposed": apply(noisy, field, estimate.k, keep).values,
    }
    records = []
    for method in METHODS:
        rec = {"image_id": image, "replicate": replicate,
               "k_true": [float(x) for x in k_true],
               "k_hat": [float(x) for x in estimate.k], "method": method}
        rec.update(_score(outputs[method], clean.values))
        records.append(rec)
    return records


@dataclass
class SimulationResult:
    records: list
    summary: dict = field(default_factory=dict)

    def write_csv(self, path):
        write_records_csv(path, self.records)

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_records_csv(path, records):
    header = (["image_id", "replicate"] + [f"k_true_{a}" for a in SUBSWATHS]
              + [f"k_hat_{a}" for a in SUBSWATHS] + ["method", *METRICS])
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for r in records:
            out.writerow([r["image_id"], r["replicate"],
                          *(repr(x) for x in r["k_true"]), *(repr(x) for x in r["k_hat"]),
                          r["method"], *(repr(float(r[m])) for m in METRICS)])


def _finite_pairs(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    ok = np.isfinite(a) & np.isfinite(b)
    return a[ok], b[ok]


def compare(records, metric, better, worse):
    """One-tailed paired test that ``better`` beats ``worse`` on ``metric``."""
    by = {m: {} for m in (better, worse)}
    for r in records:
        if r["method"] in by:
            by[r["method"]][(r["image_id"], r["replicate"])] = r[metric]
    keys = sorted(set(by[better]) & set(by[worse]))
    good, bad = _finite_pairs([by[better][k] for k in keys], [by[worse][k] for k in keys])
    if len(good) < 2:
        return None
    # alternative mean(a - b) < 0 with a the sample expected to be lower
    a, b = (bad, good) if HIGHER_IS_BETTER[metric] else (good, bad)
    try:
        return paired_t_test_one_tailed(a, b)
    except DegenerateVariance:
        return None


def summarize(records):
    summary = {"methods": {}, "tests": {}, "n": 0}
    for method in METHODS:
        rows = [r for r in records if r["method"] == method]
        summary["n"] = max(summary["n"], len(rows))
        stats = {}
        for m in METRICS:
            vals = np.array([r[m] for r in rows], dtype=np.float64)
            vals = vals[np.isfinite(vals)]
            stats[m] = {"mean": float(vals.mean()) if len(vals) else math.nan,
                        "std": float(vals.std(ddof=1)) if len(vals) > 1 else math.nan}
        summary["methods"][method] = stats
    for other in ("noisy", "baseline"):
        for m in METRICS:
            res = compare(records, m, "proposed", other)
            summary["tests"][f"proposed_vs_{other}_{m}"] = (
                None if res is None else {"t": res.statistic, "p": res.pvalue, "df": res.df})
    return summary


def run_simulation(clean_set, field, cal, spec=SimulationSpec(), params=ObjectiveParams(),
                   jobs=1):
    """Run every (image, replicate) of the experiment.

    Clean rasters are first rescaled to ``spec.snr_target``. Records come
    back in (image, replicate, method) order whatever ``jobs`` is.
    """
    clean_set = [rescale_to_snr(c, field, spec.snr_target) for c in clean_set]
    tasks = [(i, r, clean, field, cal, spec, params)
             for i, clean in enumerate(clean_set) for r in range(spec.replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_replicate, tasks))
    else:
        chunks = [_replicate(t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    return SimulationResult(records, summarize(records))
