"""Batch evaluation over real (or synthetic) scenes using ocean-strip flatness.

A manifest lists scenes, each with a raster, a calibration document, its
cross-polarisation, a hand-picked open-water strip and a processor class.
Every scene is denoised with each requested method and scored by how far
the strip's mean range profile departs from a straight line.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import SUBSWATHS, load_calibration
from .denoise import ESA_K, MODES, DenoiseConfig, apply, static_defaults
from .errors import DegenerateVariance, NumericalError, SarScaleError
from .estimate import estimate_scaling
from .metrics import OceanStrip, linear_fit, ocean_flatness_nrmse, range_profile
from .noise_field import NoiseField, SceneRaster, build_noise_field
from .objective import ObjectiveParams
from .raster_io import read_raster
from .stats import paired_t_test_one_tailed

log = logging.getLogger(__name__)

IPF_CLASSES = ("le_2_91", "ge_3")


@dataclass(frozen=True)
class ManifestEntry:
    scene_id: str
    raster_path: Path
    calibration_path: Path
    polarization: str
    ocean_strip: OceanStrip
    ipf_class: str = "le_2_91"


@dataclass(frozen=True)
class SceneManifest:
    entries: tuple

    @classmethod
    def load(cls, path):
        path = Path(path)
        base = path.parent
        obj = json.loads(path.read_text())
        entries = []
        for n, item in enumerate(obj["scenes"]):
            try:
                strip = item["ocean_strip"]
                pol = item.get("polarization", "HV").upper()
                ipf = item.get("ipf_class", "le_2_91")
                if pol not in ("HV", "VH"):
                    raise ValueError(f"polarization {pol!r}")
                if ipf not in IPF_CLASSES:
                    raise ValueError(f"ipf_class {ipf!r}")
                entries.append(ManifestEntry(
                    str(item["scene_id"]), base / item["raster"], base / item["calibration"],
                    pol, OceanStrip(tuple(strip["rows"]), tuple(strip.get("cols", (None, None)))),
                    ipf))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: scenes[{n}]: bad entry ({exc})") from None
        return cls(tuple(entries))

    def dump(self, path):
        path = Path(path)
        base = path.parent

        def rel(p):
            try:
                return str(Path(p).relative_to(base))
            except ValueError:
                return str(p)

        scenes = [{"scene_id": e.scene_id, "raster": rel(e.raster_path),
                   "calibration": rel(e.calibration_path), "polarization": e.polarization,
                   "ocean_strip": {"rows": list(e.ocean_strip.row_span),
                                   "cols": list(e.ocean_strip.col_span)},
                   "ipf_class": e.ipf_class} for e in self.entries]
        path.write_text(json.dumps({"scenes": scenes}, indent=1) + "\n")


@dataclass
class ScenePrep:
    """What the per-scene worker hands back: the strip and the dynamic estimate."""

    entry: ManifestEntry
    strip_raster: SceneRaster = None
    strip_field: NoiseField = None
    k_hat: tuple = None
    warning: str = None
    error: str = None


def _prepare(args):
    entry, params, need_dynamic = args
    prep = ScenePrep(entry)
    try:
        cal = load_calibration(entry.calibration_path)
        raster = read_raster(entry.raster_path)
        fld = build_noise_field(cal)
        if raster.shape != fld.shape:
            raise NumericalError(f"raster {raster.shape} vs calibration {fld.shape}")
        (r0, r1), (c0, c1) = entry.ocean_strip.row_span, entry.ocean_strip.col_span
        c0 = 0 if c0 is None else c0
        c1 = raster.shape[1] - 1 if c1 is None else c1
        OceanStrip((r0, r1), (c0, c1)).check(raster.shape)
        rows, cols = slice(r0, r1 + 1), slice(c0, c1 + 1)
        prep.strip_raster = SceneRaster(raster.values[rows, cols], raster.valid_mask[rows, cols])
        prep.strip_field = NoiseField(fld.values[rows, cols], fld.labels[rows, cols],
                                      fld.half_period)
    except (SarScaleError, OSError, ValueError) as exc:
        prep.error = f"{type(exc).__name__}: {exc}"
        return prep
    if need_dynamic:
        try:
            est, _ = estimate_scaling(raster, fld, cal, params)
            prep.k_hat = tuple(float(x) for x in est.k)
        except NumericalError as exc:
            prep.warning = f"{type(exc).__name__}: {exc}; dynamic falls back to esa"
            log.warning("%s: %s", entry.scene_id, prep.warning)
    return prep


@dataclass
class EvaluationResult:
    rows: list
    failures: list
    aggregate: dict
    profiles: list = field(default_factory=list)

    def write(self, outdir):
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "scenes.csv", "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["scene_id", "polarization", "ipf_class", "method",
                          *(f"k_{a}" for a in SUBSWATHS), "flatness_nrmse", "fallback"])
            for r in self.rows:
                out.writerow([r["scene_id"], r["polarization"], r["ipf_class"], r["method"],
                              *(repr(x) for x in r["k"]), repr(r["flatness_nrmse"]),
                              r["fallback"] or ""])
        with open(outdir / "profiles.csv", "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["scene_id", "method", "range_index", "xi", "xi_fit"])
            for scene_id, method, j, xi, fit in self.profiles:
                for jj, a, b in zip(j, xi, fit):
                    out.writerow([scene_id, method, int(jj), repr(float(a)), repr(float(b))])
        with open(outdir / "aggregate.json", "w") as fh:
            json.dump({"aggregate": self.aggregate, "failures": self.failures}, fh,
                      indent=2, sort_keys=True)
            fh.write("\n")


def _stats(values):
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    return {"n": int(len(v)),
            "mean": float(v.mean()) if len(v) else math.nan,
            "std": float(v.std(ddof=1)) if len(v) > 1 else math.nan}


def _paired(rows, better, worse):
    by = {}
    for r in rows:
        by.setdefault(r["scene_id"], {})[r["method"]] = r["flatness_nrmse"]
    pairs = [(d[better], d[worse]) for _, d in sorted(by.items())
             if better in d and worse in d
             and math.isfinite(d[better]) and math.isfinite(d[worse])]
    if len(pairs) < 2:
        return None
    a, b = np.array(pairs).T
    try:
        res = paired_t_test_one_tailed(a, b)
    except DegenerateVariance:
        return None
    return {"t": res.statistic, "p": res.pvalue, "df": res.df, "n": len(pairs)}


def _aggregate(rows, methods):
    groups = {"all": rows}
    for ipf in IPF_CLASSES:
        sub = [r for r in rows if r["ipf_class"] == ipf]
        if sub:
            groups[ipf] = sub
    out = {}
    for name, sub in groups.items():
        block = {"methods": {m: _stats([r["flatness_nrmse"] for r in sub if r["method"] == m])
                             for m in methods},
                 "tests": {}}
        for other in ("esa", "static"):
            if "dynamic" in methods and other in methods:
                block["tests"][f"dynamic_vs_{other}"] = _paired(sub, "dynamic", other)
        out[name] = block
    return out


def batch_mean_static(preps):
    """Mean dynamic estimate per polarisation over scenes that produced one."""
    out = {}
    for pol in ("HV", "VH"):
        ks = [p.k_hat for p in preps if p.entry.polarization == pol and p.k_hat is not None]
        if ks:
            out[pol] = tuple(float(x) for x in np.mean(ks, axis=0))
    return out


def run_evaluation(manifest, methods=MODES, params=ObjectiveParams(), static_source="published",
                   static_k=None, normalize="profile", jobs=1):
    """Denoise every scene with each method and score ocean-strip flatness.

    ``static_source`` selects the static vector: ``"published"`` uses the
    published per-polarisation means, ``"batch_mean"`` the mean dynamic
    estimate over this batch; ``static_k`` (a polarisation -> vector map)
    overrides both. Scenes that cannot be loaded are listed in ``failures``
    and produce no rows; a failed dynamic estimate falls back to the ESA
    vector for that scene and is flagged.
    """
    methods = tuple(m for m in MODES if m in set(methods))
    need_dynamic = "dynamic" in methods or ("static" in methods and static_source == "batch_mean"
                                            and static_k is None)
    tasks = [(e, params, need_dynamic) for e in manifest.entries]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            preps = list(pool.map(_prepare, tasks))
    else:
        preps = [_prepare(t) for t in tasks]

    if static_k is None:
        static_k = batch_mean_static(preps) if static_source == "batch_mean" else {}
    keep = DenoiseConfig(mode="dynamic", negative_policy="keep")

    rows, failures, profiles = [], [], []
    for prep in sorted(preps, key=lambda p: p.entry.scene_id):
        e = prep.entry
        if prep.error:
            failures.append({"scene_id": e.scene_id, "reason": prep.error})
            continue
        strip = OceanStrip((0, prep.strip_raster.shape[0] - 1),
                           (0, prep.strip_raster.shape[1] - 1))
        offset = 0 if e.ocean_strip.col_span[0] is None else e.ocean_strip.col_span[0]
        for method in methods:
            fallback = None
            if method == "esa":
                k = ESA_K
            elif method == "static":
                k = static_k.get(e.polarization) or static_defaults(e.polarization)
            elif prep.k_hat is None:
                k, fallback = ESA_K, "esa"
            else:
                k = prep.k_hat
            den = apply(prep.strip_raster, prep.strip_field, k, keep)
            try:
                score = ocean_flatness_nrmse(den, strip, normalize=normalize)
            except NumericalError as exc:
                log.warning("%s/%s: %s", e.scene_id, method, exc)
                score = math.nan
            rows.append({"scene_id": e.scene_id, "polarization": e.polarization,
                         "ipf_class": e.ipf_class, "method": method,
                         "k": [float(x) for x in k], "flatness_nrmse": score,
                         "fallback": fallback})
            j, xi = range_profile(den, strip)
            if len(j) >= 2:
                profiles.append((e.scene_id, method, j + offset, xi, linear_fit(j, xi)))

    aggregate = _aggregate(rows, methods)
    aggregate["static_k"] = {pol: list(v) for pol, v in static_k.items()}
    return EvaluationResult(rows, failures, aggregate, profiles)
