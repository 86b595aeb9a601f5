"""Command line entry point: ``sarscale <subcommand> ...``.

Exit codes: 0 success, 2 usage, 3 input/parse error, 4 numerical error,
5 batch finished with failed scenes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import load_calibration, to_json, to_xml, validate_coverage
from .denoise import (ESA_K, SIMULATION_BASELINE_K, STATIC_K, DenoiseConfig, apply,
                      static_defaults)
from .errors import SarScaleError
from .estimate import estimate_scaling
from .fixtures import Geometry, as_raster, make_calibration, textured_scene, write_fixture_set
from .harness import SceneManifest, run_evaluation
from .noise_field import build_noise_field
from .objective import (DEFAULT_EPSILON, PUBLISHED_LAMBDA, PUBLISHED_MU, PUBLISHED_RATIO_BOUNDS,
                        ObjectiveParams)
from .raster_io import read_grid, read_raster, write_grid
from .simulation import PUBLISHED_K_RANGES, SimulationSpec, run_simulation

log = logging.getLogger("sarscale")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4, 5


class JsonLogFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname, "logger": record.name,
                           "message": record.getMessage()})


def _objective_flags(p):
    g = p.add_argument_group("objective (defaults are the published configuration)")
    g.add_argument("--epsilon", type=int, default=DEFAULT_EPSILON,
                   help="half-width in range pixels of the peak/trough and boundary windows")
    g.add_argument("--lambda", dest="lambdas", type=float, nargs=5, default=list(PUBLISHED_LAMBDA),
                   metavar=("EW1", "EW2", "EW3", "EW4", "EW5"),
                   help="regularisation weights pulling each k towards 1")
    g.add_argument("--mu", type=float, default=PUBLISHED_MU,
                   help="weight of the intra-subswath range rows")
    g.add_argument("--ratio-bounds", type=float, nargs=2, default=list(PUBLISHED_RATIO_BOUNDS),
                   metavar=("LO", "HI"),
                   help="keep a pair only if LO < x-difference / y-difference < HI")
    g.add_argument("--min-valid-fraction", type=float, default=0.25,
                   help="windows with fewer usable cells are dropped")


def _params(args):
    return ObjectiveParams(epsilon=args.epsilon, mu=args.mu,
                           ratio_bounds=tuple(args.ratio_bounds), lambdas=tuple(args.lambdas),
                           min_valid_fraction=args.min_valid_fraction)


def _scene_flags(p):
    p.add_argument("--raster", required=True, help="scene .f32 (squared DN) with JSON sidecar")
    p.add_argument("--calibration", required=True, help="noise calibration .xml or .json")
    p.add_argument("--mask-threshold", type=float, default=0.0,
                   help="cells with x <= threshold are masked")


def _load_scene(args):
    cal = load_calibration(args.calibration)
    raster = read_raster(args.raster, args.mask_threshold)
    return cal, raster, build_noise_field(cal)


def cmd_estimate(args):
    cal, raster, field = _load_scene(args)
    params = _params(args)
    estimate, system = estimate_scaling(raster, field, cal, params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    estimate.write_json(out, **{"lambda": list(params.lambdas), "mu": params.mu,
                                "epsilon": params.epsilon,
                                "ratioBounds": list(params.ratio_bounds),
                                "unconstrained": list(system.unconstrained)})
    if args.rows_csv:
        system.write_csv(args.rows_csv)
    print(json.dumps({"k": [float(x) for x in estimate.k]}))
    return EXIT_OK


def cmd_denoise(args):
    cal, raster, field = _load_scene(args)
    params = _params(args)
    report = {"mode": args.mode}
    if args.mode == "esa":
        k = ESA_K
    elif args.mode == "static":
        static_k = getattr(args, "static_k", None)
        k = tuple(static_k) if static_k else static_defaults(args.polarization)
    else:
        estimate, system = estimate_scaling(raster, field, cal, params)
        k = tuple(float(x) for x in estimate.k)
        report.update(estimate.as_dict(**{"lambda": list(params.lambdas), "mu": params.mu,
                                          "epsilon": params.epsilon}))
    report["k"] = [float(x) for x in k]
    config = DenoiseConfig(mode=args.mode, static_k=k if args.mode == "static" else None,
                           negative_policy=getattr(args, "negative", None),
                           output_units=args.units)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_grid(out, apply(raster, field, k, config).values, units=args.units)
    report["negativePolicy"] = config.policy
    report["units"] = args.units
    out.with_suffix(".estimate.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def _parse_ranges(text):
    ranges = []
    for part in text.split(","):
        lo, hi = part.split(":")
        ranges.append((float(lo), float(hi)))
    if len(ranges) != 5:
        raise argparse.ArgumentTypeError("need five LO:HI intervals")
    return tuple(ranges)


def cmd_simulate(args):
    if args.calibration:
        cal = load_calibration(args.calibration)
    else:
        cal = make_calibration(Geometry(rows=args.rows, cols=args.cols), seed=args.seed)
    field = build_noise_field(cal)
    if args.clean:
        clean = [read_raster(p) for p in args.clean]
    else:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(2**31,)))
        clean = [as_raster(textured_scene(rng, field.shape, looks=10.0))
                 for _ in range(args.synthetic)]
    spec = SimulationSpec(k_ranges=args.k_ranges, replicates=args.replicates, seed=args.seed,
                          snr_target=args.snr, baseline_k=tuple(args.baseline_k))
    result = run_simulation(clean, field, cal, spec, _params(args), jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.write_csv(out / "results.csv")
    result.write_summary(out / "summary.json")
    return EXIT_OK


def cmd_evaluate(args):
    manifest = SceneManifest.load(args.manifest)
    result = run_evaluation(manifest, methods=args.methods, params=_params(args),
                            static_source=args.static_source, normalize=args.normalize,
                            jobs=args.jobs)
    result.write(args.out)
    for f in result.failures:
        log.error("%s failed: %s", f["scene_id"], f["reason"])
    return EXIT_PARTIAL if result.failures else EXIT_OK


def cmd_make_fixtures(args):
    geom = Geometry(rows=args.rows, cols=args.cols)
    out = Path(args.out)
    manifest = write_fixture_set(out, n_scenes=args.scenes, seed=args.seed, geom=geom,
                                 snr=args.snr)
    # a noise template plus clean textured rasters for the simulate subcommand
    template = make_calibration(geom, seed=args.seed)
    (out / "template.xml").write_bytes(to_xml(template))
    (out / "template.cal.json").write_text(to_json(template))
    rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(2**31 + 1,)))
    for n in range(args.clean):
        write_grid(out / f"clean_tex{n:03d}.f32",
                   textured_scene(rng, (geom.rows, geom.cols), looks=10.0))
    gaps = validate_coverage(template)
    if gaps:
        log.error("generated calibration has coverage gaps: %s", gaps)
        return EXIT_NUMERIC
    print(json.dumps({"manifest": str(manifest), "template": str(out / "template.xml")}))
    return EXIT_OK


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="sarscale", formatter_class=fmt,
        description="Per-subswath thermal noise scaling for extra-wide swath SAR scenes.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", formatter_class=fmt,
                       help="estimate the five scaling coefficients of one scene")
    _scene_flags(p)
    _objective_flags(p)
    p.add_argument("--out", required=True, help="estimate report JSON")
    p.add_argument("--rows-csv", help="optional dump of every system row")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("denoise", formatter_class=fmt, help="subtract the (scaled) noise field")
    _scene_flags(p)
    _objective_flags(p)
    p.add_argument("--mode", choices=("esa", "static", "dynamic"), default="dynamic",
                   help="k = 1, a fixed vector, or the per-scene estimate")
    p.add_argument("--static-k", type=float, nargs=5, metavar="K", default=argparse.SUPPRESS,
                   help="static scaling vector (default: published mean for --polarization, "
                        f"HV {' '.join(map(str, STATIC_K['HV']))}, "
                        f"VH {' '.join(map(str, STATIC_K['VH']))})")
    p.add_argument("--polarization", choices=("HV", "VH"), default="HV",
                   help="selects the published static vector")
    p.add_argument("--units", choices=("dn2", "dn"), default="dn2",
                   help="squared or linear digital numbers")
    p.add_argument("--negative", choices=("clamp_zero", "keep"), default=argparse.SUPPRESS,
                   help="negative residuals; default clamp_zero for dn, keep for dn2")
    p.add_argument("--out", required=True, help="output .f32 (sidecar and report alongside)")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("simulate", formatter_class=fmt,
                       help="inject scaled noise into clean rasters and re-estimate it")
    _objective_flags(p)
    p.add_argument("--calibration", help="noise template; synthetic when omitted")
    p.add_argument("--rows", type=int, default=480, help="synthetic template rows")
    p.add_argument("--cols", type=int, default=1000, help="synthetic template columns")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--clean", nargs="+", help="clean .f32 rasters")
    src.add_argument("--synthetic", type=int, default=10, help="number of synthetic clean rasters")
    p.add_argument("--replicates", type=int, default=10, help="noisy versions per clean raster")
    p.add_argument("--seed", type=int, default=0, help="root seed of every random stream")
    p.add_argument("--snr", type=float, default=SimulationSpec.snr_target,
                   help="mean(clean) / mean(noise) after rescaling")
    p.add_argument("--k-ranges", type=_parse_ranges, default=PUBLISHED_K_RANGES,
                   help="sampling intervals, 'lo:hi,lo:hi,...' for EW1..EW5")
    p.add_argument("--baseline-k", type=float, nargs=5, default=list(SIMULATION_BASELINE_K),
                   metavar="K", help="fixed vector the estimate is compared against")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", formatter_class=fmt,
                       help="ocean-strip flatness over a manifest of scenes")
    _objective_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--methods", nargs="+", choices=("esa", "static", "dynamic"),
                   default=["esa", "static", "dynamic"])
    p.add_argument("--static-source", choices=("published", "batch_mean"), default="published",
                   help="published mean vectors, or the mean dynamic estimate of this batch")
    p.add_argument("--normalize", choices=("profile", "fit"), default="profile",
                   help="divide the flatness RMSE by the span of the profile or of its fit")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("make-fixtures", formatter_class=fmt,
                       help="write deterministic synthetic scenes and calibration files")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--clean", type=int, default=4, help="clean textured rasters to write")
    p.add_argument("--rows", type=int, default=240)
    p.add_argument("--cols", type=int, default=500)
    p.add_argument("--snr", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_fixtures)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLogFormatter())
    root = logging.getLogger("sarscale")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO if args.verbose else logging.WARNING)
    root.propagate = False
    try:
        return args.func(args)
    except SarScaleError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
