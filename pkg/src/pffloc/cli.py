"""Command-line entry point: ``pffloc {build-field,simulate,localize,evaluate,compare}``.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import io
from .distance_field import FieldFormatError, VoxelDistanceField, build
from .evaluation import evaluate_trajectory
from .optimizer import OptimizationError
from .pipeline import METHODS, disturbance_schedule, run_localization
from .simulator import simulate_run

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("pffloc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _config(args) -> cfgmod.RunConfig:
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"run.seed={args.seed}")
    if getattr(args, "method", None) is not None:
        overrides.append(f"run.method={args.method}")
    return cfgmod.load(args.config, overrides)


def _path(args, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(args.dir) / p


def cmd_build_field(args) -> int:
    cfg = _config(args)
    map_path = _path(args, args.map or cfg.paths.map)
    out = _path(args, args.out or cfg.paths.field)
    res = args.resolution if args.resolution is not None else cfg.run.field_resolution
    margin = args.margin if args.margin is not None else cfg.run.field_margin
    pts = io.read_map(map_path)
    t0 = time.perf_counter()
    field = build(pts, res, margin)
    elapsed = time.perf_counter() - t0
    out.parent.mkdir(parents=True, exist_ok=True)
    field.save(out)
    print(f"voxels: {field.n_voxels} ({' x '.join(map(str, field.dims))}) at {res} m")
    print(f"build time: {elapsed:.3f} s")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    sim = cfg.simulation
    run = simulate_run(cfg.run.seed, sim.preset, sim.steps, cfg.scan, sim.density, sim.odom_cov())
    p = cfg.paths
    for target in (p.map, p.ground_truth, p.odometry):
        _path(args, target).parent.mkdir(parents=True, exist_ok=True)
    io.write_map(_path(args, p.map), run.world.map_points)
    note = f"preset={sim.preset} seed={cfg.run.seed} steps={sim.steps}"
    io.write_trajectory(_path(args, p.ground_truth), run.ground_truth, comment=note)
    io.write_odometry(_path(args, p.odometry), run.odometry)
    io.write_scan_archive(_path(args, p.scans), run.scans)
    print(f"{sim.preset}: {len(run.world.map_points)} map points, "
          f"{len(run.world.unknown_points)} clutter points, {len(run.scans)} scans")
    return EXIT_OK


def _load_inputs(args, cfg):
    p = cfg.paths
    field = VoxelDistanceField.load(_path(args, p.field))
    scans = io.read_scan_archive(_path(args, p.scans))
    _, gt = io.read_trajectory(_path(args, p.ground_truth))
    odom = io.read_odometry(_path(args, p.odometry)) if _path(args, p.odometry).exists() else None
    if len(gt) != len(scans):
        raise io.FormatError(f"{len(scans)} scans but {len(gt)} ground-truth poses")
    return field, scans, gt, odom


def _localize(args, cfg, method, field, scans, gt, odom):
    dist = disturbance_schedule(len(scans), cfg.run.disturb_every, cfg.run.disturb_magnitude, cfg.run.seed)
    if method == "spf_odom" and odom is None:
        raise cfgmod.ConfigError("spf_odom needs an odometry file")
    settings = replace(cfg, run=replace(cfg.run, method=method)).settings()
    result = run_localization(scans, gt[0], field, settings, method, cfg.run.seed,
                              odometry=odom, disturbances=dist, ground_truth=gt)
    out = _path(args, cfg.paths.output)
    out.mkdir(parents=True, exist_ok=True)
    io.write_trajectory(out / f"estimate_{method}.txt", result.estimates,
                        comment=f"method={method} seed={cfg.run.seed}")
    io.write_report(out / f"report_{method}.csv", result.report)
    return result


def cmd_localize(args) -> int:
    cfg = _config(args)
    inputs = _load_inputs(args, cfg)
    result = _localize(args, cfg, cfg.run.method, *inputs)
    print(f"method: {cfg.run.method}  seed: {cfg.run.seed}  optimizer failures: {result.optimizer_failures}")
    print(result.report.summary())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    steps_e, est = io.read_trajectory(args.estimate)
    steps_g, gt = io.read_trajectory(args.ground_truth)
    if len(est) != len(gt):
        raise cfgmod.ConfigError(f"trajectory length mismatch: {len(est)} estimated vs {len(gt)} ground truth")
    if np.any(steps_e != steps_g):
        raise cfgmod.ConfigError("step indices differ between the two trajectories")
    print(evaluate_trajectory(est, gt).summary())
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise cfgmod.ConfigError(f"unknown methods {bad}; choose from {METHODS}")
    inputs = _load_inputs(args, cfg)
    print(f"{'method':<10}{'pos [cm]':>18}{'ang [deg]':>18}{'failed':>8}{'ms/step':>10}")
    for m in methods:
        r = _localize(args, cfg, m, *inputs).report
        pos = f"{100 * r.pos_mean:.2f} / {100 * r.pos_std:.2f}"
        ang = f"{r.ang_mean:.3f} / {r.ang_std:.3f}"
        print(f"{m:<10}{pos:>18}{ang:>18}{str(r.tracking_failed):>8}{np.mean(r.times_ms[1:]):>10.1f}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    common.add_argument("--seed", type=int)
    common.add_argument("--dir", default=".", help="base directory for relative paths")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="pffloc", description="3D LiDAR localization by particle filtering fused with scan matching")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-field", parents=[common], help="voxel distance field from a point map")
    p.add_argument("--map", help="XYZ or PCD map (default: paths.map)")
    p.add_argument("--out", help="field file (default: paths.field)")
    p.add_argument("--resolution", type=float)
    p.add_argument("--margin", type=float)
    p.set_defaults(func=cmd_build_field)

    p = sub.add_parser("simulate", parents=[common], help="synthetic map, ground truth, scans and odometry")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("localize", parents=[common], help="track a scan sequence")
    p.add_argument("--method", choices=METHODS)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", parents=[common], help="error statistics of an estimated trajectory")
    p.add_argument("estimate")
    p.add_argument("ground_truth")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", parents=[common], help="run several methods on the same data")
    p.add_argument("--methods", default="pff,mmo,mmolfm,ekf,spf_odom")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"pffloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"pffloc: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, io.FormatError, FieldFormatError) as exc:
        print(f"pffloc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OptimizationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"pffloc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"pffloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
