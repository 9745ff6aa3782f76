"""Command-line front end for the simulation/reconstruction pipeline.

Every subcommand resolves one ExperimentConfig from (in order of increasing
precedence) built-in defaults, --config FILE, repeated --set section.key=value
overrides, and the convenience flags of the subcommand; it then prints the
fully resolved config and the master seed before doing anything. Exit codes:
0 success, 1 usage/validation error, 2 I/O or file-format error.

FLATCAM_THREADS caps sweep parallelism (0 or unset = auto).
"""

from __future__ import annotations

import argparse
import glob
import math
import os
import sys

import numpy as np

from .config import ExperimentConfig, override_value, parse_config_values, serialize_config
from .errors import ConfigError, FormatError, ValidationError
from .fileio import (
    read_mask,
    read_matrix,
    read_volume,
    write_mask,
    write_matrix,
    write_pgm,
    write_reconstruction,
    write_volume,
)
from .model import collapse_intensity, volume_to_depth_intensity
from .pursuit import depth_pursuit, fixed_depth_reconstruct
from .scenes import NoiseSpec, active_pixels, depth_accuracy, generate_cards_scene, psnr, simulate_measurements
from .sweep import records_to_csv, run_sweep, summarize_psnr

__all__ = ["main", "run"]


class _UsageError(Exception):
    def __init__(self, parser, message):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(self, message)


def _int_list(text):
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _build_parser():
    parser = _Parser(prog="flatcam3d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text, **flags):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="configuration file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one configuration value (repeatable)",
        )
        return p

    p = add("gen-mask", "generate a pseudorandom binary mask file")
    p.add_argument("--features", type=int, help="number of mask features")
    p.add_argument("--pitch-mm", type=float, help="mask feature pitch (mm)")
    p.add_argument("--seed", type=int, help="mask seed")
    p.add_argument("--symmetric", type=int, choices=(0, 1), help="mirror about the centre")
    p.add_argument("-o", "--output", required=True, help="output FCMASK path")

    p = add("gen-scene", "generate a random multi-card scene volume")
    p.add_argument("--cards", type=int, help="number of cards")
    p.add_argument("--seed", type=int, help="scene seed")
    p.add_argument("-o", "--output", required=True, help="output FCVOL path")
    p.add_argument("--pgm", help="also write an intensity preview PGM here")

    p = add("build-op", "materialise the per-camera, per-depth system matrices")
    p.add_argument("--mask", help="FCMASK file (default: generate from config)")
    p.add_argument("--cameras", type=int, help="use the default n-camera rig")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = add("simulate", "simulate noisy sensor measurements of a scene")
    p.add_argument("--scene", required=True, help="input scene FCVOL")
    p.add_argument("--mask", help="FCMASK file (default: generate from config)")
    p.add_argument("--cameras", type=int, help="use the default n-camera rig")
    p.add_argument("--snr-db", type=float, help="measurement SNR (dB, inf = clean)")
    p.add_argument("--noise-seed", type=int, help="noise seed")
    p.add_argument("-o", "--output", required=True, help="output directory (meas_c*.fcmat)")

    p = add("reconstruct", "jointly estimate depth map and intensity")
    p.add_argument("--measurements", required=True, help="directory with meas_c*.fcmat")
    p.add_argument("--mask", help="FCMASK file (default: generate from config)")
    p.add_argument("--cameras", type=int, help="use the default n-camera rig")
    p.add_argument("--truth", help="ground-truth scene FCVOL (prints PSNR)")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = add("baseline", "fixed-depth reconstruction at one or all depth indices")
    p.add_argument("--measurements", required=True, help="directory with meas_c*.fcmat")
    p.add_argument("--mask", help="FCMASK file (default: generate from config)")
    p.add_argument("--cameras", type=int, help="use the default n-camera rig")
    p.add_argument("--truth", help="ground-truth scene FCVOL (prints PSNR per depth)")
    p.add_argument("--depth-index", default="scan", help="plane index, or 'scan' for all")
    p.add_argument("--ridge", type=float, default=1e-6, help="relative ridge weight")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = add("evaluate", "score a reconstruction against a ground-truth scene")
    p.add_argument("--truth", required=True, help="ground-truth scene FCVOL")
    p.add_argument("--intensity", required=True, help="reconstructed intensity FCMAT")
    p.add_argument("--depth-map", help="reconstructed depth map FCMAT")

    p = add("sweep", "PSNR sweep over depth-plane and camera counts")
    p.add_argument("--K", type=_int_list, default=[5, 10, 15, 20, 25], help="comma list of K")
    p.add_argument("--cameras", type=_int_list, default=[1, 3], help="comma list of counts")
    p.add_argument("--trials", type=int, default=10, help="trials per cell")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("-o", "--output", required=True, help="output directory")

    return parser


_FLAG_KEYS = {
    "gen-mask": {
        "features": "mask.features",
        "pitch_mm": "mask.pitch_mm",
        "seed": "mask.seed",
        "symmetric": "mask.symmetric",
    },
    "gen-scene": {"cards": "scene.cards", "seed": "scene.seed"},
    "simulate": {"snr_db": "noise.snr_db", "noise_seed": "noise.seed"},
}


def _load_config(args):
    values = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            values = parse_config_values(fh.read())
    for item in args.overrides:
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        override_value(values, key, value)
    for attr, key in _FLAG_KEYS.get(args.command, {}).items():
        flag = getattr(args, attr, None)
        if flag is not None:
            override_value(values, key, repr(flag) if isinstance(flag, float) else str(flag))
    return ExperimentConfig(**values).resolved()


def _master_seed(args, cfg):
    if args.command == "sweep":
        return args.seed
    return {
        "gen-mask": cfg.mask_seed,
        "gen-scene": cfg.scene_seed,
        "simulate": cfg.noise_seed,
    }.get(args.command, 0)


def _operator(args, cfg):
    mask = read_mask(args.mask) if getattr(args, "mask", None) else None
    return cfg.build_rig_operator(n_cameras=getattr(args, "cameras", None), mask=mask)


def _read_measurements(directory, op):
    paths = sorted(glob.glob(os.path.join(directory, "meas_c*.fcmat")))
    if len(paths) != op.n_cameras:
        raise ValidationError(
            f"{directory}: found {len(paths)} meas_c*.fcmat files for {op.n_cameras} cameras"
        )
    return [read_matrix(p) for p in paths]


def _truth_metrics(truth_path, intensity, depth_map=None):
    scene = read_volume(truth_path)
    reference = collapse_intensity(scene)
    lines = [f"psnr_db: {psnr(reference, intensity):.4f}"]
    if depth_map is not None:
        true_map, _ = volume_to_depth_intensity(scene)
        acc = depth_accuracy(true_map, depth_map, active_pixels(reference))
        lines.append(f"depth_accuracy: {acc:.4f}")
    return lines


def _cmd_gen_mask(args, cfg):
    mask = cfg.mask_spec()
    write_mask(args.output, mask)
    print(f"wrote {args.output} ({mask.n_features} features, pitch {mask.pitch:g} mm)")
    return 0


def _cmd_gen_scene(args, cfg):
    scene = generate_cards_scene(cfg.scene_spec(), cfg.depth_planes())
    write_volume(args.output, scene)
    print(f"wrote {args.output} (shape {scene.shape})")
    if args.pgm:
        write_pgm(args.pgm, collapse_intensity(scene))
        print(f"wrote {args.pgm}")
    return 0


def _cmd_build_op(args, cfg):
    op = _operator(args, cfg)
    os.makedirs(args.output, exist_ok=True)
    for c in range(op.n_cameras):
        for k in range(op.n_depths):
            write_matrix(os.path.join(args.output, f"phi_x_c{c}_k{k}.fcmat"), op.phi_x[c][k])
            write_matrix(os.path.join(args.output, f"phi_y_c{c}_k{k}.fcmat"), op.phi_y[c][k])
    with open(os.path.join(args.output, "manifest.txt"), "w", encoding="ascii") as fh:
        fh.write(f"cameras {op.n_cameras}\n")
        fh.write(f"depths_mm {','.join(repr(float(d)) for d in op.depths.depths)}\n")
        fh.write(f"scene_pixels {op.n_scene}\n")
        fh.write(f"sensor_pixels {','.join(str(op.sensor_pixels(c)) for c in range(op.n_cameras))}\n")
    print(f"wrote {2 * op.n_cameras * op.n_depths} matrices to {args.output}")
    return 0


def _cmd_simulate(args, cfg):
    op = _operator(args, cfg)
    scene = read_volume(args.scene)
    measurements = simulate_measurements(op, scene, cfg.noise_spec())
    os.makedirs(args.output, exist_ok=True)
    for c, image in enumerate(measurements):
        write_matrix(os.path.join(args.output, f"meas_c{c}.fcmat"), image)
    print(f"wrote {len(measurements)} measurement images to {args.output}")
    return 0


def _cmd_reconstruct(args, cfg):
    op = _operator(args, cfg)
    measurements = _read_measurements(args.measurements, op)
    result = depth_pursuit(op, measurements, cfg.pursuit_config())
    write_reconstruction(args.output, result)
    print(f"iterations: {result.iterations}")
    print(f"converged: {int(result.converged)}")
    if result.residuals:
        print(f"final_residual: {result.residuals[-1]:.6g}")
    if args.truth:
        for line in _truth_metrics(args.truth, result.intensity, result.depth_map):
            print(line)
    print(f"wrote reconstruction artifacts to {args.output}")
    return 0


def _cmd_baseline(args, cfg):
    op = _operator(args, cfg)
    measurements = _read_measurements(args.measurements, op)
    if args.depth_index == "scan":
        indices = range(op.n_depths)
    else:
        indices = [int(args.depth_index)]
    os.makedirs(args.output, exist_ok=True)
    reference = collapse_intensity(read_volume(args.truth)) if args.truth else None
    best = None
    for k in indices:
        res = fixed_depth_reconstruct(op, measurements, k, ridge=args.ridge, cfg=cfg.pursuit_config())
        write_matrix(os.path.join(args.output, f"intensity_k{k}.fcmat"), res.image)
        if reference is not None:
            value = psnr(reference, res.image)
            print(f"depth_index {k}: psnr_db {value:.4f}")
            if best is None or value > best[1]:
                best = (k, value)
        else:
            print(f"depth_index {k}: wrote intensity_k{k}.fcmat")
    if best is not None:
        print(f"best: depth_index {best[0]} psnr_db {best[1]:.4f}")
    return 0


def _cmd_evaluate(args, cfg):
    intensity = read_matrix(args.intensity)
    depth_map = read_matrix(args.depth_map).astype(np.intp) if args.depth_map else None
    for line in _truth_metrics(args.truth, intensity, depth_map):
        print(line)
    return 0


def _cmd_sweep(args, cfg):
    env = os.environ.get("FLATCAM_THREADS", "0")
    try:
        n_workers = int(env)
    except ValueError:
        raise ConfigError(f"FLATCAM_THREADS must be an integer, got {env!r}")
    if n_workers <= 0:
        n_workers = os.cpu_count() or 1
    records = run_sweep(args.K, args.cameras, args.trials, cfg, args.seed, n_workers=n_workers)
    os.makedirs(args.output, exist_ok=True)
    csv_path = os.path.join(args.output, "sweep.csv")
    with open(csv_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(records_to_csv(records))
    summary = summarize_psnr(records)
    with open(os.path.join(args.output, "summary.md"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(summary)
    print(summary, end="")
    print(f"wrote {csv_path}")
    return 0


_COMMANDS = {
    "gen-mask": _cmd_gen_mask,
    "gen-scene": _cmd_gen_scene,
    "build-op": _cmd_build_op,
    "simulate": _cmd_simulate,
    "reconstruct": _cmd_reconstruct,
    "baseline": _cmd_baseline,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        err.parser.print_usage(sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 1
    except SystemExit as err:  # --help
        return int(err.code or 0)
    try:
        cfg = _load_config(args)
        print("# resolved configuration")
        print(serialize_config(cfg), end="")
        print(f"master seed: {_master_seed(args, cfg)}")
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, ValidationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
