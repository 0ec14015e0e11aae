"""Command-line front-end: parameter tables, experiment runs, image rendering.

Exit codes: 0 success, 2 configuration/input error, 3 numerical divergence
during adaptation.
"""

import argparse
import os
import sys

from .canceller import DivergenceError
from .experiments import ConfigError, load_config, run_experiment
from .fileio import read_radar_image, render_pgm
from .radarproc import processing_gain_db, resolutions
from .waveform import PRESETS, make_numerology

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def cmd_table(args):
    names = args.presets or list(PRESETS)
    header = (f"{'preset':<8}{'spacing kHz':>12}{'CP us':>8}{'subc':>7}"
              f"{'symb':>6}{'res m':>8}{'res m/s':>9}{'max m':>8}"
              f"{'max m/s':>9}{'gain dB':>9}")
    print(header)
    print("-" * len(header))
    for name in names:
        num = make_numerology(name)
        res = resolutions(num)
        vmax = "±" + format(res["max_velocity_mps"], ".1f")
        print(
            f"{name:<8}{num.subcarrier_spacing_hz / 1e3:>12g}"
            f"{num.cp_length_s * 1e6:>8g}{num.active_subcarriers:>7}"
            f"{num.ofdm_symbols:>6}{res['distance_resolution_m']:>8.1f}"
            f"{res['velocity_resolution_mps']:>9.1f}"
            f"{res['max_distance_m']:>8.1f}{vmax:>9}"
            f"{processing_gain_db(num.active_subcarriers, num.ofdm_symbols):>9.2f}"
        )
    return EXIT_OK


def cmd_run(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"experiment.threads={args.threads}")
    cfg = load_config(args.config, overrides)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    result = run_experiment(cfg, out_dir)
    print(f"wrote {result['csv']}")
    return EXIT_OK


def cmd_render(args):
    image = read_radar_image(args.image)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.image))
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.splitext(os.path.basename(args.image))[0]
    pgm_path = os.path.join(out_dir, base + ".pgm")
    render_pgm(image.values, pgm_path, floor_db=args.floor_db)
    axes_path = os.path.join(out_dir, base + ".pgm.axes.txt")
    with open(axes_path, "w", encoding="ascii") as fh:
        fh.write(f"rows=range bins, {image.space.distance_per_bin_m!r} m/bin\n")
        fh.write(
            f"cols=velocity bins from {-image.space.max_doppler_bin}, "
            f"{image.space.velocity_per_bin_mps!r} m/s per bin\n"
        )
    print(f"wrote {pgm_path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ofrd", description="OFDM radar baseband simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_table = sub.add_parser("table", help="print radar parameters per preset")
    p_table.add_argument("presets", nargs="*", metavar="PRESET")
    p_table.set_defaults(func=cmd_table)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True, metavar="PATH")
    p_run.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config entry (repeatable)")
    p_run.add_argument("--out", default="ofrd_out", metavar="DIR")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: OFRD_THREADS or CPU count)")
    p_run.set_defaults(func=cmd_run)

    p_render = sub.add_parser("render", help="render a radar image to 8-bit PGM")
    p_render.add_argument("image", metavar="IMAGE.ofrd")
    p_render.add_argument("--out", default=None, metavar="DIR")
    p_render.add_argument("--floor-db", type=float, default=-60.0)
    p_render.set_defaults(func=cmd_render)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
