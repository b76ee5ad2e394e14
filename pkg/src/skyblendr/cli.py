"""Command-line entry point."""

import argparse
import sys

from . import __version__
from .pipeline import PHASES, PipelineConfig, run, write_report


def build_parser():
    parser = argparse.ArgumentParser(
        prog="skyblendr",
        description="Replace the sky in a numbered image sequence with a "
        "warped, motion-tracked sky template.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", metavar="PATH",
                        help="flat key = value config file")
    parser.add_argument("--input", metavar="DIR",
                        help="input frame directory (numbered images)")
    parser.add_argument("--output", metavar="DIR",
                        help="output frame directory")
    parser.add_argument("--template", metavar="PATH", help="sky template image")
    parser.add_argument("--alpha", type=float, help="recoloring strength")
    parser.add_argument("--beta", type=float, help="relighting factor")
    parser.add_argument("--radius", type=int, help="guided filter radius")
    parser.add_argument("--epsilon", type=float,
                        help="guided filter regularization")
    parser.add_argument("--eta", type=float,
                        help="match probability cutoff for the density filter")
    parser.add_argument("--bandwidth", type=float,
                        help="density filter bandwidth in pixels")
    parser.add_argument("--crop-factor", type=float,
                        help="visible fraction of the sky template")
    parser.add_argument("--matte-dir", metavar="DIR",
                        help="directory of externally produced matte files")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--threads", type=int, help="frame read prefetch threads")
    parser.add_argument("--report", metavar="JSON_PATH",
                        help="write the run report as JSON")
    return parser


_OVERRIDE_KEYS = {
    "input": "input_dir",
    "output": "output_dir",
    "template": "template_path",
    "alpha": "alpha",
    "beta": "beta",
    "radius": "radius",
    "epsilon": "epsilon",
    "eta": "eta",
    "bandwidth": "bandwidth",
    "crop_factor": "crop_factor",
    "matte_dir": "matte_dir",
    "seed": "seed",
    "threads": "threads",
}


def _print_summary(summary, stream):
    print(
        f"{summary['frames']} frames at {summary['width']}x{summary['height']} "
        f"({summary['backend']} backend), {summary['fallbacks']} motion "
        f"fallback(s)",
        file=stream,
    )
    print(
        f"overall {summary['fps_overall']:.2f} fps "
        f"({summary['wall_seconds']:.2f} s wall), "
        f"processing {summary['fps_processing']:.2f} fps",
        file=stream,
    )
    for phase in PHASES:
        print(
            f"  {phase:<8} {summary['phase_fps'][phase]:8.2f} fps "
            f"({summary['phase_seconds'][phase]:.2f} s)",
            file=stream,
        )


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, attr)
        for attr, key in _OVERRIDE_KEYS.items()
        if getattr(args, attr) is not None
    }
    try:
        if args.config:
            config = PipelineConfig.from_file(args.config, overrides)
        else:
            config = PipelineConfig.from_mapping(overrides)
        report = run(config)
    except (ValueError, FileNotFoundError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_summary(report["summary"], sys.stdout)
    if args.report:
        write_report(report, args.report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
