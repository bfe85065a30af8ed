"""Script entry points: each takes --run DIR --out DIR."""

import argparse
import sys

from .artifacts import ArtifactError
from .plots import plot_diagnostics, plot_fields, plot_optim


def _parser(description, with_times=False):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--run", required=True, help="run directory to read")
    p.add_argument("--out", required=True, help="directory for figures")
    if with_times:
        p.add_argument("--times", default=None,
                       help="comma-separated times; nearest stored "
                            "steps are plotted (default: all)")
    return p


def _run(fn, args, **kwargs):
    try:
        written = fn(args.run, args.out, **kwargs)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def fields_main(argv=None):
    args = _parser("Plot phase/nutrient snapshots",
                   with_times=True).parse_args(argv)
    times = ([float(x) for x in args.times.split(",")]
             if args.times else None)
    return _run(plot_fields, args, times=times)


def diagnostics_main(argv=None):
    args = _parser("Plot energy/mass/nutrient-bound curves").parse_args(argv)
    return _run(plot_diagnostics, args)


def optim_main(argv=None):
    args = _parser("Plot optimizer descent curves").parse_args(argv)
    return _run(plot_optim, args)


if __name__ == "__main__":
    sys.exit(fields_main())
