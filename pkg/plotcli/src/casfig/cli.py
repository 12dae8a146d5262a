"""Command-line entry point: casfig --spec figure.json.

Reads a JSON figure specification, extracts the plotted series from the
referenced chiralcas CSV files, and writes the figure plus its JSON
sidecar.  Invalid specs or inputs (including missing CSV columns, which
are reported by name) exit with code 2.
"""

import argparse
import sys

from . import __version__, figspec, render, series
from .csvio import InputError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="casfig",
        description="Render chiralcas CSV output as SVG/PNG figures with "
                    "JSON data sidecars.")
    parser.add_argument("--spec", required=True,
                        help="JSON figure specification")
    parser.add_argument("--version", action="version",
                        version=f"casfig {__version__}")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = figspec.load_spec(args.spec)
        payload = series.build_payload(spec)
    except InputError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    render.render(spec, payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
