"""Command line wrapper: one figure per invocation.

Usage: xlplots <figure-kind> <csv...> -o <path>. Input problems (absent
files, empty CSVs, missing columns or metrics) exit 2 without creating any
output; the message says which input and what was wrong.
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xlplots",
        description="Render simulator CSV artifacts as PNG+SVG figures",
    )
    parser.add_argument("kind", choices=KINDS, help="figure family to draw")
    parser.add_argument("csvs", nargs="+", help="input CSV files")
    parser.add_argument("-o", "--out", required=True,
                        help="output path; .png and .svg are written side by side")
    parser.add_argument("--labels", help="comma-separated series labels, one per CSV")
    parser.add_argument("--metrics", default="sinr_db",
                        help="comma-separated metric names for power-and-cti-vs-time")
    parser.add_argument("--bandwidth", type=int,
                        help="bandwidth filter for capacity-vs-mcs tables")
    parser.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        csv_paths=tuple(args.csvs),
        out_path=args.out,
        labels=tuple(s.strip() for s in args.labels.split(",")) if args.labels else (),
        metrics=tuple(s.strip() for s in args.metrics.split(",")),
        bandwidth_mhz=args.bandwidth,
        title=args.title,
    )
    try:
        written = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("wrote " + " and ".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
