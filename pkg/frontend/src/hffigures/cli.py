"""`render`: one figure per invocation from a results CSV.

Exit codes: 0 success, 2 bad input (missing file/columns, empty data,
output collision without --overwrite).
"""
import argparse
import sys

from .render import (PlotSpec, RenderError, render_coherence_table,
                     render_sweep_figure)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="render", description="plot a sweep or coherence CSV")
    parser.add_argument("--in", dest="csv_path", required=True,
                        help="input CSV (never modified)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--x", default="value",
                        help="x column, or the swept parameter name")
    parser.add_argument("--y", default="nmse_db")
    parser.add_argument("--group", default="estimator")
    parser.add_argument("--title", default="")
    parser.add_argument("--xlabel", default="")
    parser.add_argument("--ylabel", default="")
    parser.add_argument("--overwrite", action="store_true",
                        help="replace an existing output file")
    parser.add_argument("--coherence-table", action="store_true",
                        help="render a coherence-report bar chart instead "
                             "of a sweep line plot")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.coherence_table:
            info = render_coherence_table(args.csv_path, args.out,
                                          overwrite=args.overwrite)
            print(f"wrote {info['out']} ({info['bars']} bars)")
        else:
            spec = PlotSpec(csv_path=args.csv_path, x=args.x, y=args.y,
                            out=args.out, group=args.group, title=args.title,
                            xlabel=args.xlabel, ylabel=args.ylabel,
                            overwrite=args.overwrite)
            info = render_sweep_figure(spec)
            counts = ", ".join(f"{name}: {n} points"
                               for name, n in sorted(info["series"].items()))
            print(f"wrote {info['out']} ({counts})")
    except (RenderError, FileNotFoundError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
