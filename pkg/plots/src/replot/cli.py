"""Entry point: one CSV in, one figure out.

Exit codes: 0 on success, 1 on any failure (bad arguments or a schema
mismatch, with the offending column named on stderr).  Validation runs
before any drawing, so a failing invocation writes no file.
"""

import argparse
import sys

from . import figures
from .schema import HARNESS_HEADER, SHELLS_HEADER, SPECTRUM_HEADER, SchemaError, load_csv

KINDS = {
    "replicability": (HARNESS_HEADER, figures.replicability_figure),
    "error": (HARNESS_HEADER, figures.error_figure),
    "spectrum": (SPECTRUM_HEADER, figures.spectrum_figure),
    "shells": (SHELLS_HEADER, figures.shells_figure),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser():
    parser = _Parser(prog="replot", description="Render replearn CSVs to figures.")
    parser.add_argument("input", help="CSV produced by the experiment tool")
    parser.add_argument("output", help="figure path (.png or .svg)")
    parser.add_argument("--kind", required=True, choices=sorted(KINDS),
                        help="which figure to draw")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if not (args.output.endswith(".png") or args.output.endswith(".svg")):
        print("error: output must end in .png or .svg", file=sys.stderr)
        return 1
    header, builder = KINDS[args.kind]
    try:
        rows = load_csv(args.input, header)
        fig = builder(rows)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    figures.save_figure(fig, args.output)
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
