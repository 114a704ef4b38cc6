"""`nfbeam-plots render` — benchmark CSVs in, figures out.

Exit codes: 0 success, 2 usage/config error, 3 schema-validation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, FigureSpec, render
from .schemas import SchemaError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCHEMA = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfbeam-plots",
                                     description="Render nfbeam benchmark figures")
    subs = parser.add_subparsers(dest="command", required=True)
    sub = subs.add_parser("render", help="render one figure from schema-tagged CSVs")
    sub.add_argument("--kind", required=True, choices=KINDS)
    sub.add_argument("--in", dest="inputs", nargs="+", required=True, type=Path,
                     help="input CSV file(s); rate_timeseries stacks one panel per file")
    sub.add_argument("--out", required=True, type=Path, help="output image (.png or .svg)")
    sub.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=list(args.inputs), output=args.out,
                          styling={"dpi": args.dpi})
        path = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
