"""CLI: render one input file to one image.

Usage: kinoviz INPUT --kind {trajectory,profiles,scaling} --out IMAGE
Exit codes mirror the harness: 0 success, 1 usage error, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .render import DocumentError, plot_profiles, plot_scaling, plot_trajectory

BUILDERS = {
    "trajectory": plot_trajectory,
    "profiles": plot_profiles,
    "scaling": plot_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinoviz", description="render kinoplan output files to images"
    )
    parser.add_argument("input", help="trajectory or summary JSON file")
    parser.add_argument("--kind", required=True, choices=sorted(BUILDERS))
    parser.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        with open(args.input) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot parse {args.input}: {exc}", file=sys.stderr)
        return 2
    try:
        fig = BUILDERS[args.kind](doc)
    except DocumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        fig.savefig(args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
