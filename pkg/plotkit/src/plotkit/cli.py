"""Command-line entry point: one figure per invocation.

    plotkit STUDY_DIR FIGURE_ID [--format png|svg|pdf] [--out DIR]
    plotkit --list

Exit status: 0 on success, 1 when the study directory cannot back the
figure (missing or malformed tables), 2 for usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURES, OUT_FORMATS, FigureSpec, render
from .studydir import PlotkitError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render one figure from a simulator study directory.")
    parser.add_argument(
        "study_dir", nargs="?", type=Path,
        help="study directory written by `aimarketsim study <preset>`")
    parser.add_argument(
        "figure_id", nargs="?", choices=tuple(FIGURES), metavar="figure_id",
        help="figure to render; see --list for the available ids")
    parser.add_argument(
        "--format", dest="out_format", default="png", choices=OUT_FORMATS,
        help="output format (default: png)")
    parser.add_argument(
        "--out", type=Path, default=Path("."),
        help="directory for the rendered file (default: current directory)")
    parser.add_argument(
        "--list", action="store_true",
        help="list the available figure ids and exit")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list:
        width = max(len(name) for name in FIGURES)
        for name, figure in FIGURES.items():
            print(f"{name:<{width}}  {figure.description}")
        return 0

    if args.study_dir is None or args.figure_id is None:
        parser.error("study_dir and figure_id are required (or use --list)")

    try:
        spec = FigureSpec(args.study_dir, args.figure_id, args.out_format)
        target = render(spec, out_dir=args.out)
    except (PlotkitError, ValueError) as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 1
    print(target)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
