"""Command line entry point: render a spline file to a window or an image."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

from .model import SplineFileError, load


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-tool",
        description="Plot a spline file produced by the bhm fitter, "
        "with its error band.",
    )
    parser.add_argument("spline_file", help="spline file to plot")
    parser.add_argument(
        "-o", "--output", default="",
        help="write the figure to this image file instead of showing it",
    )
    parser.add_argument(
        "-n", "--grid-points", type=int, default=512,
        help="number of evaluation points (default 512)",
    )
    args = parser.parse_args(argv)

    if args.grid_points < 2:
        print("plot-tool: need at least two grid points", file=sys.stderr)
        return 1
    try:
        spline = load(args.spline_file)
    except OSError as exc:
        print(f"plot-tool: {exc}", file=sys.stderr)
        return 1
    except SplineFileError as exc:
        print(f"plot-tool: {args.spline_file}: {exc}", file=sys.stderr)
        return 1

    output = args.output
    headless = not os.environ.get("DISPLAY")
    if output or headless:
        import matplotlib

        matplotlib.use("Agg", force=True)
        if not output:
            output = str(Path(args.spline_file).with_suffix(".png"))
    import matplotlib.pyplot as plt

    ax = spline.plot(npoints=args.grid_points)
    if output:
        ax.figure.savefig(output, dpi=120)
        print(f"plot-tool: wrote {output}", file=sys.stderr)
    else:
        plt.show()
    return 0


def run_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run_main()
