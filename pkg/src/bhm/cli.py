"""Command line driver: histogram in, spline file out.

The single argument names a parameter file; an empty string runs entirely on
defaults, reading the histogram from stdin and writing the spline to stdout.
All progress and the verbose fitting log go to stderr.  The optional fit
summary on stdout consists of '#' comment lines only, so stdout remains a
valid spline file even when both end up in the same stream.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

from .config import RunConfig, format_params, parse_params
from .errors import (
    BhmError,
    ConfigError,
    MalformedLine,
    NoAcceptableFit,
    NoUsableLevels,
    SingularSystem,
    ZeroCompatible,
)
from .fitting import bhm_fit, format_fit_info
from .hierarchy import build_hierarchy
from .histogram import normalize, parse_histogram
from .spline import grid_output, serialize

__all__ = ["main", "run_main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NO_FIT = 4
EXIT_ZERO = 5
EXIT_IO = 6

_HELP = """\
usage: bhm PARAMETER_FILE

Restores a smooth piecewise polynomial with an error band from a sampled
histogram.  Pass an empty string ("") to run with all defaults: the
histogram is read from stdin and the spline written to stdout.

Parameter-file lines look like 'Key = value'; keys are case-insensitive,
'#' starts a comment, string values may be quoted.  Keys and defaults:

  InputFile         = ""      histogram file ("" reads stdin)
  OutputFile        = ""      spline file ("" writes stdout)
  GridOutput        = ""      tabulated x/value/error file (off when empty)
  GridPoints        = 512     points in the grid file
  PrintFitInfo      = true    print a '#'-commented fit summary to stdout
  SplineOrder       = 3       polynomial order of the spline pieces
  DataPointsMin     = 100     samples a bin needs to enter the fit
  MinLevel          = 2       intervals never get finer than this many
                              levels above the elementary bins
  Threshold         = 2.0     first acceptance threshold T
  ThresholdMax      = 4.0     last acceptance threshold of the ladder
  ThresholdSteps    = 4       number of ladder steps after the first
  UsableBinFraction = 0.25    populated fraction a level needs to survive
  JumpSuppression   = false   refit with a penalty on spline-knot jumps
  AbortIfZero       = false   stop when the data are compatible with zero

Exit codes: 0 success, 1 usage, 2 parameter-file error, 3 histogram error,
4 no acceptable fit, 5 data compatible with zero, 6 file I/O error.
"""


def main(argv: Optional[list[str]] = None) -> int:
    args = sys.argv[1:] if argv is None else list(argv)
    if len(args) != 1:
        print(_HELP)
        return EXIT_USAGE
    err = sys.stderr

    try:
        text = Path(args[0]).read_text() if args[0] else ""
    except OSError as exc:
        print(f"bhm: cannot read parameter file: {exc}", file=err)
        return EXIT_IO
    try:
        config = parse_params(text)
    except (ConfigError, MalformedLine) as exc:
        print(f"bhm: parameter file: {exc}", file=err)
        return EXIT_CONFIG

    err.write("BHM parameters:\n")
    err.write(format_params(config))

    try:
        if config.input_file:
            with open(config.input_file, "r", encoding="utf-8") as fh:
                hist = parse_histogram(fh)
        else:
            hist = parse_histogram(sys.stdin)
    except OSError as exc:
        print(f"bhm: cannot read histogram: {exc}", file=err)
        return EXIT_IO
    except BhmError as exc:
        print(f"bhm: histogram input: {exc}", file=err)
        return EXIT_INPUT

    hist = normalize(hist)
    err.write(
        f"Histogram: {len(hist.bins)} bins on [{hist.bins[0].x_min:g}, {hist.x_max:g}], "
        f"{hist.total_samples} samples ({hist.excluded_count} outside the range)\n"
    )

    try:
        hier = build_hierarchy(
            hist, config.fit.data_points_min, config.fit.usable_bin_fraction
        )
    except NoUsableLevels as exc:
        print(f"bhm: histogram input: {exc}", file=err)
        return EXIT_INPUT
    err.write(f"Hierarchy levels retained: 0..{hier.finest_level} of 0..{hier.power}\n")

    try:
        spline, diag, _ = bhm_fit(hier, config.fit, log_stream=err)
    except ZeroCompatible as exc:
        print(f"bhm: {exc}", file=err)
        return EXIT_ZERO
    except (NoAcceptableFit, SingularSystem) as exc:
        print(f"bhm: {exc}", file=err)
        return EXIT_NO_FIT

    if config.print_fit_info:
        sys.stdout.write(format_fit_info(spline, diag))

    comments = "spline fit produced by bhm with parameters:\n" + format_params(config)
    rendered = serialize(spline, comments=comments)
    try:
        if config.output_file:
            Path(config.output_file).write_text(rendered)
        else:
            sys.stdout.write(rendered)
        if config.grid_output:
            Path(config.grid_output).write_text(grid_output(spline, config.grid_points))
    except OSError as exc:
        print(f"bhm: cannot write output: {exc}", file=err)
        return EXIT_IO
    return EXIT_OK


def run_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run_main()
