"""Shared fixtures: hand-written spline texts and real fitter output."""

import subprocess
import sys

import matplotlib
import pytest

matplotlib.use("Agg", force=True)


TWO_PIECE_TEXT = """\
# produced by hand for the tests
2 2
0.0 1.0 2.0
# spline piece 1
1.0 0.5 -0.25
0.01 0.0 0.0 0.0 0.0
# spline piece 2
0.75 1.0 -0.5
0.04 0.0 0.0 0.0 0.0
"""


@pytest.fixture
def two_piece_file(tmp_path):
    path = tmp_path / "two_piece.dat"
    path.write_text(TWO_PIECE_TEXT)
    return path


# function, spline order, seed, sample size, bin power
FIT_CASES = [
    ("quartic_polynomial", 4, 11, 40_000, 6),
    ("quartic_polynomial", 3, 12, 40_000, 6),
    ("exponential", 3, 13, 60_000, 6),
    ("exponential", 4, 14, 60_000, 6),
    ("triple_gaussian", 4, 15, 150_000, 8),
]


@pytest.fixture(scope="session")
def fitted_cases(tmp_path_factory):
    """Real spline and grid files, produced through the fitter's CLI only."""
    base = tmp_path_factory.mktemp("fitter_output")
    dirs = []
    for i, (function, order, seed, samples, power) in enumerate(FIT_CASES):
        d = base / f"case{i}_{function}_m{order}"
        d.mkdir()
        (d / "gen.param").write_text(
            f"Function = {function}\n"
            f"SampleSize = {samples}\n"
            f"PowerBins = {power}\n"
            f"Seed = {seed}\n"
        )
        subprocess.run(
            [sys.executable, "-m", "bhm.generator", "gen.param"],
            cwd=d, capture_output=True, check=True,
        )
        (d / "run.param").write_text(
            'InputFile = "histogram.dat"\n'
            'OutputFile = "spline.dat"\n'
            'GridOutput = "grid.dat"\n'
            "GridPoints = 1000\n"
            f"SplineOrder = {order}\n"
        )
        subprocess.run(
            [sys.executable, "-m", "bhm.cli", "run.param"],
            cwd=d, capture_output=True, check=True,
        )
        dirs.append(d)
    return dirs
