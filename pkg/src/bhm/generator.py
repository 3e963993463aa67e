"""Deterministic test-data generator.

Draws samples from the absolute value of a chosen analytic function by
rejection against a piecewise-constant envelope, weights every sample with
the sign of the function there, and accumulates the weighted samples into a
histogram in the package text format.  The whole pipeline is driven by a
single seed through the bundled PCG32 stream, so a configuration reproduces
its output files byte for byte.

The triple-Gaussian function additionally produces a second histogram on a
strongly non-uniform binning (geometrically growing widths away from the
center), always written to ``nonuniform_histogram.dat``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .config import read_key_values
from .errors import (
    ConfigError,
    InvalidConfig,
    InvalidValue,
    MalformedLine,
    UnknownFunction,
    UnknownKey,
)
from .histogram import ElementaryBin, Histogram, format_histogram
from .rng import Pcg32

__all__ = [
    "TestFunction",
    "FUNCTIONS",
    "GeneratorConfig",
    "resolve_function",
    "parse_generator_params",
    "draw_samples",
    "make_histogram",
    "nonuniform_edges",
    "function_grid",
    "run_generator",
    "main",
]

_QUARTIC_NORM = 0.171964
_EXP_ALPHA = 3.0 * math.exp(9.0) / (math.exp(6.0) - 1.0)


def _gauss(x, mu, sigma):
    z = (x - mu) / sigma
    return np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class TestFunction:
    """An analytic function the generator can sample.

    ``domain`` is where samples are drawn, ``histogram_range`` where they are
    histogrammed (samples outside only increment the excluded counter), and
    ``norm_domain`` the interval on which the absolute integral equals one.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    histogram_range: tuple[float, float]
    norm_domain: tuple[float, float]


FUNCTIONS: dict[str, TestFunction] = {
    tf.name: tf
    for tf in (
        TestFunction(
            "quartic_polynomial",
            lambda x: (x ** 4 - 0.8 * x ** 2) / _QUARTIC_NORM,
            (-1.0, 1.0),
            (-1.0, 1.0),
            (-1.0, 1.0),
        ),
        TestFunction(
            "exponential",
            lambda x: _EXP_ALPHA * np.exp(-3.0 * x),
            (1.0, 3.0),
            (1.0, 2.8),
            (1.0, 3.0),
        ),
        TestFunction(
            "triple_gaussian",
            lambda x: 0.2 * _gauss(x, 0.0, 0.2)
            + 0.4 * (_gauss(x, 2.0, 1.0) + _gauss(x, -2.0, 1.0)),
            (-5.0, 5.0),
            (-5.0, 5.0),
            (-math.inf, math.inf),
        ),
    )
}


def resolve_function(name: str) -> TestFunction:
    """Look up a function by name or unambiguous prefix (case-insensitive)."""
    key = name.strip().lower()
    if key in FUNCTIONS:
        return FUNCTIONS[key]
    matches = [tf for n, tf in FUNCTIONS.items() if n.startswith(key)] if key else []
    if len(matches) == 1:
        return matches[0]
    known = ", ".join(sorted(FUNCTIONS))
    if len(matches) > 1:
        raise UnknownFunction(f"{name!r} is ambiguous; known functions: {known}")
    raise UnknownFunction(f"unknown function {name!r}; known functions: {known}")


@dataclass(frozen=True)
class GeneratorConfig:
    """Validated generator settings; see the module help text for the keys."""

    function: str = "quartic_polynomial"
    sample_size: int = 1_000_000
    power_bins: int = 14
    seed: int = 12345
    histogram_output: str = "histogram.dat"
    grid_output: str = ""
    grid_points: int = 512

    def __post_init__(self):
        if self.sample_size < 1:
            raise InvalidConfig(f"SampleSize must be positive, got {self.sample_size}")
        if not 1 <= self.power_bins <= 20:
            raise InvalidConfig(f"PowerBins must lie in 1..20, got {self.power_bins}")
        if self.seed < 0:
            raise InvalidConfig(f"Seed must not be negative, got {self.seed}")
        if self.grid_points < 2:
            raise InvalidConfig(f"GridPoints must be at least 2, got {self.grid_points}")


_GENERATOR_SCHEMA = {
    "function": ("function", str),
    "samplesize": ("sample_size", int),
    "powerbins": ("power_bins", int),
    "seed": ("seed", int),
    "histogramoutput": ("histogram_output", str),
    "gridoutput": ("grid_output", str),
    "gridpoints": ("grid_points", int),
}


def parse_generator_params(text: str) -> GeneratorConfig:
    kwargs = {}
    for key, value in read_key_values(text).items():
        try:
            attr, kind = _GENERATOR_SCHEMA[key]
        except KeyError:
            raise UnknownKey(f"unknown generator parameter {key!r}") from None
        if kind is int:
            try:
                kwargs[attr] = int(value, 10)
            except ValueError:
                raise InvalidValue(f"{key} needs an integer, got {value!r}") from None
        else:
            kwargs[attr] = value
    return GeneratorConfig(**kwargs)


# --- sampling ----------------------------------------------------------------

_ENVELOPE_CELLS = 1024
_ENVELOPE_PROBES = 65
_ENVELOPE_CACHE: dict[str, tuple[np.ndarray, np.ndarray, float]] = {}


def _envelope(tf: TestFunction) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-cell envelope heights, their cumulative mass, and the total mass."""
    if tf.name not in _ENVELOPE_CACHE:
        lo, hi = tf.domain
        step = _ENVELOPE_PROBES - 1
        xs = np.linspace(lo, hi, _ENVELOPE_CELLS * step + 1)
        vals = np.abs(tf.fn(xs))
        heights = np.maximum(
            vals[:-1].reshape(_ENVELOPE_CELLS, step).max(axis=1),
            vals[step::step],
        ) * 1.001  # margin for in-cell maxima the probe grid missed
        width = (hi - lo) / _ENVELOPE_CELLS
        masses = heights * width
        total = float(masses.sum())
        cum = np.cumsum(masses) / masses.sum()
        _ENVELOPE_CACHE[tf.name] = (heights, cum, total)
    return _ENVELOPE_CACHE[tf.name]


def draw_samples(tf: TestFunction, count: int, rng: Pcg32) -> tuple[np.ndarray, np.ndarray]:
    """Draw `count` positions with sign weights by rejection sampling.

    Returns (positions, signs); the sign of the function at each accepted
    position is the sample weight.  Exactly reproducible for a given stream.
    """
    heights, cum, total_mass = _envelope(tf)
    lo, hi = tf.domain
    cell_width = (hi - lo) / heights.size
    chunks = []
    need = count
    while need > 0:
        batch = min(max(int(need * total_mass * 1.25) + 16, 1024), 1 << 17)
        u = rng.random(3 * batch)
        cells = np.searchsorted(cum, u[0::3], side="right")
        x = lo + (cells + u[1::3]) * cell_width
        keep = u[2::3] * heights[cells] <= np.abs(tf.fn(x))
        accepted = x[keep]
        chunks.append(accepted)
        need -= accepted.size
    xs = np.concatenate(chunks)[:count]
    return xs, np.sign(tf.fn(xs))


def make_histogram(xs: np.ndarray, signs: np.ndarray, edges: np.ndarray,
                   normalization: float = 1.0) -> Histogram:
    """Accumulate weighted samples into elementary bins over given edges.

    With weights restricted to -1, 0 and +1 the per-bin counters are exact
    integers, so mean and scaled variance follow in closed form and equal
    what a sequential accumulator would produce.
    """
    nbins = edges.size - 1
    inside = (xs >= edges[0]) & (xs <= edges[-1])
    idx = np.searchsorted(edges, xs[inside], side="right") - 1
    idx = np.clip(idx, 0, nbins - 1)  # the top boundary belongs to the last bin
    sp = signs[inside]
    n_plus = np.bincount(idx[sp > 0], minlength=nbins).astype(np.int64)
    n_minus = np.bincount(idx[sp < 0], minlength=nbins).astype(np.int64)
    n_zero = np.bincount(idx[sp == 0], minlength=nbins).astype(np.int64)
    count = n_plus + n_minus + n_zero
    safe = np.where(count > 0, count, 1)
    mean = np.where(count > 0, (n_plus - n_minus) / safe, 0.0)
    m2 = (
        n_plus * (1.0 - mean) ** 2
        + n_minus * (1.0 + mean) ** 2
        + n_zero * mean ** 2
    )
    m2 = np.where(count > 0, m2, 0.0)
    bins = tuple(
        ElementaryBin(float(edges[i]), int(count[i]), float(mean[i]), float(m2[i]))
        for i in range(nbins)
    )
    excluded = int(xs.size - np.count_nonzero(inside))
    return Histogram(bins, float(edges[-1]), normalization, excluded)


def nonuniform_edges(lo: float = -5.0, hi: float = 5.0, half_bins: int = 128,
                     min_width_scale: float = 4096.0) -> np.ndarray:
    """Center-anchored edges with geometrically growing bin widths.

    The narrowest bins sit at the center with width ``(hi - lo) /
    min_width_scale``; widths grow by a constant ratio chosen so that
    ``half_bins`` bins exactly fill each half of the range.
    """
    half_range = (hi - lo) / 2.0
    w_min = (hi - lo) / min_width_scale

    def gap(ratio: float) -> float:
        return w_min * (ratio ** half_bins - 1.0) / (ratio - 1.0) - half_range

    ratio = brentq(gap, 1.0 + 1e-9, 2.0)
    widths = w_min * ratio ** np.arange(half_bins)
    rights = np.cumsum(widths)
    rights[-1] = half_range  # close the half exactly
    center = (lo + hi) / 2.0
    return np.concatenate([center - rights[::-1], [center], center + rights])


def function_grid(tf: TestFunction, npoints: int) -> str:
    """Tabulated exact function values over the histogram range."""
    lo, hi = tf.histogram_range
    lines = []
    for x in np.linspace(lo, hi, npoints):
        x = float(x)
        lines.append(f"{x!r} {float(tf.fn(np.float64(x)))!r}")
    return "\n".join(lines) + "\n"


def run_generator(config: GeneratorConfig, dest_dir: Optional[Path] = None) -> list[Path]:
    """Draw, histogram and write everything the configuration asks for."""
    base = Path(dest_dir) if dest_dir is not None else Path.cwd()
    tf = resolve_function(config.function)
    rng = Pcg32(config.seed)
    xs, signs = draw_samples(tf, config.sample_size, rng)

    written = []
    lo, hi = tf.histogram_range
    edges = np.linspace(lo, hi, (1 << config.power_bins) + 1)
    path = base / config.histogram_output
    path.write_text(format_histogram(make_histogram(xs, signs, edges)))
    written.append(path)

    if tf.name == "triple_gaussian":
        path = base / "nonuniform_histogram.dat"
        path.write_text(format_histogram(make_histogram(xs, signs, nonuniform_edges(lo, hi))))
        written.append(path)

    if config.grid_output:
        path = base / config.grid_output
        path.write_text(function_grid(tf, config.grid_points))
        written.append(path)
    return written


_HELP = """\
usage: generator [PARAMETER_FILE]
       generator --list

Draws weighted samples from an analytic test function and writes them as a
histogram ready for spline fitting.  An empty parameter-file name ("") runs
with the defaults.  Parameter-file keys (case-insensitive):

  Function         = {functions}
                     (unambiguous prefixes work; default quartic_polynomial)
  SampleSize       = number of samples to draw       (default 1000000)
  PowerBins        = histogram holds 2^PowerBins bins (default 14)
  Seed             = random stream seed              (default 12345)
  HistogramOutput  = histogram file name             (default histogram.dat)
  GridOutput       = exact-function grid file name   (default none)
  GridPoints       = points in that grid             (default 512)

The triple_gaussian function also writes nonuniform_histogram.dat with
geometrically growing bin widths.  --list prints the function names.
"""


def main(argv: Optional[list[str]] = None) -> int:
    args = sys.argv[1:] if argv is None else list(argv)
    if len(args) == 1 and args[0] == "--list":
        for name in sorted(FUNCTIONS):
            print(name)
        return 0
    if len(args) != 1:
        print(_HELP.format(functions=" | ".join(sorted(FUNCTIONS))))
        return 1
    try:
        if args[0]:
            text = Path(args[0]).read_text()
        else:
            text = ""
        config = parse_generator_params(text)
        written = run_generator(config)
    except OSError as exc:
        print(f"generator: {exc}", file=sys.stderr)
        return 6
    except (ConfigError, InvalidConfig, MalformedLine, UnknownFunction) as exc:
        print(f"generator: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(f"generator: wrote {path}", file=sys.stderr)
    return 0


def run_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run_main()
