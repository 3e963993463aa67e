"""Reading, validating and writing sampled histograms.

The text format is line oriented.  The first significant line holds the
normalization constant ``A`` and the number of samples that fell outside the
histogram range.  Each following line describes one elementary bin by its
lower boundary and sample counter, optionally followed by the mean sample
weight and the scaled variance (the accumulated sum of squared deviations
from that mean).  The final line holds the upper boundary of the last bin.
Blank lines are ignored; two-column bin lines imply weight one for every
sample in the bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, TextIO, Union

import numpy as np

from .errors import (
    BinCountNotPowerOfTwo,
    EmptyInput,
    MalformedLine,
    NegativeCount,
    NegativeScaledVariance,
    NonMonotonicBoundaries,
)

__all__ = [
    "ElementaryBin",
    "Histogram",
    "parse_histogram",
    "normalize",
    "format_histogram",
]


@dataclass(frozen=True)
class ElementaryBin:
    """One finest-level histogram bin.

    Attributes
    ----------
    x_min : float
        Lower bin boundary.
    count : int
        Number of samples accumulated in the bin.
    mean : float
        Mean sample weight in the bin (zero for an empty bin).
    scaled_variance : float
        Sum of squared deviations of the weights from `mean` (zero for an
        empty bin).
    """

    x_min: float
    count: int
    mean: float
    scaled_variance: float


@dataclass(frozen=True)
class Histogram:
    """An immutable parsed histogram.

    The number of bins is always a power of two, ``2**power``, and the bin
    boundaries are strictly increasing.  ``total_samples`` counts everything
    that was drawn, including the ``excluded_count`` samples that fell outside
    ``[bins[0].x_min, x_max]``.
    """

    bins: tuple[ElementaryBin, ...]
    x_max: float
    normalization: float
    excluded_count: int

    def __post_init__(self):
        if self.excluded_count < 0:
            raise NegativeCount(
                f"excluded-sample count is negative ({self.excluded_count})"
            )

    @property
    def total_samples(self) -> int:
        return self.excluded_count + sum(b.count for b in self.bins)

    @property
    def power(self) -> int:
        """Exponent K with ``len(bins) == 2**K``."""
        return len(self.bins).bit_length() - 1

    @property
    def edges(self) -> np.ndarray:
        """All bin boundaries, length ``len(bins) + 1``."""
        return np.array([b.x_min for b in self.bins] + [self.x_max])


def _significant_lines(source: Union[str, TextIO]) -> list[tuple[int, str]]:
    if isinstance(source, str):
        raw: Iterable[str] = source.splitlines()
    else:
        raw = source
    out = []
    for lineno, line in enumerate(raw, start=1):
        if line.strip():
            out.append((lineno, line))
    return out


def _parse_float(token: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedLine(f"line {lineno}: {what} {token!r} is not a number") from None
    if not math.isfinite(value):
        raise MalformedLine(f"line {lineno}: {what} {token!r} is not finite")
    return value


def _parse_count(token: str, lineno: int, what: str) -> int:
    try:
        value = int(token, 10)
    except ValueError:
        as_float = _parse_float(token, lineno, what)
        if not as_float.is_integer():
            raise MalformedLine(f"line {lineno}: {what} {token!r} must be integral") from None
        value = int(as_float)
    if value < 0:
        raise NegativeCount(f"line {lineno}: {what} is negative ({value})")
    return value


def parse_histogram(source: Union[str, TextIO]) -> Histogram:
    """Parse a histogram from text or a readable stream.

    Raises
    ------
    MalformedLine, NegativeCount, NegativeScaledVariance
        On a line that cannot be interpreted.
    NonMonotonicBoundaries, BinCountNotPowerOfTwo
        On structurally invalid bin layouts.
    EmptyInput
        If the stream holds no significant lines, or no samples at all.
    """
    lines = _significant_lines(source)
    if not lines:
        raise EmptyInput("histogram input holds no data lines")
    if len(lines) < 2:
        raise MalformedLine("histogram input ends before the closing boundary line")

    lineno, header = lines[0]
    fields = header.split()
    if len(fields) != 2:
        raise MalformedLine(
            f"line {lineno}: expected 'normalization excluded_count', got {len(fields)} fields"
        )
    normalization = _parse_float(fields[0], lineno, "normalization")
    excluded = _parse_count(fields[1], lineno, "excluded-sample count")

    lineno, trailer = lines[-1]
    fields = trailer.split()
    if len(fields) != 1:
        raise MalformedLine(
            f"line {lineno}: the final line must hold exactly the upper boundary"
        )
    x_max = _parse_float(fields[0], lineno, "upper boundary")

    bins = []
    for lineno, line in lines[1:-1]:
        fields = line.split()
        if len(fields) not in (2, 4):
            raise MalformedLine(
                f"line {lineno}: bin lines need 2 or 4 fields, got {len(fields)}"
            )
        x_min = _parse_float(fields[0], lineno, "bin boundary")
        count = _parse_count(fields[1], lineno, "bin count")
        if len(fields) == 4:
            mean = _parse_float(fields[2], lineno, "bin mean")
            m2 = _parse_float(fields[3], lineno, "bin scaled variance")
            if m2 < 0:
                raise NegativeScaledVariance(
                    f"line {lineno}: scaled variance is negative ({m2!r})"
                )
        else:
            mean, m2 = 1.0, 0.0
        if count == 0:
            mean, m2 = 0.0, 0.0  # empty bins carry no statistics
        bins.append(ElementaryBin(x_min, count, mean, m2))

    nbins = len(bins)
    if nbins < 2 or nbins & (nbins - 1):
        raise BinCountNotPowerOfTwo(f"got {nbins} bins; need a power of two, at least 2")

    boundaries = [b.x_min for b in bins] + [x_max]
    for left, right in zip(boundaries, boundaries[1:]):
        if not left < right:
            raise NonMonotonicBoundaries(
                f"bin boundaries must increase strictly ({left!r} then {right!r})"
            )

    hist = Histogram(tuple(bins), x_max, normalization, excluded)
    if hist.total_samples == 0:
        raise EmptyInput("histogram holds zero samples")
    return hist


def normalize(hist: Histogram) -> Histogram:
    """Fold the stored normalization constant into the bin statistics.

    Means are divided by ``A`` and scaled variances by ``A**2``; the returned
    histogram carries normalization 1.  The values 0 and 1 both mean "no
    rescaling requested" and return the input unchanged.
    """
    a = hist.normalization
    if a == 0.0 or a == 1.0:
        return hist
    bins = tuple(
        ElementaryBin(b.x_min, b.count, b.mean / a, b.scaled_variance / (a * a))
        for b in hist.bins
    )
    return Histogram(bins, hist.x_max, 1.0, hist.excluded_count)


def format_histogram(hist: Histogram) -> str:
    """Serialize a histogram in the four-column text layout.

    Floats are written with :func:`repr`, which round-trips exactly.
    """
    lines = [f"{hist.normalization!r} {hist.excluded_count}"]
    for b in hist.bins:
        lines.append(f"{b.x_min!r} {b.count} {b.mean!r} {b.scaled_variance!r}")
    lines.append(f"{hist.x_max!r}")
    return "\n".join(lines) + "\n"
