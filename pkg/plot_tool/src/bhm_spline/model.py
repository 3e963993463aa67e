"""The spline value object and the file parser.

This package deliberately reimplements the reading side of the spline file
format instead of depending on the fitter: the file is the interface.  A
file holds a header ``order piece-count``, one line with all piece
boundaries, and per piece a ``# spline piece i`` marker followed by the
polynomial coefficients and the squared-error-band coefficients.  All other
``#`` lines are comments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

import numpy as np
from numpy.polynomial import polynomial as npoly


class SplineFileError(Exception):
    """A spline file does not follow the expected layout."""


@dataclass(frozen=True)
class SplinePiece:
    """One polynomial piece: value and squared-error-band coefficients."""

    x_lo: float
    x_hi: float
    coeffs: tuple[float, ...]
    error_coeffs: tuple[float, ...]


class BhmSpline:
    """A piecewise polynomial with a pointwise error band.

    Pieces must tile an interval and all share one order ``m``; each piece
    carries ``m + 1`` value coefficients and ``2m + 1`` coefficients of the
    polynomial whose value is the squared error band.  Evaluation is
    vectorized; points on an interior boundary belong to the right piece
    and the upper domain edge to the last piece.
    """

    def __init__(self, pieces: Iterable[SplinePiece]):
        pieces = tuple(pieces)
        if not pieces:
            raise ValueError("a spline needs at least one piece")
        order = len(pieces[0].coeffs) - 1
        if order < 1:
            raise ValueError("the spline order must be at least 1")
        for i, piece in enumerate(pieces):
            if len(piece.coeffs) != order + 1:
                raise ValueError(
                    f"piece {i + 1} has {len(piece.coeffs)} coefficients, "
                    f"expected {order + 1}"
                )
            if len(piece.error_coeffs) != 2 * order + 1:
                raise ValueError(
                    f"piece {i + 1} has {len(piece.error_coeffs)} error "
                    f"coefficients, expected {2 * order + 1}"
                )
            if not piece.x_lo < piece.x_hi:
                raise ValueError(f"piece {i + 1} has an empty range")
            if i and pieces[i - 1].x_hi != piece.x_lo:
                raise ValueError(
                    f"piece {i + 1} does not start where piece {i} ends"
                )
        self._pieces = pieces
        self._order = order
        self._bounds = np.array(
            [p.x_lo for p in pieces] + [pieces[-1].x_hi], dtype=float
        )

    @property
    def pieces(self) -> tuple[SplinePiece, ...]:
        return self._pieces

    @property
    def order(self) -> int:
        return self._order

    def domain(self) -> tuple[float, float]:
        return float(self._bounds[0]), float(self._bounds[-1])

    def _locate(self, x) -> tuple[np.ndarray, np.ndarray, bool]:
        """In-domain points, their piece indices, and whether x was scalar."""
        scalar = np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.domain()
        inside = (xs >= lo) & (xs <= hi)
        if not np.all(inside):
            warnings.warn(
                f"{np.count_nonzero(~inside)} point(s) outside the spline "
                f"domain [{lo:g}, {hi:g}] were dropped",
                stacklevel=3,
            )
            xs = xs[inside]
        idx = np.searchsorted(self._bounds, xs, side="right") - 1
        idx = np.clip(idx, 0, len(self._pieces) - 1)
        return xs, idx, scalar

    def _piecewise(self, xs, idx, coeffs_of) -> np.ndarray:
        out = np.empty_like(xs)
        for i, piece in enumerate(self._pieces):
            sel = idx == i
            if np.any(sel):
                out[sel] = npoly.polyval(xs[sel], np.asarray(coeffs_of(piece)))
        return out

    def evaluate(self, x):
        """Spline value at ``x`` (scalar or array).

        Out-of-domain points are dropped with a warning; a scalar outside
        the domain evaluates to ``nan``.
        """
        xs, idx, scalar = self._locate(x)
        out = self._piecewise(xs, idx, lambda p: p.coeffs)
        if scalar:
            return float(out[0]) if out.size else math.nan
        return out

    __call__ = evaluate

    def errorbar(self, x):
        """Error-band half width at ``x``; same conventions as evaluate."""
        xs, idx, scalar = self._locate(x)
        e2 = self._piecewise(xs, idx, lambda p: p.error_coeffs)
        out = np.sqrt(np.maximum(e2, 0.0))
        if scalar:
            return float(out[0]) if out.size else math.nan
        return out

    def plot(self, reference: Optional[Callable] = None, **kwargs):
        from .plotting import plot

        return plot(self, reference, **kwargs)

    def plot_difference(self, reference: Callable, **kwargs):
        from .plotting import plot_difference

        return plot_difference(self, reference, **kwargs)


def _numbers(line: str, lineno: int, expected: int, what: str) -> list[float]:
    tokens = line.split()
    if len(tokens) != expected:
        raise SplineFileError(
            f"line {lineno}: expected {expected} {what}, found {len(tokens)}"
        )
    try:
        return [float(tok) for tok in tokens]
    except ValueError:
        raise SplineFileError(f"line {lineno}: {what} must be numbers") from None


def _content_lines(text: str):
    """(lineno, kind, line) with comments dropped and piece markers kept."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().lower().startswith("spline piece"):
                yield lineno, "marker", line
            continue
        yield lineno, "data", line


def parse(text: str) -> BhmSpline:
    """Parse the spline file format; errors carry the offending line."""
    stream = _content_lines(text)

    def next_data(what: str) -> tuple[int, str]:
        for lineno, kind, line in stream:
            if kind != "data":
                raise SplineFileError(f"line {lineno}: expected {what}, found {line!r}")
            return lineno, line
        raise SplineFileError(f"file ends where {what} was expected")

    lineno, line = next_data("the 'order piece-count' header")
    tokens = line.split()
    try:
        order, count = (int(t, 10) for t in tokens)
    except ValueError:
        raise SplineFileError(
            f"line {lineno}: header must be two integers 'order piece-count'"
        ) from None
    if order < 1 or count < 1:
        raise SplineFileError(
            f"line {lineno}: need order >= 1 and at least one piece"
        )

    lineno, line = next_data("the boundary line")
    boundaries = _numbers(line, lineno, count + 1, "boundaries")
    for a, b in zip(boundaries, boundaries[1:]):
        if not a < b:
            raise SplineFileError(
                f"line {lineno}: boundaries must increase strictly"
            )

    pieces = []
    for i in range(count):
        found_marker = False
        for lineno, kind, line in stream:
            if kind == "marker":
                found_marker = True
                break
            raise SplineFileError(
                f"line {lineno}: expected the '# spline piece {i + 1}' marker, "
                f"found {line!r}"
            )
        if not found_marker:
            raise SplineFileError(f"file ends before piece {i + 1}")
        lineno, line = next_data(f"coefficients of piece {i + 1}")
        coeffs = _numbers(line, lineno, order + 1, "coefficients")
        lineno, line = next_data(f"error coefficients of piece {i + 1}")
        err = _numbers(line, lineno, 2 * order + 1, "error coefficients")
        pieces.append(
            SplinePiece(boundaries[i], boundaries[i + 1], tuple(coeffs), tuple(err))
        )

    for lineno, kind, line in stream:
        raise SplineFileError(
            f"line {lineno}: unexpected content after the last piece"
        )
    try:
        return BhmSpline(pieces)
    except ValueError as exc:
        raise SplineFileError(str(exc)) from None


def load(path: Union[str, Path]) -> BhmSpline:
    """Read and parse a spline file."""
    return parse(Path(path).read_text())
