"""Piecewise polynomial splines with a pointwise error band.

A spline of order ``m`` is a sequence of pieces tiling ``[x_1, x_{s+1}]``.
Each piece stores the ``m + 1`` monomial coefficients of the value polynomial
and the ``2m + 1`` coefficients of the squared-error polynomial ``E(x)**2``,
both in absolute (untranslated) powers of x.  Adjacent pieces agree in value
and in all derivatives up to order ``m - 1`` at the shared boundary.

The text layout written by :func:`serialize` starts with optional ``#``
comment lines, then a line ``m s``, then the ``s + 1`` piece boundaries, then
for every piece a ``# spline piece i`` marker followed by the coefficient
line and the squared-error coefficient line.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, TextIO, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import MalformedSplineFile, NegativeErrorSquare, OutOfDomain

__all__ = ["SplinePiece", "BhmSpline", "serialize", "deserialize", "grid_output"]

_CONTINUITY_RTOL = 1e-8
_NEGATIVE_SQUARE_RTOL = 1e-12


@dataclass(frozen=True)
class SplinePiece:
    """One polynomial piece on ``[x_lo, x_hi]``.

    ``coeffs`` are the monomial coefficients ``a_0 .. a_m`` of the value and
    ``error_coeffs`` the coefficients ``e_0 .. e_2m`` of the squared error
    band; both polynomials are evaluated in plain powers of x.
    """

    x_lo: float
    x_hi: float
    coeffs: tuple[float, ...]
    error_coeffs: tuple[float, ...]


class BhmSpline:
    """An immutable piecewise polynomial with an error band.

    Raises
    ------
    ValueError
        If the pieces do not tile an interval, disagree in order, or break
        continuity of the value or of any derivative below the order.
    """

    def __init__(self, pieces: Iterable[SplinePiece]):
        pieces = tuple(pieces)
        if not pieces:
            raise ValueError("a spline needs at least one piece")
        m = len(pieces[0].coeffs) - 1
        if m < 1:
            raise ValueError("spline order must be at least 1")
        for p in pieces:
            if len(p.coeffs) != m + 1:
                raise ValueError("all pieces must share one polynomial order")
            if len(p.error_coeffs) != 2 * m + 1:
                raise ValueError(
                    f"expected {2 * m + 1} squared-error coefficients, got {len(p.error_coeffs)}"
                )
            if not p.x_lo < p.x_hi:
                raise ValueError(f"piece range [{p.x_lo!r}, {p.x_hi!r}] is empty")
        for left, right in zip(pieces, pieces[1:]):
            if left.x_hi != right.x_lo:
                raise ValueError(
                    f"pieces do not tile: {left.x_hi!r} followed by {right.x_lo!r}"
                )
        self._pieces = pieces
        self._order = m
        self._boundaries = [p.x_lo for p in pieces] + [pieces[-1].x_hi]
        self._check_continuity()

    def _check_continuity(self) -> None:
        for i, (left, right) in enumerate(zip(self._pieces, self._pieces[1:])):
            x = right.x_lo
            lc = np.asarray(left.coeffs)
            rc = np.asarray(right.coeffs)
            for d in range(self._order):
                ld = npoly.polyder(lc, d) if d else lc
                rd = npoly.polyder(rc, d) if d else rc
                lval = float(npoly.polyval(x, ld))
                rval = float(npoly.polyval(x, rd))
                # Monomial coefficients of narrow pieces are large and
                # cancel heavily, both at evaluation and when they were
                # assembled; the achievable agreement is therefore set by
                # the coefficient magnitudes over each piece's range, not
                # by the boundary values themselves.
                l_big = max(abs(left.x_lo), abs(left.x_hi))
                r_big = max(abs(right.x_lo), abs(right.x_hi))
                scale = max(
                    1.0,
                    float(npoly.polyval(l_big, np.abs(ld))),
                    float(npoly.polyval(r_big, np.abs(rd))),
                )
                if abs(lval - rval) > _CONTINUITY_RTOL * scale:
                    raise ValueError(
                        f"derivative {d} jumps at boundary {i + 1} "
                        f"(x={x!r}): {lval!r} vs {rval!r}"
                    )

    @property
    def pieces(self) -> tuple[SplinePiece, ...]:
        return self._pieces

    @property
    def order(self) -> int:
        return self._order

    @property
    def boundaries(self) -> list[float]:
        """Piece boundaries, length ``len(pieces) + 1``."""
        return list(self._boundaries)

    def domain(self) -> tuple[float, float]:
        return self._boundaries[0], self._boundaries[-1]

    def _piece_at(self, x: float) -> SplinePiece:
        lo, hi = self._boundaries[0], self._boundaries[-1]
        if not lo <= x <= hi:
            raise OutOfDomain(f"x={x!r} outside [{lo!r}, {hi!r}]")
        # interior boundaries belong to the right piece, the top one to the last
        idx = min(bisect_right(self._boundaries, x) - 1, len(self._pieces) - 1)
        return self._pieces[idx]

    def evaluate(self, x: float) -> float:
        """Value of the spline at a point inside the domain."""
        return float(npoly.polyval(x, self._piece_at(x).coeffs))

    __call__ = evaluate

    def error_at(self, x: float) -> float:
        """Pointwise error band E(x) >= 0.

        Raises NegativeErrorSquare if the squared-error polynomial is
        negative beyond rounding noise at x.
        """
        piece = self._piece_at(x)
        e2 = float(npoly.polyval(x, piece.error_coeffs))
        if e2 < 0.0:
            # Summing the monomial terms cancels heavily on narrow pieces far
            # from the origin, so rounding noise scales with the magnitude of
            # the individual terms rather than with the result.
            scale = max(
                1.0,
                float(npoly.polyval(abs(x), np.abs(piece.error_coeffs))),
            )
            if e2 < -_NEGATIVE_SQUARE_RTOL * scale:
                raise NegativeErrorSquare(f"squared error {e2!r} at x={x!r}")
            return 0.0
        return math.sqrt(e2)

    def piece_integral(self, a: float, b: float) -> float:
        """Exact integral of the spline over ``[a, b]`` inside the domain."""
        lo, hi = self._boundaries[0], self._boundaries[-1]
        if not (lo <= a <= b <= hi):
            raise OutOfDomain(
                f"integration range [{a!r}, {b!r}] not inside [{lo!r}, {hi!r}]"
            )
        total = 0.0
        for p in self._pieces:
            u = max(a, p.x_lo)
            v = min(b, p.x_hi)
            if v <= u:
                continue
            for k, c in enumerate(p.coeffs):
                total += c * (v ** (k + 1) - u ** (k + 1)) / (k + 1)
        return total

    def validate_error_band(self, points_per_piece: int = 65) -> None:
        """Probe the squared-error polynomials on a dense grid.

        Raises NegativeErrorSquare if any piece dips below zero by more than
        rounding noise somewhere on its range.
        """
        for p in self._pieces:
            xs = np.linspace(p.x_lo, p.x_hi, points_per_piece)
            e2 = npoly.polyval(xs, p.error_coeffs)
            floor = float(np.min(e2))
            if floor < 0.0:
                # Tolerance follows the size of the summed monomial terms,
                # which is what limits the achievable cancellation accuracy.
                x_big = max(abs(p.x_lo), abs(p.x_hi))
                scale = max(
                    1.0, float(npoly.polyval(x_big, np.abs(p.error_coeffs)))
                )
                if floor < -_NEGATIVE_SQUARE_RTOL * scale:
                    raise NegativeErrorSquare(
                        f"squared error reaches {floor!r} on [{p.x_lo!r}, {p.x_hi!r}]"
                    )


def serialize(spline: BhmSpline, comments: str = "") -> str:
    """Render a spline in the text layout; `comments` become leading # lines."""
    lines = []
    if comments:
        for raw in comments.splitlines():
            lines.append(f"# {raw}".rstrip())
    pieces = spline.pieces
    lines.append(f"{spline.order} {len(pieces)}")
    lines.append(" ".join(repr(b) for b in spline.boundaries))
    for i, p in enumerate(pieces, start=1):
        lines.append(f"# spline piece {i}")
        lines.append(" ".join(repr(c) for c in p.coeffs))
        lines.append(" ".join(repr(c) for c in p.error_coeffs))
    return "\n".join(lines) + "\n"


def _floats(tokens: list[str], lineno: int, expected: int, what: str) -> list[float]:
    if len(tokens) != expected:
        raise MalformedSplineFile(
            f"line {lineno}: expected {expected} {what}, got {len(tokens)}"
        )
    out = []
    for tok in tokens:
        try:
            out.append(float(tok))
        except ValueError:
            raise MalformedSplineFile(f"line {lineno}: {tok!r} is not a number") from None
    return out


def deserialize(source: Union[str, TextIO]) -> BhmSpline:
    """Parse a spline file; raises MalformedSplineFile with a line number."""
    if not isinstance(source, str):
        source = source.read()
    numbered = [
        (i, line.strip()) for i, line in enumerate(source.splitlines(), start=1)
        if line.strip()
    ]
    pos = 0
    while pos < len(numbered) and numbered[pos][1].startswith("#"):
        pos += 1
    if pos >= len(numbered):
        raise MalformedSplineFile("no header line found")

    lineno, header = numbered[pos]
    tokens = header.split()
    if len(tokens) != 2:
        raise MalformedSplineFile(f"line {lineno}: header must be 'order piece-count'")
    try:
        order, count = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise MalformedSplineFile(f"line {lineno}: header must hold two integers") from None
    if order < 1 or count < 1:
        raise MalformedSplineFile(f"line {lineno}: need order >= 1 and at least one piece")
    pos += 1

    if pos >= len(numbered):
        raise MalformedSplineFile(f"line {lineno}: boundary line missing")
    lineno, boundary_line = numbered[pos]
    boundaries = _floats(boundary_line.split(), lineno, count + 1, "boundaries")
    pos += 1

    pieces = []
    for i in range(count):
        if pos < len(numbered) and numbered[pos][1].startswith("#"):
            pos += 1
        else:
            at = numbered[pos][0] if pos < len(numbered) else "end of file"
            raise MalformedSplineFile(f"line {at}: missing '# spline piece {i + 1}' marker")
        if pos + 1 >= len(numbered):
            raise MalformedSplineFile(f"piece {i + 1}: coefficient lines missing")
        lineno, coeff_line = numbered[pos]
        coeffs = _floats(coeff_line.split(), lineno, order + 1, "coefficients")
        lineno, err_line = numbered[pos + 1]
        err = _floats(err_line.split(), lineno, 2 * order + 1, "error coefficients")
        pieces.append(
            SplinePiece(boundaries[i], boundaries[i + 1], tuple(coeffs), tuple(err))
        )
        pos += 2

    if pos != len(numbered):
        raise MalformedSplineFile(
            f"line {numbered[pos][0]}: unexpected content after the last piece"
        )
    try:
        return BhmSpline(pieces)
    except ValueError as exc:
        raise MalformedSplineFile(str(exc)) from None


def grid_output(spline: BhmSpline, npoints: int) -> str:
    """Tabulate the spline as 'x value error' lines on a uniform grid."""
    if npoints < 2:
        raise ValueError("need at least two grid points")
    lo, hi = spline.domain()
    lines = []
    for x in np.linspace(lo, hi, npoints):
        x = float(x)
        lines.append(f"{x!r} {spline.evaluate(x)!r} {spline.error_at(x)!r}")
    return "\n".join(lines) + "\n"
