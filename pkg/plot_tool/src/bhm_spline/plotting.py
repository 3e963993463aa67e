"""Figure helpers: spline with its band, optional reference, difference."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .model import BhmSpline


def _reference_values(fn: Callable, xs: np.ndarray) -> np.ndarray:
    """Evaluate a reference callable, vectorized or pointwise."""
    try:
        vals = np.asarray(fn(xs), dtype=float)
        if vals.shape == xs.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(x))) for x in xs])


def _grid(spline: BhmSpline, npoints: int) -> np.ndarray:
    if npoints < 2:
        raise ValueError("need at least two grid points")
    lo, hi = spline.domain()
    return np.linspace(lo, hi, npoints)


def plot(spline: BhmSpline, reference: Optional[Callable] = None, *,
         npoints: int = 512, ax=None):
    """Draw the spline with its error band; overlay a reference if given."""
    import matplotlib.pyplot as plt

    if ax is None:
        _, ax = plt.subplots()
    xs = _grid(spline, npoints)
    ys = spline.evaluate(xs)
    band = spline.errorbar(xs)
    ax.fill_between(xs, ys - band, ys + band, alpha=0.3, label="error band")
    ax.plot(xs, ys, label="spline")
    if reference is not None:
        ax.plot(xs, _reference_values(reference, xs), "--", label="reference")
    ax.set_xlabel("x")
    ax.legend()
    return ax


def plot_difference(spline: BhmSpline, reference: Callable, *,
                    npoints: int = 512, ax=None):
    """Draw spline minus reference with the error band around zero."""
    import matplotlib.pyplot as plt

    if ax is None:
        _, ax = plt.subplots()
    xs = _grid(spline, npoints)
    diff = spline.evaluate(xs) - _reference_values(reference, xs)
    band = spline.errorbar(xs)
    ax.fill_between(xs, -band, band, alpha=0.3, label="error band")
    ax.plot(xs, diff, label="spline - reference")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("x")
    ax.legend()
    return ax
