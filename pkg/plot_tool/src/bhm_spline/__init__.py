"""Load, evaluate and plot spline files written by the bhm fitter."""

from .model import BhmSpline, SplineFileError, SplinePiece, load, parse
from .plotting import plot, plot_difference

__all__ = [
    "BhmSpline",
    "SplineFileError",
    "SplinePiece",
    "load",
    "parse",
    "plot",
    "plot_difference",
]
