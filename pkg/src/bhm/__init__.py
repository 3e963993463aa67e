"""bhm - restore a smooth function with an error band from a sampled histogram.

The package turns a histogram of (possibly weighted) samples into a piecewise
polynomial with continuous derivatives and a pointwise error estimate.  The
histogram is rebinned into a hierarchy of dyadic levels; a spline is accepted
only if it is statistically compatible with every level at once, which removes
the usual bias-versus-noise tuning of plain histogram fits.

Typical use::

    from bhm import parse_histogram, normalize, build_hierarchy, bhm_fit, FitParams

    hist = parse_histogram(open("histogram.dat"))
    hier = build_hierarchy(normalize(hist))
    spline, diag, log = bhm_fit(hier, FitParams())

Command line entry points ``bhm`` and ``generator`` wrap the same machinery.
"""

from .errors import (
    BhmError,
    BinCountNotPowerOfTwo,
    ConfigError,
    EmptyInput,
    IntervalTooSmall,
    IntervalUnderdetermined,
    InvalidConfig,
    InvalidValue,
    MalformedLine,
    MalformedSplineFile,
    NegativeCount,
    NegativeErrorSquare,
    NegativeScaledVariance,
    NoAcceptableFit,
    NonMonotonicBoundaries,
    NoUsableLevels,
    OutOfDomain,
    SingularSystem,
    UnknownFunction,
    UnknownKey,
    ZeroCompatible,
)
from .histogram import ElementaryBin, Histogram, format_histogram, normalize, parse_histogram
from .hierarchy import (
    BinHierarchy,
    BinStats,
    HierarchyBin,
    bin_estimates,
    build_hierarchy,
    merge_bins,
    zero_compatibility,
)
from .spline import BhmSpline, SplinePiece, deserialize, grid_output, serialize
from .fitting import (
    FitDiagnostics,
    FitParams,
    Interval,
    LevelRecord,
    acceptance_bound,
    bhm_fit,
    check_interval,
    check_levels,
    fit_on_division,
    jump_suppression_refit,
    split_interval,
)
from .config import RunConfig, format_params, parse_params

__all__ = [
    "BhmError",
    "BinCountNotPowerOfTwo",
    "ConfigError",
    "EmptyInput",
    "IntervalTooSmall",
    "IntervalUnderdetermined",
    "InvalidConfig",
    "InvalidValue",
    "MalformedLine",
    "MalformedSplineFile",
    "NegativeCount",
    "NegativeErrorSquare",
    "NegativeScaledVariance",
    "NoAcceptableFit",
    "NonMonotonicBoundaries",
    "NoUsableLevels",
    "OutOfDomain",
    "SingularSystem",
    "UnknownFunction",
    "UnknownKey",
    "ZeroCompatible",
    "ElementaryBin",
    "Histogram",
    "format_histogram",
    "normalize",
    "parse_histogram",
    "BinHierarchy",
    "BinStats",
    "HierarchyBin",
    "bin_estimates",
    "build_hierarchy",
    "merge_bins",
    "zero_compatibility",
    "BhmSpline",
    "SplinePiece",
    "deserialize",
    "grid_output",
    "serialize",
    "FitDiagnostics",
    "FitParams",
    "Interval",
    "LevelRecord",
    "acceptance_bound",
    "bhm_fit",
    "check_interval",
    "check_levels",
    "fit_on_division",
    "jump_suppression_refit",
    "split_interval",
    "RunConfig",
    "format_params",
    "parse_params",
]

__version__ = "0.1.0"
