"""Exception types raised by the bhm package.

Every error deliberately raised by this package derives from :class:`BhmError`,
so callers can catch one base class at the boundary (the command line driver
does exactly that).  The subclasses are grouped by pipeline stage below.
"""

from __future__ import annotations


class BhmError(Exception):
    """Base class for all errors raised by bhm."""


# --- input parsing (histograms, parameter files, generic line formats) ---

class MalformedLine(BhmError):
    """A line of an input file does not match the expected layout."""


class NonMonotonicBoundaries(BhmError):
    """Histogram bin boundaries are not strictly increasing."""


class BinCountNotPowerOfTwo(BhmError):
    """The number of elementary bins is not a power of two (>= 2)."""


class NegativeCount(BhmError):
    """A sample counter in the input is negative."""


class NegativeScaledVariance(BhmError):
    """A scaled variance (sum of squared deviations) in the input is negative."""


class EmptyInput(BhmError):
    """The histogram contains no samples at all."""


# --- bin hierarchy ---

class NoUsableLevels(BhmError):
    """Not even the coarsest hierarchy level carries usable statistics."""


# --- spline representation ---

class OutOfDomain(BhmError):
    """A requested point or range lies outside the spline domain."""


class NegativeErrorSquare(BhmError):
    """The error-band polynomial evaluates to a negative square."""


class MalformedSplineFile(BhmError):
    """A spline file violates the expected layout."""


# --- fitting ---

class SingularSystem(BhmError):
    """The constrained least-squares system is rank deficient."""


class IntervalUnderdetermined(BhmError):
    """An interval does not contain enough usable bins to support a fit."""


class IntervalTooSmall(BhmError):
    """An interval at maximal refinement depth cannot be split further."""


class NoAcceptableFit(BhmError):
    """Every configured threshold was exhausted without an acceptable spline."""


class ZeroCompatible(BhmError):
    """The histogram data are statistically compatible with zero everywhere."""


# --- configuration ---

class ConfigError(BhmError):
    """Base class for parameter-file problems."""


class UnknownKey(ConfigError):
    """A parameter file names a key this program does not define."""


class InvalidValue(ConfigError):
    """A parameter value cannot be converted or violates its constraints."""


# --- sample generator ---

class UnknownFunction(BhmError):
    """The requested test function name matches nothing (or is ambiguous)."""


class InvalidConfig(BhmError):
    """A generator configuration value violates its constraints."""
