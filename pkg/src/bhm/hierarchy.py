"""Dyadic rebinning of a histogram into a hierarchy of levels.

Level ``K`` holds the elementary bins; each coarser level merges pairs, so
level ``n`` has ``2**n`` bins covering the full histogram range.  Merging uses
the numerically stable pooled update for (count, mean, scaled variance), the
same algebra as a pairwise Chan/Welford combine, so the statistics at every
level are exactly those that direct accumulation into the coarser bin would
have produced.

Each hierarchy bin carries an estimate ``I`` of the integral of the sampled
function over the bin and its standard error ``dI``.  A bin is *usable* for
fitting when its counter reaches ``data_points_min`` and ``dI > 0``.  Fine
levels whose populated-bin fraction drops below ``usable_bin_fraction`` are
truncated; the finest surviving level is ``finest_level``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoUsableLevels
from .histogram import Histogram

__all__ = [
    "BinStats",
    "HierarchyBin",
    "BinHierarchy",
    "merge_bins",
    "bin_estimates",
    "build_hierarchy",
    "zero_compatibility",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BinStats:
    """Accumulated sample statistics of one bin.

    `scaled_variance` is the sum of squared weight deviations from `mean`
    (often called M2); dividing by the count would give the plain variance.
    """

    count: int
    mean: float
    scaled_variance: float


@dataclass(frozen=True)
class HierarchyBin:
    """One bin of the hierarchy with its integral estimate.

    ``integral`` estimates the integral of the sampled function over
    ``[x_lo, x_hi]`` and ``error`` is its standard error.  ``usable`` marks
    bins that carry enough statistics to enter a fit.
    """

    level: int
    index: int
    x_lo: float
    x_hi: float
    count: int
    mean: float
    scaled_variance: float
    integral: float
    error: float
    usable: bool


def merge_bins(left: BinStats, right: BinStats) -> BinStats:
    """Pool the statistics of two disjoint bins.

    The combined (count, mean, scaled variance) are exactly what one pass
    over the union of the underlying samples would have accumulated.
    """
    n = left.count + right.count
    if n == 0:
        return BinStats(0, 0.0, 0.0)
    mean = (left.count * left.mean + right.count * right.mean) / n
    delta = left.mean - right.mean
    m2 = (
        left.scaled_variance
        + right.scaled_variance
        + delta * delta * left.count * right.count / n
    )
    return BinStats(n, mean, m2)


def bin_estimates(stats: BinStats, total_samples: int) -> tuple[float, float]:
    """Integral estimate and its standard error for one bin.

    Parameters
    ----------
    stats : BinStats
        Statistics of the bin.
    total_samples : int
        Total number of samples drawn, N, including those outside the
        histogram range.  Must be at least 2.

    Returns
    -------
    (I, dI) : tuple of float
        ``I = mean * count / N``.  The variance of I combines the in-bin
        weight scatter with the binomial scatter of the bin counter itself:
        ``M2(I) = M2 + mean**2 * count * (N - count) / N``, and
        ``dI = sqrt(M2(I) / (N - 1) / N)``.
    """
    n_i = stats.count
    n = total_samples
    integral = stats.mean * n_i / n
    m2_i = stats.scaled_variance + stats.mean * stats.mean * n_i * (n - n_i) / n
    variance = m2_i / (n - 1)
    return integral, math.sqrt(variance / n)


@dataclass
class _Level:
    """Internal array-of-columns storage for one hierarchy level."""

    count: np.ndarray  # int64, 2**n entries
    mean: np.ndarray
    m2: np.ndarray
    integral: np.ndarray
    error: np.ndarray
    usable: np.ndarray  # bool
    populated: np.ndarray  # bool, judged on counts alone


class BinHierarchy:
    """All rebinned levels of one histogram, plus retention bookkeeping.

    Treat instances as immutable; the fit engine only reads them.
    """

    def __init__(self, power: int, edges: np.ndarray, levels: list[_Level],
                 finest_level: int, total_samples: int):
        self.power = power
        self.edges = edges
        self.levels = levels
        self.finest_level = finest_level
        self.total_samples = total_samples

    @property
    def x_lo(self) -> float:
        return float(self.edges[0])

    @property
    def x_hi(self) -> float:
        return float(self.edges[-1])

    def retained_levels(self) -> range:
        """Levels that participate in fitting: 0 .. finest_level."""
        return range(self.finest_level + 1)

    def edge(self, level: int, index: int) -> float:
        """Boundary position `index` (0 .. 2**level) at a given level."""
        return float(self.edges[index << (self.power - level)])

    def usable_count(self, level: int) -> int:
        return int(np.count_nonzero(self.levels[level].usable))

    def bin(self, level: int, index: int) -> HierarchyBin:
        lv = self.levels[level]
        return HierarchyBin(
            level=level,
            index=index,
            x_lo=self.edge(level, index),
            x_hi=self.edge(level, index + 1),
            count=int(lv.count[index]),
            mean=float(lv.mean[index]),
            scaled_variance=float(lv.m2[index]),
            integral=float(lv.integral[index]),
            error=float(lv.error[index]),
            usable=bool(lv.usable[index]),
        )


def _merge_level(count, mean, m2):
    """Vectorised pooled merge of adjacent bin pairs."""
    nl, nr = count[0::2], count[1::2]
    ml, mr = mean[0::2], mean[1::2]
    n = nl + nr
    safe = np.where(n > 0, n, 1)
    merged_mean = np.where(n > 0, (nl * ml + nr * mr) / safe, 0.0)
    delta = ml - mr
    merged_m2 = m2[0::2] + m2[1::2] + delta * delta * (nl * nr) / safe
    return n, merged_mean, merged_m2


def build_hierarchy(hist: Histogram, data_points_min: int = 100,
                    usable_bin_fraction: float = 0.25) -> BinHierarchy:
    """Rebin a histogram into all dyadic levels and select the retained ones.

    Levels are scanned from the coarsest down; the first level whose fraction
    of populated bins (counter >= `data_points_min`) falls below
    `usable_bin_fraction` is dropped together with every finer level.

    Raises
    ------
    NoUsableLevels
        If even level 0 fails the populated-fraction test, if fewer than two
        samples were drawn in total, or if no usable bin survives at all.
    """
    n_total = hist.total_samples
    if n_total < 2:
        raise NoUsableLevels(f"need at least two samples, got {n_total}")

    power = hist.power
    count = np.array([b.count for b in hist.bins], dtype=np.int64)
    mean = np.array([b.mean for b in hist.bins])
    m2 = np.array([b.scaled_variance for b in hist.bins])

    stacked: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = [(count, mean, m2)]
    for _ in range(power):
        stacked.append(_merge_level(*stacked[-1]))
    stacked.reverse()  # index by level, coarsest first

    levels: list[_Level] = []
    for n, (cnt, mn, sv) in enumerate(stacked):
        integral = mn * cnt / n_total
        m2_i = sv + mn * mn * cnt * (n_total - cnt) / n_total
        error = np.sqrt(m2_i / (n_total - 1) / n_total)
        populated = cnt >= data_points_min
        usable = populated & (error > 0)
        degenerate = int(np.count_nonzero(populated & ~usable))
        if degenerate:
            log.warning(
                "level %d: %d bin(s) hold enough samples but zero error estimate; "
                "excluded from fitting", n, degenerate,
            )
        levels.append(_Level(cnt, mn, sv, integral, error, usable, populated))

    finest = power
    for n in range(power + 1):
        if np.count_nonzero(levels[n].populated) < usable_bin_fraction * (1 << n):
            if n == 0:
                raise NoUsableLevels(
                    "the whole-range bin does not reach the minimum sample count"
                )
            finest = n - 1
            break

    if not any(levels[n].usable.any() for n in range(finest + 1)):
        raise NoUsableLevels("no retained level carries a usable bin")

    return BinHierarchy(power, hist.edges, levels, finest, n_total)


def zero_compatibility(hier: BinHierarchy, threshold: float) -> bool:
    """Check whether the data are consistent with the zero function.

    For every retained level the statistic ``sum((I/dI)**2) / n_used`` over
    the usable bins is compared against the acceptance bound
    ``1 + threshold * sqrt(2 / n_used)``.  Levels without usable bins are
    skipped.  Returns True when every level passes.
    """
    for n in hier.retained_levels():
        lv = hier.levels[n]
        u = lv.usable
        n_used = int(np.count_nonzero(u))
        if n_used == 0:
            continue
        ratios = lv.integral[u] / lv.error[u]
        chi2 = float(np.dot(ratios, ratios))
        if chi2 / n_used > 1.0 + threshold * math.sqrt(2.0 / n_used):
            return False
    return True
