"""Shared fixtures and small builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from bhm.generator import draw_samples, make_histogram, resolve_function
from bhm.hierarchy import BinHierarchy, _Level, build_hierarchy
from bhm.histogram import ElementaryBin, Histogram
from bhm.rng import Pcg32


def toy_histogram(counts, means=None, m2s=None, lo=0.0, hi=1.0,
                  excluded=0, normalization=1.0):
    """Histogram with uniform bins over [lo, hi] from per-bin statistics."""
    n = len(counts)
    if means is None:
        means = [1.0 if c else 0.0 for c in counts]
    if m2s is None:
        m2s = [0.0] * n
    edges = np.linspace(lo, hi, n + 1)
    bins = tuple(
        ElementaryBin(float(edges[i]), int(counts[i]), float(means[i]), float(m2s[i]))
        for i in range(n)
    )
    return Histogram(bins, float(edges[-1]), normalization, excluded)


def sampled_histogram(function, n_samples, power, seed, stream=0):
    """Generator pipeline in memory: draw samples and bin them uniformly."""
    tf = resolve_function(function)
    xs, signs = draw_samples(tf, n_samples, Pcg32(seed, stream))
    lo, hi = tf.histogram_range
    edges = np.linspace(lo, hi, (1 << power) + 1)
    return make_histogram(xs, signs, edges)


def single_level_hierarchy(edges, integrals, errors):
    """Hierarchy whose finest level carries given (I, dI) and nothing else.

    Only the finest level has usable bins, so a fit against it reduces to a
    plain weighted least-squares problem over those bins.
    """
    edges = np.asarray(edges, dtype=float)
    nbins = edges.size - 1
    power = nbins.bit_length() - 1
    assert nbins == 1 << power
    integrals = np.asarray(integrals, dtype=float)
    errors = np.asarray(errors, dtype=float)
    levels = []
    for n in range(power + 1):
        size = 1 << n
        if n == power:
            usable = errors > 0
            level = _Level(
                count=np.full(size, 10 ** 6, dtype=np.int64),
                mean=np.zeros(size), m2=np.zeros(size),
                integral=integrals.copy(), error=errors.copy(),
                usable=usable, populated=usable.copy(),
            )
        else:
            level = _Level(
                count=np.zeros(size, dtype=np.int64),
                mean=np.zeros(size), m2=np.zeros(size),
                integral=np.zeros(size), error=np.zeros(size),
                usable=np.zeros(size, dtype=bool),
                populated=np.zeros(size, dtype=bool),
            )
        levels.append(level)
    return BinHierarchy(power, edges, levels, power, 10 ** 7)


@pytest.fixture(scope="session")
def quartic_hist_small():
    """20k quartic samples on 64 bins; enough statistics for a stable fit."""
    return sampled_histogram("quartic_polynomial", 20_000, 6, seed=12345)


@pytest.fixture(scope="session")
def quartic_hier_small(quartic_hist_small):
    return build_hierarchy(quartic_hist_small)
