"""Tests for the sample generator: functions, sampling and output files."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from bhm.errors import InvalidConfig, InvalidValue, UnknownFunction, UnknownKey
from bhm.generator import (
    FUNCTIONS,
    GeneratorConfig,
    draw_samples,
    function_grid,
    main,
    make_histogram,
    nonuniform_edges,
    parse_generator_params,
    resolve_function,
    run_generator,
    _envelope,
)
from bhm.hierarchy import build_hierarchy
from bhm.histogram import parse_histogram
from bhm.rng import Pcg32

from conftest import sampled_histogram

QUARTIC_MEAN = (-2.0 / 15.0) / 0.171964  # signed integral of the quartic


class TestResolveFunction:
    @pytest.mark.parametrize("name", sorted(FUNCTIONS))
    def test_exact_names(self, name):
        assert resolve_function(name).name == name

    @pytest.mark.parametrize("alias, name", [
        ("quart", "quartic_polynomial"),
        ("e", "exponential"),
        ("TRIPLE_GAUSS", "triple_gaussian"),
        ("  Exponential ", "exponential"),
    ])
    def test_prefixes_and_case(self, alias, name):
        assert resolve_function(alias).name == name

    @pytest.mark.parametrize("bad", ["gaussian", "quintic", ""])
    def test_unknown_names(self, bad):
        with pytest.raises(UnknownFunction, match="known functions"):
            resolve_function(bad)


class TestFunctionShapes:
    def test_absolute_integrals_are_one(self):
        for tf in FUNCTIONS.values():
            lo, hi = tf.norm_domain
            if not math.isfinite(lo):
                lo, hi = -30.0, 30.0  # Gaussian tails beyond this are ~0
            total, _ = quad(lambda x: abs(float(tf.fn(np.float64(x)))), lo, hi,
                            limit=200)
            # the quartic normalisation constant is itself rounded
            assert math.isclose(total, 1.0, rel_tol=1e-5)

    def test_quartic_signed_integral(self):
        tf = FUNCTIONS["quartic_polynomial"]
        total, _ = quad(lambda x: float(tf.fn(np.float64(x))), -1.0, 1.0)
        assert math.isclose(total, QUARTIC_MEAN, rel_tol=1e-10)

    def test_envelope_majorises_the_function(self):
        for tf in FUNCTIONS.values():
            heights, cum, _ = _envelope(tf)
            lo, hi = tf.domain
            cell_width = (hi - lo) / heights.size
            rng = np.random.default_rng(11)
            x = rng.uniform(lo, hi, 20_000)
            cells = np.minimum(((x - lo) / cell_width).astype(int),
                               heights.size - 1)
            assert np.all(np.abs(tf.fn(x)) <= heights[cells])
            assert cum[-1] == pytest.approx(1.0)


class TestDrawSamples:
    def test_reproducible_and_stream_dependent(self):
        tf = FUNCTIONS["quartic_polynomial"]
        xs1, s1 = draw_samples(tf, 5000, Pcg32(7))
        xs2, s2 = draw_samples(tf, 5000, Pcg32(7))
        xs3, _ = draw_samples(tf, 5000, Pcg32(7, stream=1))
        assert np.array_equal(xs1, xs2) and np.array_equal(s1, s2)
        assert not np.array_equal(xs1, xs3)

    def test_samples_live_in_the_domain_with_matching_signs(self):
        for tf in FUNCTIONS.values():
            xs, signs = draw_samples(tf, 4000, Pcg32(3))
            lo, hi = tf.domain
            assert xs.size == 4000
            assert np.all((xs >= lo) & (xs <= hi))
            assert np.array_equal(signs, np.sign(tf.fn(xs)))

    def test_sample_density_follows_the_absolute_value(self):
        """The quartic's |f| vanishes at 0 and peaks at the edges."""
        xs, _ = draw_samples(FUNCTIONS["quartic_polynomial"], 50_000, Pcg32(5))
        near_zero = np.count_nonzero(np.abs(xs) < 0.05)
        near_edge = np.count_nonzero(np.abs(xs) > 0.95)
        assert near_zero < 0.01 * near_edge


def welford_histogram(xs, signs, edges):
    """Sequential one-pass accumulation used as an oracle."""
    nbins = len(edges) - 1
    count = [0] * nbins
    mean = [0.0] * nbins
    m2 = [0.0] * nbins
    excluded = 0
    for x, w in zip(xs, signs):
        if x < edges[0] or x > edges[-1]:
            excluded += 1
            continue
        i = min(np.searchsorted(edges, x, side="right") - 1, nbins - 1)
        count[i] += 1
        delta = w - mean[i]
        mean[i] += delta / count[i]
        m2[i] += delta * (w - mean[i])
    return count, mean, m2, excluded


class TestMakeHistogram:
    def test_matches_a_sequential_accumulator(self):
        tf = FUNCTIONS["quartic_polynomial"]
        xs, signs = draw_samples(tf, 3000, Pcg32(21))
        edges = np.linspace(-1.0, 1.0, 17)
        hist = make_histogram(xs, signs, edges)
        count, mean, m2, excluded = welford_histogram(xs, signs, edges)
        assert hist.excluded_count == excluded
        for i, b in enumerate(hist.bins):
            assert b.count == count[i]
            assert b.mean == pytest.approx(mean[i], abs=1e-12)
            assert b.scaled_variance == pytest.approx(m2[i], abs=1e-9)

    def test_top_boundary_lands_in_the_last_bin(self):
        edges = np.linspace(0.0, 1.0, 5)
        hist = make_histogram(np.array([1.0, 0.25]), np.array([1.0, -1.0]), edges)
        assert [b.count for b in hist.bins] == [0, 1, 0, 1]
        assert hist.bins[3].mean == 1.0
        assert hist.excluded_count == 0

    def test_out_of_range_samples_are_excluded(self):
        edges = np.linspace(0.0, 1.0, 3)
        xs = np.array([-0.1, 0.5, 1.5])
        hist = make_histogram(xs, np.ones(3), edges)
        assert hist.excluded_count == 2
        assert hist.total_samples == 3

    def test_sign_bookkeeping_stays_in_range(self):
        hist = sampled_histogram("quartic_polynomial", 20_000, 5, seed=1)
        for b in hist.bins:
            assert -1.0 <= b.mean <= 1.0
            assert 0.0 <= b.scaled_variance <= b.count + 1e-9


class TestStatisticalConsistency:
    def test_whole_range_integral_matches_the_analytic_value(self):
        hist = sampled_histogram("quartic_polynomial", 100_000, 6, seed=2024)
        hier = build_hierarchy(hist, data_points_min=100)
        top = hier.bin(0, 0)
        assert top.error > 0
        assert abs(top.integral - QUARTIC_MEAN) <= 4.0 * top.error

    def test_exponential_exclusion_fraction(self):
        """Samples beyond the histogram range appear at the analytic rate."""
        p = (math.exp(-8.4) - math.exp(-9.0)) / (math.exp(-3.0) - math.exp(-9.0))
        tf = FUNCTIONS["exponential"]
        n = 20_000
        sigma = math.sqrt(n * p * (1.0 - p))
        for seed in range(1, 21):
            xs, _ = draw_samples(tf, n, Pcg32(seed))
            outside = np.count_nonzero(xs > 2.8)
            assert abs(outside - n * p) <= 5.0 * sigma, f"seed {seed}"


class TestNonuniformEdges:
    def test_shape_and_symmetry(self):
        edges = nonuniform_edges()
        assert edges.size == 257
        assert edges[0] == -5.0 and edges[-1] == 5.0 and edges[128] == 0.0
        assert np.allclose(edges + edges[::-1], 0.0, atol=1e-12)

    def test_widths_grow_away_from_the_center(self):
        edges = nonuniform_edges()
        widths = np.diff(edges[128:])
        assert widths[0] == pytest.approx(10.0 / 4096.0)
        assert np.all(np.diff(widths) > 0)
        assert widths[-1] > 30 * widths[0]

    def test_growth_ratio_solves_the_coverage_equation(self):
        edges = nonuniform_edges()
        widths = np.diff(edges[128:])
        ratio = widths[1] / widths[0]
        assert (ratio ** 128 - 1.0) / (ratio - 1.0) == pytest.approx(2048.0, rel=1e-9)

    def test_custom_range(self):
        edges = nonuniform_edges(0.0, 1.0, half_bins=4, min_width_scale=16.0)
        assert edges.size == 9
        assert edges[0] == 0.0 and edges[-1] == 1.0
        assert np.diff(edges).min() == pytest.approx(1.0 / 16.0)


class TestFunctionGrid:
    def test_quartic_values(self):
        text = function_grid(FUNCTIONS["quartic_polynomial"], 5)
        rows = [line.split() for line in text.splitlines()]
        assert len(rows) == 5
        xs = [float(r[0]) for r in rows]
        ys = [float(r[1]) for r in rows]
        assert xs == [-1.0, -0.5, 0.0, 0.5, 1.0]
        assert ys[2] == 0.0
        assert ys[4] == pytest.approx(0.2 / 0.171964, rel=1e-12)

    def test_grid_spans_the_histogram_range(self):
        text = function_grid(FUNCTIONS["exponential"], 3)
        rows = [line.split() for line in text.splitlines()]
        assert float(rows[0][0]) == 1.0
        assert float(rows[-1][0]) == 2.8

    def test_values_round_trip_through_repr(self):
        text = function_grid(FUNCTIONS["triple_gaussian"], 7)
        tf = FUNCTIONS["triple_gaussian"]
        for line in text.splitlines():
            x, y = (float(tok) for tok in line.split())
            assert y == float(tf.fn(np.float64(x)))


class TestGeneratorConfig:
    def test_defaults(self):
        config = parse_generator_params("")
        assert config == GeneratorConfig()

    def test_typical_file(self):
        text = """
        # data generation
        Function = exp
        SampleSize = 5000
        PowerBins = 6
        Seed = 99
        HistogramOutput = exp.dat
        GridOutput = exp_grid.dat
        GridPoints = 33
        """
        config = parse_generator_params(text)
        assert config == GeneratorConfig(
            function="exp", sample_size=5000, power_bins=6, seed=99,
            histogram_output="exp.dat", grid_output="exp_grid.dat",
            grid_points=33)

    def test_unknown_key(self):
        with pytest.raises(UnknownKey, match="samplesize2"):
            parse_generator_params("SampleSize2 = 5")

    def test_non_integer_value(self):
        with pytest.raises(InvalidValue, match="seed"):
            parse_generator_params("Seed = twelve")

    @pytest.mark.parametrize("kwargs", [
        {"sample_size": 0},
        {"power_bins": 0},
        {"power_bins": 21},
        {"seed": -1},
        {"grid_points": 1},
    ])
    def test_constraint_violations(self, kwargs):
        with pytest.raises(InvalidConfig):
            GeneratorConfig(**kwargs)


class TestRunGenerator:
    def test_writes_a_parsable_histogram(self, tmp_path):
        config = GeneratorConfig(sample_size=4000, power_bins=5, seed=3)
        (path,) = run_generator(config, tmp_path)
        assert path == tmp_path / "histogram.dat"
        hist = parse_histogram(path.read_text())
        assert len(hist.bins) == 32
        assert hist.total_samples == 4000

    def test_grid_file_when_requested(self, tmp_path):
        config = GeneratorConfig(sample_size=1000, power_bins=4, seed=3,
                                 grid_output="grid.dat", grid_points=64)
        paths = run_generator(config, tmp_path)
        assert [p.name for p in paths] == ["histogram.dat", "grid.dat"]
        assert len((tmp_path / "grid.dat").read_text().splitlines()) == 64

    def test_triple_gaussian_adds_the_nonuniform_histogram(self, tmp_path):
        config = GeneratorConfig(function="triple_gaussian", sample_size=4000,
                                 power_bins=5, seed=8)
        paths = run_generator(config, tmp_path)
        assert [p.name for p in paths] == ["histogram.dat",
                                           "nonuniform_histogram.dat"]
        nonuni = parse_histogram(paths[1].read_text())
        assert len(nonuni.bins) == 256
        uni = parse_histogram(paths[0].read_text())
        # both histograms bin the same draw
        assert nonuni.total_samples == uni.total_samples

    def test_byte_identical_reruns(self, tmp_path):
        config = GeneratorConfig(function="triple_gaussian", sample_size=3000,
                                 power_bins=4, seed=77, grid_output="g.dat")
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir()
        b.mkdir()
        for path_a, path_b in zip(run_generator(config, a),
                                  run_generator(config, b)):
            assert path_a.read_bytes() == path_b.read_bytes()


class TestMain:
    def test_list_prints_the_functions(self, capsys):
        assert main(["--list"]) == 0
        assert capsys.readouterr().out.splitlines() == sorted(FUNCTIONS)

    @pytest.mark.parametrize("argv", [[], ["a", "b"]])
    def test_help_on_wrong_usage(self, argv, capsys):
        assert main(argv) == 1
        assert "usage: generator" in capsys.readouterr().out

    def test_parameter_file_run(self, tmp_path, monkeypatch, capsys):
        param = tmp_path / "gen.param"
        param.write_text("SampleSize = 2000\nPowerBins = 4\nSeed = 5\n")
        monkeypatch.chdir(tmp_path)
        assert main([str(param)]) == 0
        assert "wrote" in capsys.readouterr().err
        hist = parse_histogram((tmp_path / "histogram.dat").read_text())
        assert hist.total_samples == 2000

    def test_missing_parameter_file(self, capsys):
        assert main(["/nonexistent/gen.param"]) == 6
        assert "generator:" in capsys.readouterr().err

    @pytest.mark.parametrize("text", [
        "Function = quintic\n",
        "SampleSize = -3\n",
        "NoSuchKey = 1\n",
        "PowerBins 6\n",
    ])
    def test_bad_configuration(self, text, tmp_path, capsys):
        param = tmp_path / "gen.param"
        param.write_text(text)
        assert main([str(param)]) == 2
        assert "generator:" in capsys.readouterr().err
