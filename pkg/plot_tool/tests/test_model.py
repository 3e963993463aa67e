"""Parsing and evaluation of spline files."""

import math

import numpy as np
import pytest

from bhm_spline import BhmSpline, SplineFileError, SplinePiece, load, parse

from conftest import TWO_PIECE_TEXT


class TestParse:
    def test_two_piece_file(self):
        spline = parse(TWO_PIECE_TEXT)
        assert spline.order == 2
        assert len(spline.pieces) == 2
        assert spline.domain() == (0.0, 2.0)
        first = spline.pieces[0]
        assert first.coeffs == (1.0, 0.5, -0.25)
        assert first.error_coeffs == (0.01, 0.0, 0.0, 0.0, 0.0)

    def test_comments_and_blank_lines_are_skipped(self):
        noisy = "# leading comment\n\n" + TWO_PIECE_TEXT.replace(
            "0.0 1.0 2.0", "0.0 1.0 2.0\n# a remark between sections\n"
        )
        spline = parse(noisy)
        assert spline.domain() == (0.0, 2.0)

    def test_piece_markers_are_case_insensitive(self):
        text = TWO_PIECE_TEXT.replace("# spline piece", "# Spline Piece")
        assert parse(text).order == 2

    def test_load_reads_a_file(self, two_piece_file):
        spline = load(two_piece_file)
        assert len(spline.pieces) == 2

    @pytest.mark.parametrize(
        "mangle, fragment",
        [
            (lambda t: "", "file ends"),
            (lambda t: t.replace("2 2", "2"), "order piece-count"),
            (lambda t: t.replace("2 2", "2.5 2"), "order piece-count"),
            (lambda t: t.replace("2 2", "0 2"), "order >= 1"),
            (lambda t: t.replace("2 2", "2 0"), "at least one piece"),
            (lambda t: t.replace("0.0 1.0 2.0", "0.0 1.0"), "3 boundaries"),
            (lambda t: t.replace("0.0 1.0 2.0", "0.0 1.0 0.5"),
             "increase strictly"),
            (lambda t: t.replace("# spline piece 2\n", ""), "marker"),
            (lambda t: t.replace("1.0 0.5 -0.25", "1.0 0.5"),
             "3 coefficients"),
            (lambda t: t.replace("0.01 0.0 0.0 0.0 0.0", "0.01 0.0", 1),
             "5 error coefficients"),
            (lambda t: t.replace("1.0 0.5 -0.25", "1.0 oops -0.25"),
             "must be numbers"),
            (lambda t: t[: t.index("# spline piece 2")],
             "ends before piece 2"),
            (lambda t: t[: t.rindex("0.75")],
             "coefficients of piece 2"),
            (lambda t: t + "99.0\n", "after the last piece"),
        ],
    )
    def test_malformed_files_are_rejected(self, mangle, fragment):
        with pytest.raises(SplineFileError) as err:
            parse(mangle(TWO_PIECE_TEXT))
        assert fragment in str(err.value)

    def test_errors_carry_line_numbers(self):
        bad = TWO_PIECE_TEXT.replace("1.0 0.5 -0.25", "1.0 oops -0.25")
        with pytest.raises(SplineFileError, match=r"line 5:"):
            parse(bad)


class TestValidation:
    def test_pieces_must_tile_the_range(self):
        pieces = [
            SplinePiece(0.0, 1.0, (1.0, 0.0), (0.0, 0.0, 0.0)),
            SplinePiece(1.5, 2.0, (1.0, 0.0), (0.0, 0.0, 0.0)),
        ]
        with pytest.raises(ValueError):
            BhmSpline(pieces)

    def test_error_coefficient_count_must_match_the_order(self):
        piece = SplinePiece(0.0, 1.0, (1.0, 0.0), (0.0,) * 5)
        with pytest.raises(ValueError):
            BhmSpline([piece])

    def test_pieces_must_share_one_order(self):
        pieces = [
            SplinePiece(0.0, 1.0, (1.0, 0.0), (0.0, 0.0, 0.0)),
            SplinePiece(1.0, 2.0, (1.0, 0.0, 0.0), (0.0,) * 5),
        ]
        with pytest.raises(ValueError):
            BhmSpline(pieces)

    def test_empty_ranges_are_rejected(self):
        piece = SplinePiece(1.0, 1.0, (1.0, 0.0), (0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            BhmSpline([piece])


class TestEvaluate:
    def test_polynomial_values(self):
        spline = parse(TWO_PIECE_TEXT)
        x = 0.5
        assert spline(x) == pytest.approx(1.0 + 0.5 * x - 0.25 * x * x)
        x = 1.5
        assert spline(x) == pytest.approx(0.75 + 1.0 * x - 0.5 * x * x)

    def test_interior_boundary_belongs_to_the_right_piece(self):
        spline = parse(TWO_PIECE_TEXT)
        assert spline(1.0) == pytest.approx(0.75 + 1.0 - 0.5)

    def test_top_edge_belongs_to_the_last_piece(self):
        spline = parse(TWO_PIECE_TEXT)
        assert spline(2.0) == pytest.approx(0.75 + 2.0 - 0.5 * 4.0)

    def test_vectorized_evaluation_matches_scalars(self):
        spline = parse(TWO_PIECE_TEXT)
        xs = np.linspace(0.0, 2.0, 41)
        ys = spline(xs)
        assert ys.shape == xs.shape
        for x, y in zip(xs, ys):
            assert y == pytest.approx(spline(float(x)))

    def test_scalar_outside_the_domain_is_nan(self):
        spline = parse(TWO_PIECE_TEXT)
        with pytest.warns(UserWarning, match="outside the spline domain"):
            assert math.isnan(spline(-0.5))

    def test_out_of_domain_points_are_dropped_with_a_warning(self):
        spline = parse(TWO_PIECE_TEXT)
        xs = np.array([-1.0, 0.5, 1.5, 3.0])
        with pytest.warns(UserWarning, match=r"2 point\(s\) outside"):
            ys = spline(xs)
        assert ys.shape == (2,)
        assert ys[0] == pytest.approx(spline(0.5))

    def test_errorbar_is_the_root_of_the_variance_polynomial(self):
        spline = parse(TWO_PIECE_TEXT)
        assert spline.errorbar(0.5) == pytest.approx(0.1)
        assert spline.errorbar(1.5) == pytest.approx(0.2)

    def test_errorbar_clamps_negative_variance_to_zero(self):
        text = TWO_PIECE_TEXT.replace("0.01 0.0 0.0 0.0 0.0",
                                      "-0.01 0.0 0.0 0.0 0.0", 1)
        spline = parse(text)
        assert spline.errorbar(0.5) == 0.0

    def test_round_trip_through_a_file(self, two_piece_file):
        spline = load(two_piece_file)
        xs = np.linspace(0.0, 2.0, 17)
        direct = parse(TWO_PIECE_TEXT)
        np.testing.assert_array_equal(spline(xs), direct(xs))
