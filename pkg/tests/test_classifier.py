"""Tests for critical-point classification."""

import numpy as np
import pytest

from dpp_likelihood.classifier import classify, has_accidental_zero, mark_global_maxima
from dpp_likelihood.combinatorics import SetPartition
from dpp_likelihood.models import CriticalKind, CriticalPoint, DataVector, SymMatrix

ON_MODEL_MATRIX = [[8, 5, 3], [5, 22, 6], [3, 6, 18]]
ON_MODEL_DATA = [1, 8, 22, 18, 151, 135, 360, 2412]


def make_point(entries, origin="123", **fields):
    return CriticalPoint(theta=SymMatrix(entries=entries), origin=origin, residual=0.0, **fields)


class TestClassify:
    """Test flags computed by classify."""

    def test_on_model_maximum(self):
        """Test that the on-model matrix is a positive definite local maximum."""
        u = DataVector.from_graded(3, ON_MODEL_DATA)
        point = classify(make_point(ON_MODEL_MATRIX), u)
        data = np.array(ON_MODEL_DATA, dtype=float)
        expected = float(np.sum(data * np.log(data)) - data.sum() * np.log(data.sum()))
        assert point.is_real
        assert point.is_real_minors
        assert point.is_positive_definite
        assert point.kind == CriticalKind.LOCAL_MAX
        assert point.value == pytest.approx(expected, rel=1e-10)
        assert point.residual < 1e-9
        assert not point.accidental_zero

    def test_tiny_imaginary_parts(self):
        """Test that rounding-level imaginary parts count as real."""
        u = DataVector.from_graded(3, ON_MODEL_DATA)
        entries = np.array(ON_MODEL_MATRIX, dtype=complex) + 1e-13j
        point = classify(make_point(entries), u)
        assert point.is_real
        assert not point.theta.is_complex

    def test_imaginary_preimage(self):
        """Test real minors without a real matrix preimage."""
        entries = np.array([[2.0, 1j, 0.0], [1j, 2.0, 0.0], [0.0, 0.0, 1.0]])
        u = DataVector.from_graded(3, [1, 2, 2, 1, 5, 2, 2, 5])
        point = classify(make_point(entries), u)
        assert not point.is_real
        assert point.is_real_minors
        assert point.value is None
        assert point.kind is None
        assert not point.is_positive_definite

    def test_indefinite(self):
        """Test a real matrix that is not positive definite."""
        entries = [[1.0, 2.0], [2.0, 2.0]]
        u = DataVector.from_graded(2, [1, 1, 1, 0])
        point = classify(make_point(entries, origin="12"), u)
        assert point.is_real
        assert not point.is_positive_definite

    def test_orbit_member_kept(self):
        """Test that classification keeps the given orbit member."""
        d = np.diag([1.0, -1.0, 1.0])
        entries = d @ np.array(ON_MODEL_MATRIX, dtype=float) @ d
        point = classify(make_point(entries), DataVector.from_graded(3, ON_MODEL_DATA))
        np.testing.assert_array_equal(point.theta.entries, entries)


class TestAccidentalZero:
    """Test detection of vanishing entries inside origin blocks."""

    def test_main_component(self):
        """Test a trivial-origin point with theta_12 = 0."""
        assert has_accidental_zero(make_point([[2, 0, 2], [0, 4, 3], [2, 3, 7]]))

    def test_block_structure_is_not_accidental(self):
        """Test that zeros between blocks are expected."""
        point = make_point([[2, 1, 0], [1, 4, 0], [0, 0, 7]], origin="12|3")
        assert not has_accidental_zero(point)

    def test_zero_inside_block(self):
        """Test a zero inside a two-element block."""
        point = make_point([[2, 0, 0], [0, 4, 0], [0, 0, 7]], origin="12|3")
        assert has_accidental_zero(point)
        singletons = point.model_copy(update={"origin": SetPartition.singletons(3)})
        assert not has_accidental_zero(singletons)


class TestGlobalMaxima:
    """Test marking global maxima."""

    def test_ties_marked(self):
        """Test that equal best values are all global."""
        points = [
            make_point(np.eye(2), origin="12", kind=CriticalKind.LOCAL_MAX, value=-10.0),
            make_point(np.eye(2), origin="12", kind=CriticalKind.LOCAL_MAX, value=-10.0 + 1e-12),
            make_point(np.eye(2), origin="12", kind=CriticalKind.LOCAL_MAX, value=-11.0),
            make_point(np.eye(2), origin="12", kind=CriticalKind.SADDLE, value=-1.0),
        ]
        flags = [p.is_global_max for p in mark_global_maxima(points)]
        assert flags == [True, True, False, False]

    def test_no_maxima(self):
        """Test a set without local maxima."""
        points = [make_point(np.eye(2), origin="12", kind=CriticalKind.SADDLE, value=-1.0)]
        assert not mark_global_maxima(points)[0].is_global_max
