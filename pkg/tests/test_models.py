"""Tests for data models."""

import numpy as np
import pytest

from dpp_likelihood.combinatorics import SetPartition
from dpp_likelihood.exceptions import DimensionError, InvalidInputError, MissingMLDegreeError
from dpp_likelihood.models import (
    CensusResult,
    Component,
    CriticalPoint,
    DataVector,
    HomotopyRun,
    MLDegreeTable,
    Provenance,
    ReparamPoint,
    RunConfig,
    SymMatrix,
    decode_array,
    encode_array,
    pack_upper,
    unpack_upper,
)


class TestSymMatrix:
    """Test SymMatrix validation."""

    def test_basic_matrix(self):
        """Test creating a real symmetric matrix."""
        theta = SymMatrix(entries=[[8, 5, 3], [5, 22, 6], [3, 6, 18]])
        assert theta.n == 3
        assert not theta.is_complex
        assert theta.entries.dtype == float
        np.testing.assert_array_equal(theta.upper(), [8, 5, 3, 22, 6, 18])

    def test_complex_pairs(self):
        """Test that [re, im] leaves decode to complex entries."""
        theta = SymMatrix(entries=[[[1, 0], [2, 1]], [[2, 1], [3, 0]]])
        assert theta.is_complex
        assert theta.entries[0, 1] == 2 + 1j

    def test_asymmetric_rejected(self):
        """Test that asymmetry beyond 1e-12 is rejected."""
        with pytest.raises(ValueError):
            SymMatrix(entries=[[1.0, 2.0], [2.1, 1.0]])

    def test_tiny_asymmetry_symmetrized(self):
        """Test that rounding-level asymmetry is averaged away."""
        theta = SymMatrix(entries=[[1.0, 2.0], [2.0 + 1e-15, 1.0]])
        assert theta.entries[0, 1] == theta.entries[1, 0]

    def test_non_square_rejected(self):
        """Test shape validation."""
        with pytest.raises(ValueError):
            SymMatrix(entries=[[1.0, 2.0, 3.0], [2.0, 1.0, 0.0]])

    def test_non_finite_rejected(self):
        """Test that NaN entries are rejected."""
        with pytest.raises(ValueError):
            SymMatrix(entries=[[1.0, float("nan")], [float("nan"), 1.0]])

    def test_upper_round_trip(self):
        """Test packing and unpacking upper-triangular entries."""
        m = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
        np.testing.assert_array_equal(unpack_upper(3, pack_upper(m)), m)
        assert SymMatrix.from_upper(3, [1, 2, 3, 4, 5, 6]).entries[2, 1] == 5

    def test_submatrix(self):
        """Test principal submatrices on one-based elements."""
        theta = SymMatrix(entries=[[8, 5, 3], [5, 22, 6], [3, 6, 18]])
        np.testing.assert_array_equal(theta.submatrix([1, 3]), [[8, 3], [3, 18]])


class TestDataVector:
    """Test subset-indexed data vectors."""

    def test_from_graded(self):
        """Test graded input is stored in mask order."""
        u = DataVector.from_graded(3, [1, 8, 22, 18, 151, 135, 360, 2412])
        assert u["13"] == 135
        assert u["23"] == 360
        assert u[""] == 1
        assert u.total == 3107
        np.testing.assert_array_equal(u.graded(), [1, 8, 22, 18, 151, 135, 360, 2412])

    def test_from_subset_dict(self):
        """Test subset-keyed input; absent subsets are zero."""
        u = DataVector.from_subset_dict(2, {"": 3, "1": 2, "12": 1})
        np.testing.assert_array_equal(u.graded(), [3, 2, 0, 1])
        assert u.to_subset_dict() == {"": 3.0, "1": 2.0, "2": 0.0, "12": 1.0}

    def test_wrong_length(self):
        """Test length validation."""
        with pytest.raises(InvalidInputError):
            DataVector.from_graded(3, [1, 2, 3])

    def test_negative_rejected(self):
        """Test that real counts must be nonnegative."""
        with pytest.raises(ValueError):
            DataVector.from_graded(2, [1, -2, 3, 4])

    def test_complex_allowed(self):
        """Test complex data for generic algebraic checks."""
        u = DataVector.from_graded(1, [[1, 0.5], [2, -1]])
        assert u.is_complex

    def test_dimension_range(self):
        """Test that n must lie in [1, 16]."""
        with pytest.raises(DimensionError):
            DataVector.from_graded(0, [1])

    def test_subset_outside_ground_set(self):
        """Test that keys beyond [n] are rejected."""
        with pytest.raises(InvalidInputError):
            DataVector.from_subset_dict(2, {"3": 1})


class TestReparamPoint:
    """Test chart coordinate containers."""

    def test_vector_round_trip(self):
        """Test conversion to and from parameter order."""
        z = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        point = ReparamPoint.from_vector(3, z)
        np.testing.assert_array_equal(point.diag, [1.0, 4.0, 6.0])
        np.testing.assert_array_equal(point.off, [2.0, 3.0, 5.0])
        np.testing.assert_array_equal(point.to_vector(), z)

    def test_wrong_shape(self):
        """Test coordinate count validation."""
        with pytest.raises(ValueError):
            ReparamPoint(n=3, diag=[1, 2, 3], off=[1, 2])


class TestCriticalPoint:
    """Test CriticalPoint serialization."""

    def test_origin_string(self):
        """Test that origins serialize as partition strings and parse back."""
        point = CriticalPoint(
            theta=SymMatrix(entries=np.eye(3)), origin="12|3", residual=0.0
        )
        assert point.origin == SetPartition.parse("12|3")
        data = point.model_dump(mode="json")
        assert data["origin"] == "12|3"
        assert data["theta"] == {"entries": np.eye(3).tolist()}

    def test_negative_residual_rejected(self):
        """Test residual validation."""
        with pytest.raises(ValueError):
            CriticalPoint(theta=SymMatrix(entries=np.eye(2)), origin="12", residual=-1.0)


class TestMLDegreeTable:
    """Test ML degree lookups."""

    def test_defaults(self):
        """Test the built-in degrees and their provenance."""
        table = MLDegreeTable.default()
        assert [table.get(r) for r in (1, 2, 3, 4)] == [1, 1, 13, 3526]
        assert table.entries[3].provenance == Provenance.EXACT
        assert table.entries[4].provenance == Provenance.NUMERICAL

    def test_missing(self):
        """Test that unknown block sizes raise."""
        with pytest.raises(MissingMLDegreeError):
            MLDegreeTable.default().get(5)
        assert MLDegreeTable.default().known(5) is None

    def test_overrides(self):
        """Test user-supplied degrees."""
        table = MLDegreeTable.default().with_overrides({5: 100})
        assert table.get(5) == 100
        assert table.entries[5].provenance == Provenance.USER
        assert MLDegreeTable.default().known(5) is None


class TestRunReports:
    """Test homotopy run and census bookkeeping."""

    def test_record_failure(self):
        """Test failure counters."""
        run = HomotopyRun(seed=0, n=3, target=13)
        run.record_failure("divergence")
        run.record_failure("divergence")
        run.record_failure("singular")
        assert run.path_failures == 3
        assert run.failure_reasons == {"divergence": 2, "singular": 1}
        assert not run.complete

    def test_points_excluded_from_dump(self):
        """Test that run dumps omit the solved points."""
        run = HomotopyRun(seed=0, n=3)
        assert "points" not in run.model_dump()
        assert run.complete

    def test_census_complete(self):
        """Test that a census without runs is complete."""
        u = DataVector.from_graded(2, [1, 2, 3, 4])
        result = CensusResult(n=2, data=u, component=Component.ALL, seed=0, points=[])
        assert result.complete

    def test_run_config_partition(self):
        """Test RunConfig partition validation."""
        config = RunConfig(command="decouple", partition="12|3", component="all")
        assert config.component == Component.ALL
        with pytest.raises(ValueError):
            RunConfig(command="decouple", partition="12|2")


class TestArrayCodec:
    """Test the JSON array helpers."""

    def test_complex_encoding(self):
        """Test that complex arrays encode as [re, im] leaves and decode back."""
        arr = np.array([1 + 2j, 3 - 1j])
        encoded = encode_array(arr)
        assert encoded == [[1.0, 2.0], [3.0, -1.0]]
        np.testing.assert_array_equal(decode_array(encoded, 1), arr)

    def test_non_numeric(self):
        """Test that strings are rejected."""
        with pytest.raises(InvalidInputError):
            decode_array(["a", "b"], 1)
