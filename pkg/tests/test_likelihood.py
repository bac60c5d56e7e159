"""Tests for minors, likelihood values, derivatives and sign orbits."""

import numpy as np
import pytest

from dpp_likelihood.combinatorics import param_pairs
from dpp_likelihood.exceptions import (
    NonpositiveMinorError,
    SingularMinorError,
    ZeroCoordinateError,
    ZeroMinorError,
    ZeroSumError,
)
from dpp_likelihood.likelihood import (
    canonical_representative,
    gradient,
    gradient_vector,
    hessian,
    loglike_implicit,
    loglike_parametric,
    partition_function,
    principal_minors,
    same_orbit,
    sign_orbit,
)
from dpp_likelihood.models import DataVector, MinorVector, SymMatrix, pack_upper, unpack_upper

ON_MODEL_MATRIX = [[8, 5, 3], [5, 22, 6], [3, 6, 18]]
ON_MODEL_DATA = [1, 8, 22, 18, 151, 135, 360, 2412]


def random_pd(n, rng):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def random_data(n, rng):
    return DataVector(n=n, values=rng.integers(1, 50, size=1 << n).astype(float))


class TestPrincipalMinors:
    """Test principal minors and the partition function."""

    def test_on_model_minors(self):
        """Test the minor vector of the on-model matrix."""
        p = principal_minors(SymMatrix(entries=ON_MODEL_MATRIX))
        np.testing.assert_allclose(p.graded(), ON_MODEL_DATA, rtol=1e-12)
        assert partition_function(SymMatrix(entries=ON_MODEL_MATRIX)) == pytest.approx(3107)

    def test_accidental_zero_determinant(self):
        """Test the minors of the matrix with a vanishing off-diagonal entry."""
        p = principal_minors(SymMatrix(entries=[[2, 0, 2], [0, 4, 3], [2, 3, 7]]))
        np.testing.assert_allclose(p.graded(), [1, 2, 4, 7, 8, 10, 19, 22], rtol=1e-12)

    def test_identity(self):
        """Test that every minor of the identity is one."""
        p = principal_minors(SymMatrix.identity(4))
        np.testing.assert_allclose(p.values, np.ones(16))
        assert partition_function(SymMatrix.identity(4)) == pytest.approx(16)

    def test_partition_function_is_minor_sum(self):
        """Test det(Theta + Id) = sum of all principal minors."""
        rng = np.random.default_rng(3)
        for n in (2, 3, 4, 5):
            theta = SymMatrix(entries=random_pd(n, rng))
            assert partition_function(theta) == pytest.approx(principal_minors(theta).values.sum())

    def test_sign_orbit_invariance(self):
        """Test that every orbit member has the same minors."""
        rng = np.random.default_rng(4)
        theta = SymMatrix(entries=random_pd(4, rng))
        reference = principal_minors(theta).values
        for member in sign_orbit(theta):
            np.testing.assert_allclose(
                principal_minors(member).values, reference, rtol=1e-12, atol=1e-12
            )


class TestLoglikelihood:
    """Test parametric and implicit likelihood values."""

    def test_forms_agree(self):
        """Test that both forms agree at the minors of a matrix."""
        rng = np.random.default_rng(5)
        for n in (1, 2, 3, 4):
            theta = SymMatrix(entries=random_pd(n, rng))
            u = random_data(n, rng)
            assert loglike_implicit(principal_minors(theta), u) == pytest.approx(
                loglike_parametric(theta, u), rel=1e-12
            )

    def test_implicit_homogeneous(self):
        """Test degree-0 homogeneity of the implicit form."""
        u = DataVector.from_graded(3, ON_MODEL_DATA)
        p = MinorVector.from_graded(3, ON_MODEL_DATA)
        scaled = MinorVector(n=3, values=7.5 * p.values)
        assert loglike_implicit(scaled, u) == pytest.approx(loglike_implicit(p, u))

    def test_zero_counts_skip_terms(self):
        """Test that subsets with u_I = 0 do not need a positive minor."""
        theta = SymMatrix(entries=[[-0.5]])
        u = DataVector.from_graded(1, [1, 0])
        assert loglike_parametric(theta, u) == pytest.approx(np.log(2.0))

    def test_nonpositive_minor(self):
        """Test the real branch with a negative minor."""
        with pytest.raises(NonpositiveMinorError):
            loglike_parametric(SymMatrix(entries=[[-0.5]]), DataVector.from_graded(1, [1, 1]))

    def test_complex_zero_minor(self):
        """Test the complex branch with a vanishing minor."""
        u = DataVector.from_graded(1, [[1, 1], [1, 0]])
        with pytest.raises(ZeroMinorError):
            loglike_parametric(SymMatrix(entries=[[0.0]]), u)

    def test_complex_branch_value(self):
        """Test the principal-log branch for complex data."""
        u = DataVector.from_graded(1, [[1, 1], [2, 0]])
        value = loglike_parametric(SymMatrix(entries=[[3.0]]), u)
        expected = 2 * np.log(3.0) - (3 + 1j) * np.log(4.0)
        assert value == pytest.approx(expected)

    def test_implicit_zero_sum(self):
        """Test a vanishing coordinate sum."""
        with pytest.raises(ZeroSumError):
            loglike_implicit(
                MinorVector(n=1, values=[1.0, -1.0]), DataVector.from_graded(1, [1, 1])
            )

    def test_implicit_zero_coordinate(self):
        """Test a vanishing coordinate with a nonzero count."""
        u = DataVector.from_graded(1, [[1, 1], [1, 0]])
        with pytest.raises(ZeroCoordinateError):
            loglike_implicit(MinorVector(n=1, values=[1.0, 0.0]), u)


class TestDerivatives:
    """Test gradients and Hessians against finite differences."""

    def _fd_gradient(self, theta, u, h=1e-5):
        n = theta.shape[0]
        x0 = pack_upper(theta)
        grad = np.zeros(len(x0))
        for s in range(len(x0)):
            step = np.zeros(len(x0))
            step[s] = h
            hi = loglike_parametric(SymMatrix(entries=unpack_upper(n, x0 + step)), u)
            lo = loglike_parametric(SymMatrix(entries=unpack_upper(n, x0 - step)), u)
            grad[s] = (hi - lo) / (2 * h)
        return grad

    def test_gradient_finite_differences(self):
        """Test the analytic gradient on random instances."""
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            theta = random_pd(n, rng)
            u = random_data(n, rng)
            analytic = gradient_vector(theta, u.values)
            numeric = self._fd_gradient(theta, u)
            scale = max(1.0, float(np.max(np.abs(analytic))))
            assert np.max(np.abs(analytic - numeric)) / scale < 1e-6

    def test_hessian_finite_differences(self):
        """Test the analytic Hessian against differences of the gradient."""
        rng = np.random.default_rng(8)
        n = 3
        theta = random_pd(n, rng)
        u = random_data(n, rng)
        h_analytic = hessian(SymMatrix(entries=theta), u)
        x0 = pack_upper(theta)
        step = 1e-6
        h_numeric = np.zeros_like(h_analytic)
        for s in range(len(x0)):
            e = np.zeros(len(x0))
            e[s] = step
            hi = gradient_vector(unpack_upper(n, x0 + e), u.values)
            lo = gradient_vector(unpack_upper(n, x0 - e), u.values)
            h_numeric[:, s] = (hi - lo) / (2 * step)
        scale = max(1.0, float(np.max(np.abs(h_analytic))))
        assert np.max(np.abs(h_analytic - h_numeric)) / scale < 1e-6
        np.testing.assert_allclose(h_analytic, h_analytic.T)

    def test_gradient_vanishes_on_model(self):
        """Test that a matrix is critical for data equal to its own minors."""
        theta = SymMatrix(entries=ON_MODEL_MATRIX)
        grad = gradient(theta, DataVector.from_graded(3, ON_MODEL_DATA))
        assert np.max(np.abs(grad.entries)) < 1e-9

    def test_accidental_zero_point_is_critical(self):
        """Test the critical point with a vanishing off-diagonal entry."""
        theta = SymMatrix(entries=[[2, 0, 2], [0, 4, 3], [2, 3, 7]])
        u = DataVector.from_graded(3, [2, 1, 3, 7, 9, 10, 19, 22])
        assert np.max(np.abs(gradient(theta, u).entries)) < 1e-10

    def test_gradient_layout(self):
        """Test that the gradient matrix holds partials at (i, j) and (j, i)."""
        rng = np.random.default_rng(9)
        theta = random_pd(3, rng)
        u = random_data(3, rng)
        grad = gradient(SymMatrix(entries=theta), u)
        vector = gradient_vector(theta, u.values)
        for k, (i, j) in enumerate(param_pairs(3)):
            assert grad.entries[i, j] == pytest.approx(vector[k])
            assert grad.entries[j, i] == pytest.approx(vector[k])

    def test_singular_minor(self):
        """Test that a singular submatrix with a nonzero count raises."""
        theta = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(SingularMinorError):
            gradient_vector(theta, np.ones(4))


class TestSignOrbits:
    """Test sign orbits and canonical representatives."""

    def test_generic_orbit_size(self):
        """Test that a matrix without zero entries has 2^(n-1) orbit members."""
        orbit = sign_orbit(SymMatrix(entries=ON_MODEL_MATRIX))
        assert len(orbit) == 4
        assert all(np.array_equal(np.diag(m.entries), [8, 22, 18]) for m in orbit)

    def test_diagonal_orbit(self):
        """Test that a diagonal matrix is its own orbit."""
        assert len(sign_orbit(SymMatrix(entries=np.diag([1.0, 2.0, 3.0])))) == 1

    def test_accidental_zero_orbit(self):
        """Test that one zero entry in a connected graph keeps the orbit full."""
        orbit = sign_orbit(SymMatrix(entries=[[2, 0, 2], [0, 4, 3], [2, 3, 7]]))
        assert len(orbit) == 4

    def test_canonical_representative(self):
        """Test that every orbit member maps to the same representative."""
        theta = SymMatrix(entries=ON_MODEL_MATRIX)
        reps = [canonical_representative(m.entries) for m in sign_orbit(theta)]
        for rep in reps:
            np.testing.assert_array_equal(rep, reps[0])
        np.testing.assert_array_equal(reps[0], ON_MODEL_MATRIX)

    def test_same_orbit(self):
        """Test orbit membership."""
        a = np.array(ON_MODEL_MATRIX, dtype=float)
        d = np.diag([1.0, -1.0, 1.0])
        assert same_orbit(a, d @ a @ d)
        b = a.copy()
        b[0, 1] = b[1, 0] = 4.0
        assert not same_orbit(a, b)

    def test_complex_orbit(self):
        """Test canonical orientation of complex entries."""
        a = np.array([[1.0, 2j], [2j, 1.0]])
        b = np.array([[1.0, -2j], [-2j, 1.0]])
        assert same_orbit(a, b)
