"""
Birational chart and the likelihood equation systems.

In the chart, element 1 is the pivot: x_1j = theta_1j^2 and
x_ij = theta_1i theta_1j theta_ij. With D = diag(1, sqrt(x_12), ..., sqrt(x_1n))
we have Theta = D^-1 M D^-1, where M is polynomial in the chart:

    M_11 = theta_11, M_ii = theta_ii x_1i, M_1j = x_1j, M_ij = x_ij

so det(Theta_I) = det(M_I) / prod_{i in I, i >= 2} x_1i and the likelihood
becomes

    sum_I u_I log det M_I - |u| log det(M + D^2) + sum_{i >= 2} c_i log x_1i

with c_i the total count of subsets not containing i. No square roots appear
along paths.
"""

import logging
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from .combinatorics import param_pairs
from .exceptions import InvalidInputError, ZeroChartCoordinateError
from .likelihood import (
    logdet_jets,
    padded_submatrices,
    subset_bits,
    theta_columns,
)
from .models import DataVector, ReparamPoint, SymMatrix, pack_upper, unpack_upper

logger = logging.getLogger(__name__)


# ============================================================================
# Coordinate changes
# ============================================================================


def to_reparam(theta: SymMatrix) -> ReparamPoint:
    """Chart coordinates of a matrix; constant on its sign orbit."""
    t = theta.entries
    n = theta.n
    diag = np.diag(t).copy()
    off = []
    for i, j in param_pairs(n):
        if i == j:
            continue
        if i == 0:
            off.append(t[0, j] ** 2)
        else:
            off.append(t[0, i] * t[0, j] * t[i, j])
    return ReparamPoint(n=n, diag=diag, off=np.array(off, dtype=t.dtype))


def from_reparam(point: ReparamPoint, branch: Optional[Sequence[int]] = None) -> SymMatrix:
    """Matrix with the given chart coordinates.

    Args:
        point: Chart coordinates
        branch: Signs (+1/-1) of sqrt(x_1i) for i = 2..n; all +1 by default

    Returns:
        A member of the sign orbit mapping to ``point``

    Raises:
        ZeroChartCoordinateError: If some x_1i = 0
        InvalidInputError: If ``branch`` is not n - 1 signs
    """
    n = point.n
    z = point.to_vector()
    index = {pair: k for k, pair in enumerate(param_pairs(n))}
    x1 = np.array([z[index[(0, i)]] for i in range(1, n)])
    if np.any(x1 == 0):
        raise ZeroChartCoordinateError("Point lies outside the chart: some x_1i vanishes")
    signs = np.ones(n - 1) if branch is None else np.asarray(branch, dtype=float)
    if signs.shape != (n - 1,) or not np.all(np.abs(signs) == 1):
        raise InvalidInputError(f"Branch must hold {n - 1} signs of +1/-1")
    if np.iscomplexobj(x1) or np.any(x1 < 0):
        roots = np.sqrt(x1.astype(complex))
    else:
        roots = np.sqrt(x1)
    first_row = np.concatenate([[1.0], signs * roots])
    theta = np.zeros((n, n), dtype=np.result_type(z, first_row))
    for (i, j), k in index.items():
        if i == j:
            theta[i, i] = z[k]
        elif i == 0:
            theta[0, j] = theta[j, 0] = first_row[j]
        else:
            theta[i, j] = theta[j, i] = z[k] / (first_row[i] * first_row[j])
    return SymMatrix(entries=theta)


def chart_vector(theta: np.ndarray) -> np.ndarray:
    """Parameter-order chart coordinates of a raw matrix."""
    return to_reparam(SymMatrix(entries=theta)).to_vector()


def matrix_from_chart(n: int, z: np.ndarray, branch: Optional[Sequence[int]] = None) -> np.ndarray:
    return from_reparam(ReparamPoint.from_vector(n, z), branch).entries


# ============================================================================
# Equation systems
# ============================================================================


class LikelihoodSystem:
    """Critical equations whose gradient and Jacobian are linear in the data.

    Subclasses provide :meth:`columns`, returning per-subset gradient columns
    G_I(z) and Hessian slices H_I(z) in mask order, so that
    ``grad = u @ G`` and ``jac = sum_I u_I H_I``.
    """

    coordinates = "abstract"

    def __init__(self, n: int):
        self.n = n
        self.num_vars = n * (n + 1) // 2

    def columns(
        self, z: np.ndarray, hessian: bool = True
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        raise NotImplementedError

    def residual(self, z: np.ndarray, u: np.ndarray) -> np.ndarray:
        g, _ = self.columns(z, hessian=False)
        return u @ g

    def evaluate(self, z: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g, h = self.columns(z)
        return u @ g, np.einsum("b,bst->st", u, h)

    def kernel_map(self, z: np.ndarray) -> np.ndarray:
        """The binom(n+1, 2) x 2^n matrix A(z) with grad = A(z) u."""
        g, _ = self.columns(z, hessian=False)
        return g.T


class ThetaSystem(LikelihoodSystem):
    """Critical equations in matrix coordinates theta_ij (i <= j)."""

    coordinates = "theta"

    def columns(self, z, hessian=True):
        theta = unpack_upper(self.n, np.asarray(z, dtype=complex))
        return theta_columns(theta, hessian=hessian)

    def to_matrix(self, z: np.ndarray) -> np.ndarray:
        return unpack_upper(self.n, z)

    def from_matrix(self, theta: np.ndarray) -> np.ndarray:
        return pack_upper(theta)


@lru_cache(maxsize=None)
def _chart_layout(n: int):
    """Index bookkeeping for the chart, fixed per n."""
    pairs = param_pairs(n)
    index = {pair: k for k, pair in enumerate(pairs)}
    x1_idx = np.array([index[(0, i)] for i in range(1, n)], dtype=int)
    # c_i weights: subset masks not containing element i (i >= 1)
    missing = ~subset_bits(n)[:, 1:]
    # d^2 M_jj / (d theta_jj d x_1j) = 1
    second = tuple((index[(j, j)], index[(0, j)], j) for j in range(1, n))
    units = np.zeros((len(second), n, n))
    for k, (_, _, j) in enumerate(second):
        units[k, j, j] = 1.0
    _, inside = padded_submatrices(np.eye(n), np.arange(1 << n))
    return index, x1_idx, missing, second, units, inside


class ChartSystem(LikelihoodSystem):
    """Critical equations in the chart (theta_ii, x_ij)."""

    coordinates = "chart"

    def polynomial_matrices(self, z: np.ndarray):
        """M, dM/dz and the nonzero second derivatives, plus the Z-matrix analogues."""
        n = self.n
        index, x1_idx, _, second, _, _ = _chart_layout(n)
        z = np.asarray(z, dtype=complex)
        m = np.zeros((n, n), dtype=complex)
        d_m = np.zeros((self.num_vars, n, n), dtype=complex)
        d_z = np.zeros((self.num_vars, n, n), dtype=complex)
        for (i, j), k in index.items():
            if i == 0 and j == 0:
                m[0, 0] = z[k]
                d_m[k, 0, 0] = 1.0
            elif i == j:
                x = z[index[(0, i)]]
                m[i, i] = z[k] * x
                d_m[k, i, i] = x
            elif i == 0:
                m[0, j] = m[j, 0] = z[k]
                d_m[k, 0, j] = d_m[k, j, 0] = 1.0
                d_m[k, j, j] = z[index[(j, j)]]
                d_z[k, j, j] = 1.0
            else:
                m[i, j] = m[j, i] = z[k]
                d_m[k, i, j] = d_m[k, j, i] = 1.0
        d2 = np.zeros(n, dtype=complex)
        d2[0] = 1.0
        d2[1:] = z[x1_idx]
        z_matrix = m + np.diag(d2)
        return m, d_m, z_matrix, d_m + d_z, list(second)

    def columns(self, z, hessian=True):
        n = self.n
        _, x1_idx, missing, second, units, inside = _chart_layout(n)
        z = np.asarray(z, dtype=complex)
        x1 = z[x1_idx]
        if np.any(x1 == 0):
            raise ZeroChartCoordinateError("Chart coordinate x_1i vanished")
        m, d_m, z_matrix, d_zm, _ = self.polynomial_matrices(z)
        padded, _ = padded_submatrices(m, np.arange(1 << n))
        d_padded = d_m[None, :, :, :] * inside[:, None, :, :]
        second_terms = [(s, t, units[k][None, :, :] * inside) for k, (s, t, _) in enumerate(second)]
        grad, hess = logdet_jets(padded, d_padded, second_terms, hessian=hessian)

        z_terms = [(s, t, units[k][None, :, :]) for k, (s, t, _) in enumerate(second)]
        z_grad, z_hess = logdet_jets(z_matrix[None], d_zm[None], z_terms, hessian=hessian)

        grad = grad - z_grad
        # log x_1i terms for subsets missing element i
        grad[:, x1_idx] += missing / x1[None, :]
        if hessian:
            hess = hess - z_hess
            hess[:, x1_idx, x1_idx] -= missing / (x1[None, :] ** 2)
        return grad, hess


class FixedDataSystem:
    """A likelihood system with the data vector bound: F(z) = 0 is square."""

    def __init__(self, system: LikelihoodSystem, u: np.ndarray):
        self.system = system
        self.u = np.asarray(u, dtype=complex)

    @property
    def num_vars(self) -> int:
        return self.system.num_vars

    def residual(self, z: np.ndarray) -> np.ndarray:
        return self.system.residual(z, self.u)

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        return self.system.evaluate(z, self.u)[1]

    def evaluate(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.system.evaluate(z, self.u)


def grad_system(u: DataVector, coordinates: str = "chart") -> FixedDataSystem:
    """The square critical-equation system for fixed data.

    Args:
        u: Data vector (may be complex)
        coordinates: ``"chart"`` for (theta_ii, x_ij) or ``"theta"`` for matrix entries

    Returns:
        System exposing ``residual``, ``jacobian`` and ``evaluate``
    """
    if coordinates == "chart":
        system: LikelihoodSystem = ChartSystem(u.n)
    elif coordinates == "theta":
        system = ThetaSystem(u.n)
    else:
        raise InvalidInputError(f"Unknown coordinates: {coordinates}")
    return FixedDataSystem(system, u.values)
