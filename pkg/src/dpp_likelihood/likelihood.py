"""
The DPP model: principal minors, partition function, both log-likelihood
forms, their derivatives, and sign orbits.

Every subset I is handled through the padded matrix P_I, equal to Theta on
the rows and columns of I and to the identity elsewhere, so det(P_I) is the
principal minor det(Theta_I) and all 2^n subsets go through numpy in one
batch. Derivatives of log det(P_I) come from linear solves, never explicit
inverses.
"""

import logging
from functools import lru_cache
from itertools import product
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .combinatorics import param_pairs
from .exceptions import (
    NonpositiveMinorError,
    SingularMinorError,
    ZeroCoordinateError,
    ZeroMinorError,
    ZeroSumError,
)
from .models import DataVector, MinorVector, SymMatrix, unpack_upper

logger = logging.getLogger(__name__)

Scalar = Union[float, complex]

ORBIT_ZERO_TOL = 1e-10


# ============================================================================
# Batched log-determinant jets
# ============================================================================


@lru_cache(maxsize=None)
def subset_bits(n: int) -> np.ndarray:
    """Boolean membership table, shape (2^n, n), row m is the subset with mask m."""
    masks = np.arange(1 << n)
    return ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)


@lru_cache(maxsize=None)
def symmetric_basis(n: int) -> np.ndarray:
    """dTheta/dtheta_ij for each parameter (i <= j), shape (S, n, n)."""
    pairs = param_pairs(n)
    basis = np.zeros((len(pairs), n, n))
    for s, (i, j) in enumerate(pairs):
        basis[s, i, j] = 1.0
        basis[s, j, i] = 1.0
    return basis


def padded_submatrices(matrix: np.ndarray, masks: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stack of padded principal submatrices and their membership masks."""
    n = matrix.shape[0]
    bits = subset_bits(n)[masks]
    inside = bits[:, :, None] & bits[:, None, :]
    padded = np.where(inside, matrix[None, :, :], np.eye(n, dtype=matrix.dtype)[None, :, :])
    return padded, inside


def logdet_jets(
    stack: np.ndarray,
    d_stack: np.ndarray,
    second: Sequence[Tuple[int, int, np.ndarray]] = (),
    hessian: bool = True,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """First and second derivatives of log det over a batch of matrices.

    Args:
        stack: Matrices P_b, shape (B, n, n)
        d_stack: First derivatives dP_b/dz_s, shape (B, S, n, n)
        second: Nonzero second derivatives as (s, t, d2P) with d2P of shape (B, n, n)
        hessian: Whether to compute second derivatives

    Returns:
        Gradients of shape (B, S) and Hessians of shape (B, S, S) or None

    Raises:
        SingularMinorError: If some P_b is singular
    """
    try:
        with np.errstate(all="ignore"):
            x = np.linalg.solve(stack[:, None, :, :], d_stack)
    except np.linalg.LinAlgError as e:
        raise SingularMinorError("Principal submatrix is singular") from e
    if not np.all(np.isfinite(x)):
        raise SingularMinorError("Principal submatrix is numerically singular")
    grad = np.einsum("bsii->bs", x)
    if not hessian:
        return grad, None
    hess = -np.einsum("bsij,btji->bst", x, x)
    if second:
        extra = np.stack([d2 for _, _, d2 in second], axis=1)
        try:
            y = np.linalg.solve(stack[:, None, :, :], extra)
        except np.linalg.LinAlgError as e:
            raise SingularMinorError("Principal submatrix is singular") from e
        traces = np.einsum("bkii->bk", y)
        for k, (s, t, _) in enumerate(second):
            hess[:, s, t] += traces[:, k]
            if s != t:
                hess[:, t, s] += traces[:, k]
    return grad, hess


def theta_columns(
    theta: np.ndarray, masks: Optional[np.ndarray] = None, hessian: bool = True
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Per-subset gradient columns and Hessian slices in matrix coordinates.

    The likelihood gradient is ``u @ columns`` and its Jacobian
    ``einsum("b,bst->st", u, hessians)``, so both are linear in the data.
    """
    n = theta.shape[0]
    if masks is None:
        masks = np.arange(1 << n)
    basis = symmetric_basis(n)
    padded, inside = padded_submatrices(theta, masks)
    d_padded = basis[None, :, :, :] * inside[:, None, :, :]
    grad, hess = logdet_jets(padded, d_padded, hessian=hessian)
    z_matrix = theta + np.eye(n)
    z_grad, z_hess = logdet_jets(z_matrix[None], basis[None], hessian=hessian)
    grad = grad - z_grad
    if hessian:
        hess = hess - z_hess
    return grad, hess


# ============================================================================
# Minors and likelihood values
# ============================================================================


def principal_minors(theta: SymMatrix) -> MinorVector:
    """All 2^n principal minors det(Theta_I), with det(Theta_empty) = 1."""
    n = theta.n
    padded, _ = padded_submatrices(theta.entries, np.arange(1 << n))
    return MinorVector(n=n, values=np.linalg.det(padded))


def partition_function(theta: SymMatrix) -> Scalar:
    """Z = det(Theta + Id)."""
    return np.linalg.det(theta.entries + np.eye(theta.n))


def _is_real_mode(*arrays: np.ndarray) -> bool:
    return not any(np.iscomplexobj(a) and np.any(a.imag != 0) for a in arrays)


def _weighted_log_terms(weights: np.ndarray, coords: np.ndarray, total_coord: Scalar, real: bool,
                        zero_error, nonpositive_error, sum_error) -> Scalar:
    active = weights != 0
    needed = coords[active]
    if real:
        needed = needed.real
        if np.any(needed <= 0):
            raise nonpositive_error("A coordinate with nonzero count is not positive")
        if np.real(total_coord) <= 0:
            raise sum_error("Normalizing constant is not positive")
        value = np.sum(weights[active].real * np.log(needed))
        return float(value - weights.sum().real * np.log(np.real(total_coord)))
    if np.any(needed == 0):
        raise zero_error("A coordinate with nonzero count vanishes")
    if total_coord == 0:
        raise sum_error("Normalizing constant vanishes")
    value = np.sum(weights[active] * np.log(needed.astype(complex)))
    return complex(value - weights.sum() * np.log(complex(total_coord)))


def loglike_parametric(theta: SymMatrix, u: DataVector) -> Scalar:
    """L_u(Theta) = sum_I u_I log det(Theta_I) - |u| log det(Theta + Id).

    Terms with u_I = 0 are dropped. Real inputs evaluate the real branch and
    need positive minors; complex inputs use the principal logarithm.

    Raises:
        NonpositiveMinorError: Real branch with a needed minor or Z not positive
        ZeroMinorError: Complex branch with a needed minor or Z equal to zero
    """
    minors = principal_minors(theta).values
    z = partition_function(theta)
    real = _is_real_mode(theta.entries, u.values)
    return _weighted_log_terms(
        u.values, minors, z, real, ZeroMinorError, NonpositiveMinorError,
        NonpositiveMinorError if real else ZeroMinorError,
    )


def loglike_implicit(p: MinorVector, u: DataVector) -> Scalar:
    """L_u(p) = sum_I u_I log p_I - |u| log sum_I p_I, homogeneous of degree 0 in p.

    Raises:
        ZeroCoordinateError: A coordinate p_I with u_I != 0 vanishes
        ZeroSumError: The coordinate sum vanishes
        NonpositiveMinorError: Real branch with a needed coordinate not positive
    """
    real = _is_real_mode(p.values, u.values)
    total = p.values.sum()
    if total == 0:
        raise ZeroSumError("Coordinate sum vanishes")
    return _weighted_log_terms(
        u.values, p.values, total, real, ZeroCoordinateError, NonpositiveMinorError, ZeroSumError
    )


# ============================================================================
# Derivatives
# ============================================================================


def gradient_vector(theta: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Gradient in parameter order (i <= j); only subsets with u_I != 0 are touched."""
    active = np.flatnonzero(u != 0)
    columns, _ = theta_columns(theta, active, hessian=False)
    return u[active] @ columns


def hessian_matrix(theta: np.ndarray, u: np.ndarray) -> np.ndarray:
    active = np.flatnonzero(u != 0)
    _, hess = theta_columns(theta, active, hessian=True)
    return np.einsum("b,bst->st", u[active], hess)


def gradient(theta: SymMatrix, u: DataVector) -> SymMatrix:
    """Partials dL/dtheta_ij (i <= j), returned as a symmetric matrix.

    Raises:
        SingularMinorError: If a submatrix with u_I != 0, or Theta + Id, is singular
    """
    return SymMatrix(entries=unpack_upper(theta.n, gradient_vector(theta.entries, u.values)))


def hessian(theta: SymMatrix, u: DataVector) -> np.ndarray:
    """Second partials, a symmetric binom(n+1, 2) square matrix in parameter order.

    Raises:
        SingularMinorError: As :func:`gradient`
    """
    h = hessian_matrix(theta.entries, u.values)
    return (h + h.T) / 2


# ============================================================================
# Sign orbits
# ============================================================================


def sign_orbit(theta: SymMatrix) -> List[SymMatrix]:
    """All D Theta D for diagonal sign matrices D with D_11 = +1, duplicates removed."""
    n = theta.n
    orbit: List[SymMatrix] = []
    for tail in product((1.0, -1.0), repeat=n - 1):
        d = np.array((1.0,) + tail)
        member = theta.entries * np.outer(d, d)
        if not any(np.array_equal(member, m.entries) for m in orbit):
            orbit.append(SymMatrix(entries=member))
    return orbit


def _orientation(x: complex, tol: float) -> float:
    if abs(x.real) > tol:
        return 1.0 if x.real > 0 else -1.0
    return 1.0 if x.imag >= 0 else -1.0


def canonical_representative(theta: np.ndarray, tol: float = ORBIT_ZERO_TOL) -> np.ndarray:
    """Orbit member whose spanning-tree edges all point in the positive direction.

    Signs propagate breadth-first over the graph of nonzero off-diagonal
    entries, starting at the smallest element of each connected component.
    """
    n = theta.shape[0]
    scale = tol * (1.0 + float(np.max(np.abs(theta))))
    signs = np.zeros(n)
    for root in range(n):
        if signs[root]:
            continue
        signs[root] = 1.0
        queue = [root]
        while queue:
            i = queue.pop(0)
            for j in range(n):
                if signs[j] or abs(theta[i, j]) <= scale:
                    continue
                signs[j] = signs[i] * _orientation(complex(theta[i, j]), scale)
                queue.append(j)
    return theta * np.outer(signs, signs)


def same_orbit(a: np.ndarray, b: np.ndarray, tol: float = 1e-8) -> bool:
    """Whether two matrices agree up to conjugation by a diagonal sign matrix."""
    ca = canonical_representative(np.asarray(a))
    cb = canonical_representative(np.asarray(b))
    scale = 1.0 + max(float(np.max(np.abs(ca))), float(np.max(np.abs(cb))))
    return float(np.max(np.abs(ca - cb))) <= tol * scale
