"""
Implicit checks for n = 3: the 2 x 2 x 2 hyperdeterminant, its gradient, the
criticality rank matrix and singular-locus screening.

A tensor entry p_ijk is the coordinate of the subset with mask i + 2j + 4k,
so p_000 is the empty set and p_100 is {1}. Inputs are length-8 vectors in
mask order (or a MinorVector with n = 3).
"""

import logging
from typing import Tuple, Union

import numpy as np

from .combinatorics import SubsetIndex, graded_masks
from .exceptions import DimensionError
from .models import DataVector, MinorVector, RankReport, ScreenReport

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
ZERO_TOL = 1e-12

TensorLike = Union[MinorVector, np.ndarray]


def _mask(label: str) -> int:
    i, j, k = (int(c) for c in label)
    return i + 2 * j + 4 * k


def _term(coefficient: int, *labels: str) -> Tuple[int, Tuple[int, ...]]:
    return coefficient, tuple(_mask(label) for label in labels)


HYPERDET_TERMS = (
    _term(1, "000", "000", "111", "111"),
    _term(1, "001", "001", "110", "110"),
    _term(1, "011", "011", "100", "100"),
    _term(1, "010", "010", "101", "101"),
    _term(4, "000", "011", "101", "110"),
    _term(4, "001", "010", "100", "111"),
    _term(-2, "000", "001", "110", "111"),
    _term(-2, "000", "010", "101", "111"),
    _term(-2, "000", "011", "100", "111"),
    _term(-2, "001", "010", "101", "110"),
    _term(-2, "001", "011", "100", "110"),
    _term(-2, "010", "011", "100", "101"),
)


def _as_vector(p: TensorLike) -> np.ndarray:
    values = p.values if isinstance(p, (MinorVector, DataVector)) else np.asarray(p)
    if values.shape != (8,):
        raise DimensionError(f"Expected 8 coordinates for a 2x2x2 tensor, got shape {values.shape}")
    return values


def as_tensor(p: TensorLike) -> np.ndarray:
    """The 2 x 2 x 2 array T[i, j, k] = p_ijk."""
    return _as_vector(p).reshape(2, 2, 2).transpose(2, 1, 0)


def hyperdet(p: TensorLike):
    """Cayley's hyperdeterminant, the quartic cutting out the n = 3 model."""
    v = _as_vector(p)
    return sum(c * np.prod(v[list(masks)]) for c, masks in HYPERDET_TERMS)


def hyperdet_gradient(p: TensorLike) -> np.ndarray:
    """Partials dDet/dp_I in mask order."""
    v = _as_vector(p)
    grad = np.zeros(8, dtype=np.result_type(v, float))
    for c, masks in HYPERDET_TERMS:
        for pos, m in enumerate(masks):
            others = masks[:pos] + masks[pos + 1:]
            grad[m] += c * np.prod(v[list(others)])
    return grad


def critical_rank_matrix(p: TensorLike, u: Union[DataVector, np.ndarray]) -> RankReport:
    """Rows (u_I), (p_I), (p_I dDet/dp_I) in graded order and their numerical rank.

    Each row is scaled to unit length before the SVD so the relative
    threshold does not depend on the size of the counts.
    """
    v = _as_vector(p)
    data = _as_vector(u)
    rows = np.vstack([data, v, v * hyperdet_gradient(v)])[:, list(graded_masks(3))]
    norms = np.linalg.norm(rows, axis=1)
    normalized = rows / np.where(norms > 0, norms, 1.0)[:, None]
    singular_values = np.linalg.svd(normalized, compute_uv=False)
    top = singular_values[0]
    rank = int(np.sum(singular_values > RANK_TOL * top)) if top > 0 else 0
    return RankReport(matrix=rows, singular_values=[float(s) for s in singular_values], rank=rank)


def support_and_singularity_screen(p: TensorLike) -> ScreenReport:
    """Zero coordinates, zero coordinate sum and the ranks of the three flattenings."""
    v = _as_vector(p)
    scale = float(np.max(np.abs(v))) if np.any(v) else 1.0
    zeros = [
        SubsetIndex(mask=m).label or "empty"
        for m in graded_masks(3)
        if abs(v[m]) <= ZERO_TOL * scale
    ]
    zero_sum = abs(v.sum()) <= ZERO_TOL * scale * 8
    tensor = as_tensor(v)
    ranks = []
    for axis in range(3):
        flat = np.moveaxis(tensor, axis, 0).reshape(2, 4)
        s = np.linalg.svd(flat, compute_uv=False)
        ranks.append(int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0)
    logger.debug(f"Screen: zeros={zeros}, zero_sum={zero_sum}, flattening ranks={ranks}")
    return ScreenReport(zero_coordinates=zeros, zero_sum=zero_sum, flattening_ranks=ranks)
