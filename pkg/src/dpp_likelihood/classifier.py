"""
Classification of critical points: reality, positive-definiteness, Hessian
inertia, likelihood value and global maxima.
"""

import logging
from typing import List, Optional

import numpy as np

from .exceptions import EvaluationError
from .likelihood import (
    canonical_representative,
    gradient_vector,
    hessian_matrix,
    loglike_parametric,
    principal_minors,
)
from .models import CriticalKind, CriticalPoint, DataVector, SymMatrix
from .settings import SolverSettings

logger = logging.getLogger(__name__)

ACCIDENTAL_ZERO_TOL = 1e-8
GLOBAL_MAX_TOL = 1e-8


def _inertia(eigenvalues: np.ndarray, floor: float) -> CriticalKind:
    if np.any(np.abs(eigenvalues) <= floor):
        return CriticalKind.DEGENERATE
    if np.all(eigenvalues < 0):
        return CriticalKind.LOCAL_MAX
    if np.all(eigenvalues > 0):
        return CriticalKind.LOCAL_MIN
    return CriticalKind.SADDLE


def has_accidental_zero(point: CriticalPoint) -> bool:
    """Whether an off-diagonal entry inside one of the origin blocks vanishes."""
    theta = point.theta.entries
    tol = ACCIDENTAL_ZERO_TOL * (1.0 + float(np.max(np.abs(theta))))
    for block in point.origin.blocks:
        idx = [e - 1 for e in block]
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                if abs(theta[idx[a], idx[b]]) <= tol:
                    return True
    return False


def classify(
    point: CriticalPoint, u: DataVector, settings: Optional[SolverSettings] = None
) -> CriticalPoint:
    """Recompute every flag of a refined critical point.

    Returns:
        A copy with residual, value, reality, definiteness and kind filled in
    """
    settings = settings or SolverSettings()
    theta = point.theta.entries
    canonical = canonical_representative(theta)
    scale = 1.0 + float(np.max(np.abs(canonical)))
    is_real = float(np.max(np.abs(np.imag(canonical)))) <= settings.imag_tol * scale

    minors = principal_minors(point.theta).values
    minor_scale = 1.0 + float(np.max(np.abs(minors)))
    is_real_minors = float(np.max(np.abs(np.imag(minors)))) <= settings.imag_tol * minor_scale

    try:
        residual = float(np.max(np.abs(gradient_vector(point.theta.entries, u.values))))
    except EvaluationError:
        residual = float("inf")

    is_pd = False
    kind = None
    value = None
    if is_real:
        real_theta = np.real(theta)
        is_pd = bool(np.linalg.eigvalsh(real_theta).min() > settings.eigen_floor * scale)
        if not u.is_complex:
            real_u = np.real(u.values)
            try:
                h = hessian_matrix(real_theta, real_u)
                h = np.real((h + h.T) / 2)
                eig = np.linalg.eigvalsh(h)
                kind = _inertia(eig, settings.eigen_floor * (1.0 + float(np.max(np.abs(eig)))))
                if kind == CriticalKind.DEGENERATE:
                    logger.warning(f"Degenerate Hessian at point from {point.origin}")
            except EvaluationError as e:
                logger.warning(f"Hessian undefined at point from {point.origin}: {e}")
            try:
                real_data = DataVector(n=u.n, values=real_u)
                value = float(loglike_parametric(SymMatrix(entries=real_theta), real_data))
            except EvaluationError:
                value = None

    return point.model_copy(
        update={
            "theta": SymMatrix(entries=np.real(theta) if is_real else theta),
            "residual": residual,
            "value": value,
            "is_real": is_real,
            "is_real_minors": is_real_minors,
            "is_positive_definite": is_pd,
            "kind": kind,
            "accidental_zero": has_accidental_zero(point),
        }
    )


def mark_global_maxima(points: List[CriticalPoint]) -> List[CriticalPoint]:
    """Flag the local maxima attaining the largest likelihood value."""
    values = [p.value for p in points if p.kind == CriticalKind.LOCAL_MAX and p.value is not None]
    if not values:
        return [p.model_copy(update={"is_global_max": False}) for p in points]
    best = max(values)
    cutoff = best - GLOBAL_MAX_TOL * max(1.0, abs(best))
    return [
        p.model_copy(
            update={
                "is_global_max": p.kind == CriticalKind.LOCAL_MAX
                and p.value is not None
                and p.value >= cutoff
            }
        )
        for p in points
    ]
