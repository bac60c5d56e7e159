"""
Distinctness check for refined solutions via Newton-contraction balls.

For each point z the Newton step length beta = |J(z)^-1 F(z)| and an
estimate L of the Lipschitz constant of J(z)^-1 J(.) near z give
h = beta * L. When h <= 1/2 a true solution lies within

    r = (1 - sqrt(1 - 2h)) / L

of z. Two points whose distance exceeds the sum of their radii are
reported distinct. L is sampled, not bounded rigorously.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from .exceptions import DPPError, InconclusiveBallError
from .models import CertificationReport, PointCertificate
from .reparam import FixedDataSystem

logger = logging.getLogger(__name__)

LIPSCHITZ_SAMPLES = 6
LIPSCHITZ_SAFETY = 2.0
OFFSET_SIZE = 1e-4


def _operator_norm(a: np.ndarray) -> float:
    """Max-row-sum norm, induced by the max norm."""
    return float(np.max(np.sum(np.abs(a), axis=1)))


def certify_point(
    system: FixedDataSystem,
    z: np.ndarray,
    index: int = 0,
    residual_gate: float = 1e-6,
    rng: Optional[np.random.Generator] = None,
) -> PointCertificate:
    """Convergence-ball estimate for one point."""
    rng = rng or np.random.default_rng(index)
    z = np.asarray(z, dtype=complex)
    try:
        res, jac = system.evaluate(z)
        beta = float(np.max(np.abs(np.linalg.solve(jac, res))))
        offset = OFFSET_SIZE * (1.0 + float(np.max(np.abs(z))))
        lipschitz = 0.0
        for _ in range(LIPSCHITZ_SAMPLES):
            d = rng.standard_normal(z.shape) + 1j * rng.standard_normal(z.shape)
            d *= offset / np.max(np.abs(d))
            shifted = system.jacobian(z + d)
            lipschitz = max(lipschitz, _operator_norm(np.linalg.solve(jac, shifted - jac)) / offset)
    except (DPPError, np.linalg.LinAlgError) as e:
        return PointCertificate(
            index=index, beta=float("inf"), lipschitz=float("inf"), h=float("inf"),
            residual=float("inf"), certified=False, reason=f"evaluation failed: {e}",
        )
    lipschitz = max(LIPSCHITZ_SAFETY * lipschitz, np.finfo(float).eps)
    residual = float(np.max(np.abs(res)))
    h = beta * lipschitz
    if residual > residual_gate:
        return PointCertificate(
            index=index, beta=beta, lipschitz=lipschitz, h=h, residual=residual,
            certified=False, reason="residual above gate",
        )
    if h > 0.5:
        return PointCertificate(
            index=index, beta=beta, lipschitz=lipschitz, h=h, residual=residual,
            certified=False, reason="contraction test failed",
        )
    radius = (1.0 - np.sqrt(1.0 - 2.0 * h)) / lipschitz
    return PointCertificate(
        index=index, beta=beta, lipschitz=lipschitz, h=h, radius=float(radius),
        residual=residual, certified=True,
    )


def distinctness_check(
    points: Sequence[np.ndarray],
    system: FixedDataSystem,
    residual_gate: float = 1e-6,
    seed: int = 0,
    require: bool = False,
) -> CertificationReport:
    """Certify each point and test pairwise separation of the convergence balls.

    Args:
        points: Refined solutions in the system's coordinates
        system: Square system with fixed data
        residual_gate: Largest residual a certified point may have
        seed: Seed for the Lipschitz offsets
        require: Raise when some pair of balls overlaps

    Returns:
        Per-point certificates and the overlapping pairs

    Raises:
        InconclusiveBallError: If ``require`` and some balls overlap
    """
    rng = np.random.default_rng(seed)
    certificates = [
        certify_point(system, z, k, residual_gate, rng) for k, z in enumerate(points)
    ]
    overlaps = []
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            ra, rb = certificates[a].radius, certificates[b].radius
            if ra is None or rb is None:
                continue
            gap = float(np.max(np.abs(np.asarray(points[a]) - np.asarray(points[b]))))
            if gap <= ra + rb:
                overlaps.append((a, b))
    report = CertificationReport(certificates=certificates, overlaps=overlaps)
    logger.info(
        f"Certified {report.certified_count}/{len(points)} points, "
        f"{len(overlaps)} overlapping pairs"
    )
    if require and overlaps:
        raise InconclusiveBallError(f"Convergence balls overlap for pairs {overlaps}")
    return report
