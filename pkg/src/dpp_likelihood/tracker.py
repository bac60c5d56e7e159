"""
Complex Newton refinement and parameter-homotopy path tracking.

Paths move the data vector u(t) for t from 0 to 1 with the unknowns z(t)
following a solution of grad L_{u(t)}(z) = 0. Since the equations are linear
in u, dF/dt at fixed z is the same map applied to u'(t).
"""

import logging
from typing import Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .exceptions import (
    DPPError,
    EvaluationError,
    MaxIterationsError,
    PathFailureError,
    SingularJacobianError,
)
from .models import NewtonReport, NewtonStatus, PathResult
from .reparam import FixedDataSystem, LikelihoodSystem
from .settings import SolverSettings

logger = logging.getLogger(__name__)

FIRST_CORRECTION_LIMIT = 0.05
CONTRACTION_LIMIT = 0.125
CORRECTOR_NOISE = 1e-10
CORRECTOR_ACCEPT = 1e-6
GROWTH_FACTOR = 1.5
SUCCESSES_BEFORE_GROWTH = 3
QUADRATIC_CONSTANT = 10.0
ROUNDOFF = 1e-14

Columns = Tuple[np.ndarray, np.ndarray]


def _scale(z: np.ndarray) -> float:
    return 1.0 + float(np.max(np.abs(z))) if z.size else 1.0


def _newton_step(jac: np.ndarray, res: np.ndarray) -> np.ndarray:
    try:
        step = np.linalg.solve(jac, -res)
    except np.linalg.LinAlgError as e:
        raise SingularJacobianError("Jacobian is singular") from e
    if not np.all(np.isfinite(step)):
        raise SingularJacobianError("Jacobian is numerically singular")
    return step


# ============================================================================
# Newton
# ============================================================================


def newton_refine(
    system: FixedDataSystem,
    start: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> Tuple[np.ndarray, NewtonReport]:
    """Refine an approximate solution with Newton's method.

    Convergence means a relative step ``|dz| <= tol * (1 + |z|)`` in the max
    norm. When the last two steps contract quadratically the result is
    reported as certified.

    Args:
        system: Square system with fixed data
        start: Starting point
        tol: Relative step tolerance
        max_iter: Iteration budget

    Returns:
        Refined point and a convergence report

    Raises:
        SingularJacobianError: If the Jacobian is singular along the way
        MaxIterationsError: If the budget runs out before convergence
    """
    z = np.asarray(start, dtype=complex).copy()
    history: List[float] = []
    for k in range(max_iter + 1):
        try:
            res, jac = system.evaluate(z)
        except EvaluationError as e:
            raise SingularJacobianError(f"Evaluation failed during Newton: {e}") from e
        step = _newton_step(jac, res)
        rel = float(np.max(np.abs(step))) / _scale(z)
        if k == 0 and rel <= tol:
            return z, NewtonReport(
                iterations=0,
                status=NewtonStatus.CONVERGED,
                step_norm=rel,
                residual=float(np.max(np.abs(res))),
            )
        if k == max_iter:
            break
        z = z + step
        history.append(rel)
        if rel <= tol:
            bound = QUADRATIC_CONSTANT * history[-2] ** 2 + ROUNDOFF if len(history) >= 2 else 0.0
            quadratic = len(history) >= 2 and rel <= bound
            residual = float(np.max(np.abs(system.residual(z))))
            logger.debug(f"Newton converged in {k + 1} iterations, step {rel:.2e}")
            return z, NewtonReport(
                iterations=k + 1,
                status=NewtonStatus.CERTIFIED if quadratic else NewtonStatus.CONVERGED,
                step_norm=rel,
                residual=residual,
            )
    raise MaxIterationsError(f"Newton did not converge in {max_iter} iterations")


# ============================================================================
# Paths in data space
# ============================================================================


class LinearSegment(BaseModel):
    """u(t) = (1 - t) a + t b + gamma t (1 - t) w."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    start: np.ndarray
    end: np.ndarray
    gamma: complex = 0.0
    bend: Optional[np.ndarray] = None

    def at(self, t: float) -> np.ndarray:
        u = (1.0 - t) * self.start + t * self.end
        if self.bend is not None:
            u = u + self.gamma * t * (1.0 - t) * self.bend
        return u

    def derivative(self, t: float) -> np.ndarray:
        du = self.end - self.start
        if self.bend is not None:
            du = du + self.gamma * (1.0 - 2.0 * t) * self.bend
        return du

    def reversed(self) -> "LinearSegment":
        return LinearSegment(start=self.end, end=self.start, gamma=self.gamma, bend=self.bend)


class PathTracker:
    """Heun predictor with a Newton corrector and adaptive steps.

    The corrector's last evaluation supplies the tangent for the next step, so
    an accepted step costs one evaluation beyond the corrector iterations.
    A corrector that converges too slowly is treated as a jump to another
    path and the step is halved.
    """

    def __init__(self, system: LikelihoodSystem, settings: Optional[SolverSettings] = None):
        self.system = system
        self.settings = settings or SolverSettings()

    def _tangent(self, columns: Columns, path: LinearSegment, t: float) -> np.ndarray:
        g, h = columns
        jac = np.einsum("b,bst->st", path.at(t), h)
        return _newton_step(jac, path.derivative(t) @ g)

    def _predict(
        self, z: np.ndarray, tangent: np.ndarray, path: LinearSegment, t: float, dt: float
    ) -> np.ndarray:
        ahead = self._tangent(self.system.columns(z + dt * tangent), path, t + dt)
        return z + 0.5 * dt * (tangent + ahead)

    def _correct(self, z: np.ndarray, u: np.ndarray) -> Optional[Tuple[np.ndarray, Columns]]:
        previous = None
        size = float("inf")
        columns = None
        for k in range(self.settings.corrector_iterations):
            columns = self.system.columns(z)
            g, h = columns
            step = _newton_step(np.einsum("b,bst->st", u, h), u @ g)
            size = float(np.max(np.abs(step))) / _scale(z)
            if k == 0 and size > FIRST_CORRECTION_LIMIT:
                return None
            if previous is not None and size > max(CONTRACTION_LIMIT * previous, CORRECTOR_NOISE):
                return None
            z = z + step
            if size <= self.settings.residual_tol:
                return z, columns
            previous = size
        return (z, columns) if size <= CORRECTOR_ACCEPT else None

    def track(self, path: LinearSegment, start: np.ndarray, refine: bool = True) -> PathResult:
        """Follow one solution from t = 0 to t = 1.

        Raises:
            PathFailureError: With reason ``step_underflow``, ``divergence``,
                ``singular`` or ``max_steps``
        """
        s = self.settings
        z = np.asarray(start, dtype=complex).copy()
        try:
            columns = self.system.columns(z)
        except EvaluationError as e:
            raise PathFailureError(f"Start point is singular: {e}", "singular", 0.0) from e
        tangent: Optional[np.ndarray] = None
        t = 0.0
        dt = s.initial_step
        streak = 0
        steps = 0
        rejected = 0
        last_error: Optional[str] = None
        while t < 1.0:
            if steps >= s.max_steps:
                raise PathFailureError(f"Step budget exhausted at t={t:.6f}", "max_steps", t)
            steps += 1
            dt = min(dt, 1.0 - t)
            try:
                if tangent is None:
                    tangent = self._tangent(columns, path, t)
                predicted = self._predict(z, tangent, path, t, dt)
                outcome = self._correct(predicted, path.at(t + dt))
                last_error = None
            except (EvaluationError, SingularJacobianError):
                outcome = None
                last_error = "singular"
            if outcome is None:
                rejected += 1
                streak = 0
                dt /= 2.0
                if dt < s.min_step:
                    reason = last_error or "step_underflow"
                    raise PathFailureError(f"Path failed at t={t:.6f} ({reason})", reason, t)
                continue
            t = 1.0 if dt >= 1.0 - t else t + dt
            z, columns = outcome
            tangent = None
            if float(np.max(np.abs(z))) > s.divergence_bound:
                raise PathFailureError(f"Path diverged at t={t:.6f}", "divergence", t)
            streak += 1
            if streak >= SUCCESSES_BEFORE_GROWTH:
                dt = min(dt * GROWTH_FACTOR, s.max_step)
                streak = 0
        report = None
        if refine:
            try:
                z, report = newton_refine(
                    FixedDataSystem(self.system, path.at(1.0)), z, s.residual_tol, s.newton_max_iter
                )
            except DPPError as e:
                raise PathFailureError(f"Endpoint refinement failed: {e}", "singular", 1.0) from e
        logger.debug(f"Path tracked in {steps} steps ({rejected} rejected)")
        return PathResult(end=z, steps=steps, rejected_steps=rejected, newton=report)


def track_path(
    system: LikelihoodSystem,
    path: LinearSegment,
    starts: Iterable[np.ndarray],
    settings: Optional[SolverSettings] = None,
) -> List[Optional[PathResult]]:
    """Track every start solution along one path.

    Failed paths are logged and returned as None so the caller can count them.
    """
    tracker = PathTracker(system, settings)
    results: List[Optional[PathResult]] = []
    for k, start in enumerate(starts):
        try:
            results.append(tracker.track(path, start))
        except PathFailureError as e:
            logger.warning(f"Path {k} failed: {e.reason} at t={e.t}")
            results.append(None)
    return results
