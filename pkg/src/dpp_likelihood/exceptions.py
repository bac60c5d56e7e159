"""
Exception hierarchy for the DPP likelihood toolkit.

Every error carries the exit code the CLI reports when it escapes a command.
"""

from typing import Optional


class DPPError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 2


# ============================================================================
# Input errors
# ============================================================================


class InputError(DPPError, ValueError):
    """Malformed or out-of-range input."""


class DimensionError(InputError):
    """Dimension n outside the supported range."""


class InvalidInputError(InputError):
    """A data vector, matrix, partition or options file failed validation."""


class EmptyBlockError(InputError):
    """A set-partition block or restriction block is empty."""


class MissingMLDegreeError(InputError):
    """The ML degree table has no entry for a required block size."""


class BellOverflowError(InputError):
    """Bell number requested beyond the supported range."""


# ============================================================================
# Evaluation errors
# ============================================================================


class EvaluationError(DPPError):
    """A likelihood quantity is undefined at the given point."""


class NonpositiveMinorError(EvaluationError):
    """Real-branch evaluation met a principal minor or Z that is not positive."""


class ZeroMinorError(EvaluationError):
    """Complex-branch evaluation met a vanishing principal minor or Z."""


class ZeroCoordinateError(EvaluationError):
    """Implicit likelihood met a vanishing coordinate p_I with u_I != 0."""


class ZeroSumError(EvaluationError):
    """Implicit likelihood met a vanishing coordinate sum."""


class SingularMinorError(EvaluationError):
    """A principal submatrix needed for a derivative is not invertible."""


class ZeroDenominatorError(EvaluationError):
    """Closed-form block estimate with v_empty = 0."""


class ZeroChartCoordinateError(EvaluationError):
    """A chart point with x_1i = 0 lies outside the birational chart."""


# ============================================================================
# Solver errors
# ============================================================================


class SolverError(DPPError):
    """Numerical solver failure."""

    exit_code = 3


class SingularJacobianError(SolverError):
    """Newton met a singular Jacobian."""


class MaxIterationsError(SolverError):
    """Newton did not converge within the iteration budget."""


class PathFailureError(SolverError):
    """A homotopy path could not be tracked to its end."""

    def __init__(self, message: str, reason: str, t: Optional[float] = None):
        super().__init__(message)
        self.reason = reason
        self.t = t


class StallWithoutTargetError(SolverError):
    """Monodromy stopped before reaching the known ML degree."""

    def __init__(self, message: str, found: int, expected: int):
        super().__init__(message)
        self.found = found
        self.expected = expected


# ============================================================================
# Verification errors
# ============================================================================


class VerificationError(DPPError):
    """A verification check failed."""

    exit_code = 4


class InconclusiveBallError(VerificationError):
    """Convergence balls of two approximate solutions overlap."""
