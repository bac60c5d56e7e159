"""
Solver settings.

Defaults can be overridden from the environment (``DPP_`` prefix), a ``.env``
file, an options file, or CLI flags, in increasing order of precedence.
"""

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class SolverSettings(BaseSettings):
    """Tolerances, step control and run limits shared by all solver stages."""

    model_config = SettingsConfigDict(env_prefix="DPP_", env_file=".env", extra="ignore")

    seed: int = Field(0, ge=0, description="Seed for all random draws")
    workers: int = Field(1, ge=1, description="Worker threads for path tracking")

    # Acceptance
    dedup_tol: float = Field(1e-8, description="Relative distance merging two solutions")
    residual_tol: float = Field(1e-12, description="Relative Newton step at convergence")
    gradient_tol: float = Field(1e-8, description="Accepted max-norm of the full gradient")
    imag_tol: float = Field(1e-8, description="Imaginary-part tolerance for reality")
    eigen_floor: float = Field(1e-10, description="Relative eigenvalue floor for PD/inertia")

    # Path tracking
    initial_step: float = Field(0.05, description="First step in homotopy time")
    max_step: float = Field(0.25, description="Largest step in homotopy time")
    min_step: float = Field(1e-12, description="Step underflow threshold")
    max_steps: int = Field(2000, ge=1, description="Step budget per path")
    corrector_iterations: int = Field(3, ge=1, description="Newton corrector iterations per step")
    divergence_bound: float = Field(1e10, description="Coordinate magnitude treated as divergence")

    # Newton
    newton_max_iter: int = Field(50, ge=1, description="Iteration budget for refinement")

    # Monodromy
    stall_limit: int = Field(10, ge=1, description="Consecutive loops without new solutions")
    max_loops: int = Field(200, ge=1, description="Hard cap on monodromy loops")
    path_retries: int = Field(3, ge=0, description="Re-runs of a failed path with new gamma")

    # Multistart
    multistart_starts: int = Field(2000, ge=1, description="Random Newton starts")

    # Certification
    certification_residual_gate: float = Field(
        1e-6, description="Largest relative residual a point may have to be certified"
    )

    @field_validator(
        "dedup_tol",
        "residual_tol",
        "gradient_tol",
        "imag_tol",
        "eigen_floor",
        "initial_step",
        "max_step",
        "min_step",
        "divergence_bound",
        "certification_residual_gate",
    )
    @classmethod
    def validate_positive(cls, v, info):
        """All tolerances and step sizes must be positive."""
        if v <= 0:
            raise ValueError(f"{info.field_name} must be positive, got {v}")
        return v
