"""
DPP Likelihood Toolkit

Critical points of the log-likelihood of determinantal point processes:
closed forms for small blocks, a monodromy solver for the main component,
assembly over partial decouplings, and implicit checks for n = 3.
"""

__version__ = "0.1.0"

from .census import solve_census
from .combinatorics import SetPartition, SubsetIndex, enumerate_set_partitions
from .decoupling import assemble_decouplings, count_critical_points
from .likelihood import (
    gradient,
    hessian,
    loglike_implicit,
    loglike_parametric,
    partition_function,
    principal_minors,
)
from .models import CriticalPoint, DataVector, MinorVector, SymMatrix
from .monodromy import monodromy_solve, multistart_solve
from .settings import SolverSettings

__all__ = [
    "__version__",
    "CriticalPoint",
    "DataVector",
    "MinorVector",
    "SetPartition",
    "SolverSettings",
    "SubsetIndex",
    "SymMatrix",
    "assemble_decouplings",
    "count_critical_points",
    "enumerate_set_partitions",
    "gradient",
    "hessian",
    "loglike_implicit",
    "loglike_parametric",
    "monodromy_solve",
    "multistart_solve",
    "partition_function",
    "principal_minors",
    "solve_census",
]
