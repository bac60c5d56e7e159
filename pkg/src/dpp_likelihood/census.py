"""
Critical-point censuses: main component by monodromy, or every partial
decoupling assembled block by block, plus pandas-based tables and summaries.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .combinatorics import SetPartition, enumerate_set_partitions, param_pairs
from .classifier import classify, mark_global_maxima
from .decoupling import assemble_decouplings, count_critical_points
from .exceptions import MissingMLDegreeError
from .likelihood import sign_orbit
from .models import (
    BlockCriticalSet,
    CensusResult,
    Component,
    CriticalPoint,
    DataVector,
    HomotopyRun,
    MLDegreeTable,
    SymMatrix,
)
from .monodromy import monodromy_solve
from .settings import SolverSettings

logger = logging.getLogger(__name__)


class BlockMonodromySolver:
    """Per-block solver for blocks of size >= 3, expanding each solution's sign orbit."""

    def __init__(self, settings: SolverSettings, table: MLDegreeTable):
        self.settings = settings
        self.table = table
        self.runs: List[HomotopyRun] = []

    def __call__(self, v: DataVector, block: Sequence[int]) -> BlockCriticalSet:
        label = "".join(str(e) for e in block)
        run = monodromy_solve(v, self.settings, self.table, block=label)
        self.runs.append(run)
        matrices: List[SymMatrix] = []
        for point in run.points:
            matrices.extend(sign_orbit(point.theta))
        return BlockCriticalSet(block=tuple(block), points=matrices)


def _partition_rank(partitions: List[SetPartition]) -> Dict[str, int]:
    return {str(p): k for k, p in enumerate(partitions)}


def _sort_key(point: CriticalPoint, rank: Dict[str, int]):
    entries = point.theta.upper()
    flat = tuple(x for e in entries for x in (float(np.real(e)), float(np.imag(e))))
    value_key = (0, -point.value) if point.value is not None else (1, 0.0)
    return rank.get(str(point.origin), len(rank)), value_key, flat


def sort_points(points: List[CriticalPoint], n: int) -> List[CriticalPoint]:
    """Order by origin partition, value descending (undefined last), then entries."""
    rank = _partition_rank(enumerate_set_partitions(n))
    return sorted(points, key=lambda p: _sort_key(p, rank))


def solve_census(
    u: DataVector,
    component: Component = Component.MAIN,
    settings: Optional[SolverSettings] = None,
    table: Optional[MLDegreeTable] = None,
) -> CensusResult:
    """Solve and classify the critical points of L_u.

    Args:
        u: Data vector
        component: ``main`` for one representative per sign orbit of the
            main component, ``all`` for every parametric critical point over
            all partial decouplings
        settings: Solver settings
        table: ML degree table

    Returns:
        Sorted, classified points with a summary and the monodromy run reports
    """
    settings = settings or SolverSettings()
    table = table or MLDegreeTable.default()
    component = Component(component)
    logger.info(f"Census started: n={u.n}, component={component.value}")

    runs: List[HomotopyRun] = []
    if component == Component.MAIN:
        run = monodromy_solve(u, settings, table, block="".join(str(i) for i in range(1, u.n + 1)))
        runs.append(run)
        points = [p.model_copy(update={"orbit_size": len(sign_orbit(p.theta))}) for p in run.points]
    else:
        solver = BlockMonodromySolver(settings, table)
        cache: Dict[int, BlockCriticalSet] = {}
        points = []
        for partition in enumerate_set_partitions(u.n):
            points.extend(assemble_decouplings(u, partition, solver, cache))
        runs = solver.runs

    points = [classify(p, u, settings) for p in points]
    points = sort_points(mark_global_maxima(points), u.n)
    result = CensusResult(
        n=u.n,
        data=u,
        component=component,
        seed=settings.seed,
        points=points,
        runs=runs,
    )
    result.summary = census_summary(result, table)
    logger.info(f"Census finished with {len(points)} points")
    return result


# ============================================================================
# Tables
# ============================================================================


def census_frame(points: Sequence[CriticalPoint]) -> pd.DataFrame:
    """One row per point: origin, flags, value and the upper-triangular entries."""
    rows = []
    for p in points:
        row = {
            "origin": str(p.origin),
            "value": p.value,
            "residual": p.residual,
            "is_real": p.is_real,
            "is_real_minors": p.is_real_minors,
            "is_positive_definite": p.is_positive_definite,
            "kind": p.kind.value if p.kind else None,
            "is_global_max": p.is_global_max,
            "multiplicity": p.multiplicity,
            "orbit_size": p.orbit_size,
            "accidental_zero": p.accidental_zero,
        }
        for (i, j), x in zip(param_pairs(p.theta.n), p.theta.upper()):
            row[f"theta_{i + 1}{j + 1}"] = float(np.real(x))
            if not p.is_real:
                row[f"theta_{i + 1}{j + 1}_imag"] = float(np.imag(x))
        rows.append(row)
    return pd.DataFrame(rows)


def partition_summary(result: CensusResult, table: MLDegreeTable) -> pd.DataFrame:
    """Found versus expected counts per origin partition.

    Found counts include multiplicities. For the main component the expected
    count is the ML degree; otherwise it is the partition's summand in the
    critical-point count.
    """
    frame = census_frame(result.points)
    if frame.empty:
        found = pd.Series(dtype=int)
    else:
        found = frame.groupby("origin")["multiplicity"].sum()
    if result.component == Component.MAIN:
        label = str(SetPartition.trivial(result.n))
        expected = {label: table.known(result.n)}
    else:
        try:
            breakdown = count_critical_points(result.n, table)
            expected = {s.partition: s.value for s in breakdown.summands}
        except MissingMLDegreeError:
            expected = {str(p): None for p in enumerate_set_partitions(result.n)}
    summary = pd.DataFrame(
        {
            "partition": list(expected.keys()),
            "found": [int(found.get(k, 0)) for k in expected],
            "expected": [expected[k] for k in expected],
        }
    )
    summary["deviation"] = [
        not pd.isna(e) and f != e for f, e in zip(summary["found"], summary["expected"])
    ]
    return summary


def census_summary(result: CensusResult, table: MLDegreeTable) -> Dict:
    """Counts by flag plus the per-partition table, as plain JSON-ready values."""
    frame = census_frame(result.points)
    per_partition = partition_summary(result, table)
    deviations = per_partition[per_partition["deviation"]]
    for row in deviations.itertuples():
        logger.warning(f"Partition {row.partition}: found {row.found}, expected {row.expected}")
    if frame.empty:
        counts = dict.fromkeys(
            ["real", "real_minors", "positive_definite", "local_max", "global_max", "complex"], 0
        )
    else:
        counts = {
            "real": int(frame["is_real"].sum()),
            "real_minors": int(frame["is_real_minors"].sum()),
            "positive_definite": int(frame["is_positive_definite"].sum()),
            "local_max": int((frame["kind"] == "local_max").sum()),
            "global_max": int(frame["is_global_max"].sum()),
            "complex": int((~frame["is_real"]).sum()),
        }
    return {
        "total": len(result.points),
        **counts,
        "complete": result.complete,
        "partitions": [
            {
                "partition": row.partition,
                "found": int(row.found),
                "expected": None if pd.isna(row.expected) else int(row.expected),
                "deviation": bool(row.deviation),
            }
            for row in per_partition.itertuples()
        ],
    }
