"""
Partial decouplings: critical points whose matrix is a direct sum of blocks.

For a set partition of [n], the likelihood of a block-diagonal matrix splits
into a sum of block likelihoods, each evaluated at the data restricted to
that block. Blocks of size 1 and 2 have closed forms; larger blocks go to a
numerical solver supplied by the caller.
"""

import logging
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .combinatorics import (
    SetPartition,
    bell_number,
    enumerate_set_partitions,
    mask_of,
)
from .exceptions import (
    DPPError,
    EmptyBlockError,
    InputError,
    InvalidInputError,
    ZeroDenominatorError,
)
from .likelihood import gradient_vector
from .models import (
    BlockCriticalSet,
    CountBreakdown,
    CriticalPoint,
    DataVector,
    MLDegreeTable,
    PartitionSummand,
    Provenance,
    SymMatrix,
)

logger = logging.getLogger(__name__)

BlockSolver = Callable[[DataVector, Sequence[int]], BlockCriticalSet]

DEGENERATE_RADICAND = 1e-12


def restrict_data(u: DataVector, block: Sequence[int]) -> DataVector:
    """Marginal data on a block: v_J = sum of u_I over I with I cap block = J.

    Elements of the block are relabeled 1..k in ascending order.

    Raises:
        EmptyBlockError: If the block is empty
        InvalidInputError: If the block is not a subset of [n]
    """
    block = sorted(block)
    if not block:
        raise EmptyBlockError("Cannot restrict data to an empty block")
    if block[0] < 1 or block[-1] > u.n or len(set(block)) != len(block):
        raise InvalidInputError(f"Block {block} is not a subset of [{u.n}]")
    masks = np.arange(1 << u.n)
    local = np.zeros_like(masks)
    for k, e in enumerate(block):
        local |= ((masks >> (e - 1)) & 1) << k
    v = np.zeros(1 << len(block), dtype=u.values.dtype)
    np.add.at(v, local, u.values)
    return DataVector(n=len(block), values=v)


def block1_mle(v: DataVector):
    """theta = v_{i} / v_empty, the unique critical point on one element.

    Raises:
        ZeroDenominatorError: If v_empty = 0
    """
    if v.n != 1:
        raise InvalidInputError(f"Expected data on one element, got n={v.n}")
    if v.values[0] == 0:
        raise ZeroDenominatorError("v_empty = 0 in the one-element estimate")
    return v.values[1] / v.values[0]


def block2_mle(v: DataVector, block: Sequence[int] = (1, 2)) -> BlockCriticalSet:
    """The two critical matrices on two elements.

    theta_ii = v_i / v_empty, theta_jj = v_j / v_empty and
    theta_ij = +-sqrt(v_i v_j - v_empty v_ij) / v_empty, with a complex root
    when the radicand is negative. A vanishing radicand gives a single
    matrix of multiplicity 2.

    Raises:
        ZeroDenominatorError: If v_empty = 0
    """
    if v.n != 2:
        raise InvalidInputError(f"Expected data on two elements, got n={v.n}")
    v0, vi, vj, vij = v.values[0], v.values[1], v.values[2], v.values[3]
    if v0 == 0:
        raise ZeroDenominatorError("v_empty = 0 in the two-element estimate")
    radicand = vi * vj - v0 * vij
    diag = (vi / v0, vj / v0)
    if abs(radicand) <= DEGENERATE_RADICAND * (abs(vi * vj) + abs(v0 * vij)):
        matrix = SymMatrix(entries=np.array([[diag[0], 0.0], [0.0, diag[1]]]))
        logger.debug(f"Degenerate radicand on block {tuple(block)}")
        return BlockCriticalSet(block=tuple(block), points=[matrix], multiplicities=[2])
    root = np.emath.sqrt(radicand) / v0
    points = [
        SymMatrix(entries=np.array([[diag[0], sign * root], [sign * root, diag[1]]]))
        for sign in (1.0, -1.0)
    ]
    return BlockCriticalSet(block=tuple(block), points=points)


def block_critical_set(
    u: DataVector, block: Sequence[int], solver: Optional[BlockSolver] = None
) -> BlockCriticalSet:
    """Critical set of the likelihood restricted to one block."""
    v = restrict_data(u, block)
    block = tuple(sorted(block))
    if len(block) == 1:
        theta = block1_mle(v)
        return BlockCriticalSet(block=block, points=[SymMatrix(entries=[[theta]])])
    if len(block) == 2:
        return block2_mle(v, block)
    if solver is None:
        raise InputError(f"Block {block} needs a numerical solver")
    return solver(v, block)


def direct_sum(
    n: int, blocks: Sequence[Sequence[int]], matrices: Sequence[np.ndarray]
) -> np.ndarray:
    """Block-diagonal n x n matrix with each block placed on its elements."""
    dtype = np.result_type(*matrices)
    out = np.zeros((n, n), dtype=dtype)
    for block, m in zip(blocks, matrices):
        idx = [e - 1 for e in block]
        out[np.ix_(idx, idx)] = m
    return out


def assemble_decouplings(
    u: DataVector,
    partition: SetPartition,
    solver: Optional[BlockSolver] = None,
    cache: Optional[Dict[int, BlockCriticalSet]] = None,
) -> List[CriticalPoint]:
    """Critical points that are direct sums over the blocks of a partition.

    Args:
        u: Data vector on [n]
        partition: Block structure
        solver: Per-block solver for blocks of size >= 3
        cache: Block critical sets keyed by block mask, reused across partitions

    Returns:
        One point per combination of block critical points

    Raises:
        InvalidInputError: If the partition is not a partition of [n]
    """
    if partition.n != u.n:
        raise InvalidInputError(f"Partition {partition} is not a partition of [{u.n}]")
    cache = cache if cache is not None else {}
    sets = []
    for block in partition.blocks:
        key = mask_of(block)
        if key not in cache:
            cache[key] = block_critical_set(u, block, solver)
        sets.append(cache[key])

    points = []
    for combo in product(*(range(len(s.points)) for s in sets)):
        matrices = [s.points[k].entries for s, k in zip(sets, combo)]
        multiplicity = int(np.prod([s.multiplicities[k] for s, k in zip(sets, combo)]))
        theta = direct_sum(u.n, partition.blocks, matrices)
        try:
            residual = float(np.max(np.abs(gradient_vector(theta, u.values))))
        except DPPError as e:
            logger.warning(f"Gradient undefined at assembled point for {partition}: {e}")
            residual = float("inf")
        points.append(
            CriticalPoint(
                theta=SymMatrix(entries=theta),
                origin=partition,
                residual=residual,
                multiplicity=multiplicity,
            )
        )
    logger.debug(f"Assembled {len(points)} points for partition {partition}")
    return points


def count_critical_points(n: int, table: Optional[MLDegreeTable] = None) -> CountBreakdown:
    """Sum over set partitions of prod_i 2^(|block_i| - 1) mu_|block_i|.

    Raises:
        MissingMLDegreeError: If some block size has no known ML degree
        DimensionError: If n is out of range
    """
    table = table or MLDegreeTable.default()
    partitions = enumerate_set_partitions(n)
    summands = []
    for partition in partitions:
        factors = [2 ** (r - 1) * table.get(r) for r in partition.block_sizes]
        summands.append(
            PartitionSummand(partition=str(partition), factors=factors, value=int(np.prod(factors)))
        )
    provenance = Provenance.EXACT
    for r in range(1, n + 1):
        entry = table.entries.get(r)
        if entry is not None and entry.provenance != Provenance.EXACT:
            provenance = entry.provenance
    total = sum(s.value for s in summands)
    logger.info(f"Critical point count for n={n}: {total} over {bell_number(n)} partitions")
    return CountBreakdown(n=n, total=total, summands=summands, provenance=provenance)
