"""
Subsets, set partitions and Bell numbers.

Subsets of [n] = {1, ..., n} are stored as bit masks: bit i-1 is set iff
element i belongs to the subset. Vectors indexed by subsets are kept in mask
order internally and converted to the graded order (by size, then
lexicographically) only for I/O.
"""

import logging
from functools import lru_cache
from typing import Iterator, List, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import (
    BellOverflowError,
    DimensionError,
    EmptyBlockError,
    InvalidInputError,
)

logger = logging.getLogger(__name__)

MAX_SUBSET_N = 16
MAX_PARTITION_N = 10
MAX_BELL_N = 20


def _check_n(n: int, upper: int) -> None:
    if not isinstance(n, int) or n < 1 or n > upper:
        raise DimensionError(f"n must be an integer in [1, {upper}], got {n!r}")


# ============================================================================
# Subsets
# ============================================================================


def mask_elements(mask: int) -> Tuple[int, ...]:
    """Zero-based elements of a bit mask, ascending."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def mask_of(elements: Sequence[int]) -> int:
    """Bit mask of one-based elements."""
    mask = 0
    for e in elements:
        mask |= 1 << (e - 1)
    return mask


class SubsetIndex(BaseModel):
    """A subset of [n] identified by its bit mask."""

    model_config = ConfigDict(frozen=True)

    mask: int = Field(..., ge=0, description="Bit i-1 set iff element i is in the subset")

    @property
    def elements(self) -> Tuple[int, ...]:
        """One-based elements, ascending."""
        return tuple(i + 1 for i in mask_elements(self.mask))

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")

    @property
    def label(self) -> str:
        """Compact label, e.g. ``"13"``; the empty set is ``""``."""
        elems = self.elements
        sep = "" if all(e < 10 for e in elems) else ","
        return sep.join(str(e) for e in elems)

    @classmethod
    def from_elements(cls, elements: Sequence[int]) -> "SubsetIndex":
        if any(e < 1 for e in elements):
            raise InvalidInputError(f"Subset elements must be >= 1, got {list(elements)}")
        return cls(mask=mask_of(elements))

    @classmethod
    def from_label(cls, label: str) -> "SubsetIndex":
        label = label.strip()
        if not label or label in ("{}", "0"):
            return cls(mask=0)
        parts = label.split(",") if "," in label else list(label)
        try:
            return cls.from_elements([int(p) for p in parts])
        except ValueError as e:
            raise InvalidInputError(f"Cannot parse subset label {label!r}") from e

    def __str__(self) -> str:
        return "{" + self.label + "}"


@lru_cache(maxsize=None)
def graded_masks(n: int) -> Tuple[int, ...]:
    """All masks of [n] in graded order."""
    _check_n(n, MAX_SUBSET_N)
    return tuple(sorted(range(1 << n), key=lambda m: (bin(m).count("1"), mask_elements(m))))


@lru_cache(maxsize=None)
def graded_positions(n: int) -> Tuple[int, ...]:
    """Inverse of :func:`graded_masks`: position of each mask in graded order."""
    order = graded_masks(n)
    pos = [0] * len(order)
    for k, m in enumerate(order):
        pos[m] = k
    return tuple(pos)


def canonical_order(n: int) -> List[SubsetIndex]:
    """Subsets of [n] in graded order.

    Args:
        n: Ground-set size, 1 <= n <= 16

    Returns:
        The 2^n subsets, the empty set first and [n] last

    Raises:
        DimensionError: If n is out of range
    """
    return [SubsetIndex(mask=m) for m in graded_masks(n)]


@lru_cache(maxsize=None)
def param_pairs(n: int) -> Tuple[Tuple[int, int], ...]:
    """Zero-based upper-triangular index pairs (i <= j), row-major."""
    return tuple((i, j) for i in range(n) for j in range(i, n))


def num_params(n: int) -> int:
    return n * (n + 1) // 2


# ============================================================================
# Set partitions
# ============================================================================


class SetPartition(BaseModel):
    """A set partition of [n] with blocks in canonical order.

    Each block is sorted ascending and blocks are ordered by their minimum
    element, so equal partitions compare equal.
    """

    model_config = ConfigDict(frozen=True)

    blocks: Tuple[Tuple[int, ...], ...] = Field(..., description="Disjoint blocks covering [n]")

    @field_validator("blocks")
    @classmethod
    def validate_blocks(cls, v):
        if not v:
            raise EmptyBlockError("A set partition needs at least one block")
        blocks = []
        seen = set()
        for block in v:
            if len(block) == 0:
                raise EmptyBlockError("Set partition blocks must be nonempty")
            for e in block:
                if e < 1:
                    raise InvalidInputError(f"Partition elements must be >= 1, got {e}")
                if e in seen:
                    raise InvalidInputError(f"Element {e} appears in more than one block")
                seen.add(e)
            blocks.append(tuple(sorted(block)))
        n = max(seen)
        if seen != set(range(1, n + 1)):
            missing = sorted(set(range(1, n + 1)) - seen)
            raise InvalidInputError(f"Blocks do not cover [{n}]; missing {missing}")
        return tuple(sorted(blocks, key=lambda b: b[0]))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def is_trivial(self) -> bool:
        """True for the one-block partition {[n]}."""
        return len(self.blocks) == 1

    @property
    def block_masks(self) -> Tuple[int, ...]:
        return tuple(mask_of(b) for b in self.blocks)

    @property
    def block_sizes(self) -> Tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def block_of(self, element: int) -> int:
        """Index of the block containing a one-based element."""
        for k, block in enumerate(self.blocks):
            if element in block:
                return k
        raise InvalidInputError(f"Element {element} is not in [{self.n}]")

    def restricted_growth_string(self) -> Tuple[int, ...]:
        return tuple(self.block_of(e) for e in range(1, self.n + 1))

    @classmethod
    def parse(cls, text: str) -> "SetPartition":
        """Parse ``"12|3"`` (or ``"1,2|3"`` when n > 9) into a partition.

        Raises:
            InvalidInputError: On malformed text or blocks that do not cover [n]
        """
        text = text.strip()
        if not text:
            raise InvalidInputError("Empty partition string")
        blocks = []
        for part in text.split("|"):
            part = part.strip()
            if not part:
                raise EmptyBlockError(f"Empty block in partition {text!r}")
            tokens = part.split(",") if "," in part else list(part)
            try:
                blocks.append(tuple(int(t) for t in tokens))
            except ValueError as e:
                raise InvalidInputError(f"Cannot parse partition {text!r}") from e
        try:
            return cls(blocks=tuple(blocks))
        except ValidationError as e:
            raise InvalidInputError(f"Invalid partition {text!r}: {e.errors()[0]['msg']}") from e

    @classmethod
    def trivial(cls, n: int) -> "SetPartition":
        """The one-block partition {[n]}."""
        return cls(blocks=(tuple(range(1, n + 1)),))

    @classmethod
    def singletons(cls, n: int) -> "SetPartition":
        return cls(blocks=tuple((i,) for i in range(1, n + 1)))

    def __str__(self) -> str:
        sep = "" if self.n < 10 else ","
        return "|".join(sep.join(str(e) for e in b) for b in self.blocks)


def _restricted_growth_strings(n: int) -> Iterator[Tuple[int, ...]]:
    """Restricted growth strings of length n in lexicographic order."""
    a = [0] * n
    maxima = [0] * n
    while True:
        yield tuple(a)
        i = n - 1
        while i > 0 and a[i] > maxima[i - 1]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        maxima[i] = max(maxima[i - 1], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            maxima[j] = maxima[i]


def enumerate_set_partitions(n: int) -> List[SetPartition]:
    """All set partitions of [n], finest first.

    Partitions are ordered by number of blocks, descending, and within the
    same block count by their restricted growth string.

    Raises:
        DimensionError: If n is out of range
    """
    _check_n(n, MAX_PARTITION_N)
    partitions = []
    for rgs in _restricted_growth_strings(n):
        k = max(rgs) + 1
        blocks = [[] for _ in range(k)]
        for element, b in enumerate(rgs, start=1):
            blocks[b].append(element)
        partitions.append((k, rgs, SetPartition(blocks=tuple(tuple(b) for b in blocks))))
    partitions.sort(key=lambda item: (-item[0], item[1]))
    logger.debug(f"Enumerated {len(partitions)} set partitions of [{n}]")
    return [p for _, _, p in partitions]


def bell_number(n: int) -> int:
    """Number of set partitions of [n], via the Bell triangle.

    Raises:
        DimensionError: If n < 1
        BellOverflowError: If n > 20
    """
    if isinstance(n, int) and n > MAX_BELL_N:
        raise BellOverflowError(f"Bell numbers are supported up to n={MAX_BELL_N}, got {n}")
    _check_n(n, MAX_BELL_N)
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for value in row:
            nxt.append(nxt[-1] + value)
        row = nxt
    return row[-1]
