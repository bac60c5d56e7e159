"""
Data models for the DPP likelihood toolkit.

These models define the structure for matrices, data vectors, chart points,
critical points, solver runs and reports. Numeric payloads are numpy arrays;
complex scalars serialize as ``[re, im]`` pairs.
"""

from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_serializer,
    field_validator,
    model_validator,
)

from .combinatorics import (
    MAX_SUBSET_N,
    SetPartition,
    SubsetIndex,
    graded_masks,
    graded_positions,
    param_pairs,
)
from .exceptions import DimensionError, InvalidInputError, MissingMLDegreeError
from .settings import SolverSettings

Scalar = Union[float, complex]

SYMMETRY_TOL = 1e-12


# ============================================================================
# Array helpers
# ============================================================================


def decode_array(value: Any, ndim: int) -> np.ndarray:
    """Convert nested lists (complex entries as ``[re, im]``) to an array of rank ``ndim``."""
    if isinstance(value, np.ndarray) and value.ndim == ndim:
        arr = value
    else:
        try:
            arr = np.asarray(value)
        except (TypeError, ValueError) as e:
            raise InvalidInputError(f"Cannot read numeric array: {e}") from e
        if arr.ndim == ndim + 1 and arr.shape[-1] == 2 and not np.iscomplexobj(arr):
            arr = arr[..., 0].astype(float) + 1j * arr[..., 1].astype(float)
    if arr.ndim != ndim:
        raise InvalidInputError(f"Expected a {ndim}-dimensional array, got shape {arr.shape}")
    if arr.dtype.kind not in "biufc":
        raise InvalidInputError(f"Array entries must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(complex) if np.iscomplexobj(arr) else arr.astype(float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("Array entries must be finite")
    return arr


def encode_scalar(x: Scalar) -> Union[float, List[float]]:
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    return float(x)


def encode_array(arr: np.ndarray) -> list:
    """Nested lists for JSON; complex arrays become ``[re, im]`` leaves."""
    if np.iscomplexobj(arr):
        return np.stack([arr.real, arr.imag], axis=-1).tolist()
    return np.asarray(arr, dtype=float).tolist()


def pack_upper(matrix: np.ndarray) -> np.ndarray:
    """Upper-triangular entries (i <= j) in row-major parameter order."""
    n = matrix.shape[0]
    rows, cols = zip(*param_pairs(n))
    return matrix[list(rows), list(cols)]


def unpack_upper(n: int, values: np.ndarray) -> np.ndarray:
    """Symmetric matrix from parameter-order upper-triangular entries."""
    values = np.asarray(values)
    out = np.zeros((n, n), dtype=values.dtype)
    rows, cols = zip(*param_pairs(n))
    out[list(rows), list(cols)] = values
    out[list(cols), list(rows)] = values
    return out


# ============================================================================
# Enums
# ============================================================================


class Component(str, Enum):
    """Which part of the critical locus a census covers."""
    MAIN = "main"
    ALL = "all"


class CriticalKind(str, Enum):
    """Inertia of the parametric Hessian at a real critical point."""
    LOCAL_MAX = "local_max"
    SADDLE = "saddle"
    LOCAL_MIN = "local_min"
    DEGENERATE = "degenerate"


class StopReason(str, Enum):
    """Why a monodromy run stopped looping."""
    TARGET_COUNT_REACHED = "target_count_reached"
    STALL_LIMIT = "stall_limit"
    MAX_LOOPS = "max_loops"


class NewtonStatus(str, Enum):
    CERTIFIED = "certified"
    CONVERGED = "converged"


class Provenance(str, Enum):
    """Where an ML degree comes from."""
    EXACT = "exact"
    NUMERICAL = "numerical"
    USER = "user"


# ============================================================================
# Matrices and subset-indexed vectors
# ============================================================================


class SymMatrix(BaseModel):
    """Symmetric n x n matrix over the reals or the complexes."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    entries: np.ndarray = Field(..., description="Full n x n matrix")

    @field_validator("entries", mode="before")
    @classmethod
    def validate_entries(cls, v):
        """Require a finite square matrix, symmetric up to 1e-12 relative."""
        arr = decode_array(v, 2)
        n = arr.shape[0]
        if n < 1 or arr.shape != (n, n):
            raise InvalidInputError(f"Matrix must be square and nonempty, got shape {arr.shape}")
        if n > MAX_SUBSET_N:
            raise DimensionError(f"Matrix dimension {n} exceeds {MAX_SUBSET_N}")
        scale = max(1.0, float(np.max(np.abs(arr))))
        asym = float(np.max(np.abs(arr - arr.T)))
        if asym > SYMMETRY_TOL * scale:
            raise InvalidInputError(f"Matrix is not symmetric (max asymmetry {asym:.3e})")
        return (arr + arr.T) / 2

    @field_serializer("entries")
    def serialize_entries(self, entries: np.ndarray):
        return encode_array(entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_complex(self) -> bool:
        return bool(np.iscomplexobj(self.entries) and np.any(self.entries.imag != 0))

    def upper(self) -> np.ndarray:
        return pack_upper(self.entries)

    @classmethod
    def from_upper(cls, n: int, values: Sequence[Scalar]) -> "SymMatrix":
        return cls(entries=unpack_upper(n, np.asarray(values)))

    @classmethod
    def identity(cls, n: int) -> "SymMatrix":
        return cls(entries=np.eye(n))

    def submatrix(self, elements: Sequence[int]) -> np.ndarray:
        """Principal submatrix on one-based elements."""
        idx = [e - 1 for e in elements]
        return self.entries[np.ix_(idx, idx)]


class SubsetVector(BaseModel):
    """Vector indexed by the subsets of [n], stored in mask order."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(..., ge=1, le=MAX_SUBSET_N, description="Ground-set size")
    values: np.ndarray = Field(..., description="Entries in mask order")

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v):
        return decode_array(v, 1)

    @model_validator(mode="after")
    def validate_length(self):
        if self.values.shape[0] != 1 << self.n:
            raise InvalidInputError(
                f"Expected {1 << self.n} entries for n={self.n}, got {self.values.shape[0]}"
            )
        return self

    @field_serializer("values")
    def serialize_values(self, values: np.ndarray):
        return encode_array(values)

    @classmethod
    def from_graded(cls, n: int, entries: Sequence[Scalar]):
        """Build from entries listed in graded order (empty set first)."""
        if n < 1 or n > MAX_SUBSET_N:
            raise DimensionError(f"n must be in [1, {MAX_SUBSET_N}], got {n}")
        arr = decode_array(entries, 1)
        if arr.shape[0] != 1 << n:
            raise InvalidInputError(
                f"Expected {1 << n} graded entries for n={n}, got {arr.shape[0]}"
            )
        return cls(n=n, values=arr[list(graded_positions(n))])

    @classmethod
    def from_subset_dict(cls, n: int, mapping: Mapping[str, Any]):
        """Build from ``{"": 1, "1": 8, "13": 135, ...}``; absent subsets are zero."""
        if n < 1 or n > MAX_SUBSET_N:
            raise DimensionError(f"n must be in [1, {MAX_SUBSET_N}], got {n}")
        decoded = {}
        for key, raw in mapping.items():
            subset = SubsetIndex.from_label(str(key))
            if subset.mask >= 1 << n:
                raise InvalidInputError(f"Subset {key!r} is not a subset of [{n}]")
            if subset.mask in decoded:
                raise InvalidInputError(f"Subset {key!r} listed twice")
            decoded[subset.mask] = decode_array(raw, 0)[()] if isinstance(raw, list) else raw
        is_complex = any(isinstance(x, (complex, np.complexfloating)) for x in decoded.values())
        values = np.zeros(1 << n, dtype=complex if is_complex else float)
        for mask, x in decoded.items():
            values[mask] = x
        return cls(n=n, values=values)

    def graded(self) -> np.ndarray:
        return self.values[list(graded_masks(self.n))]

    def to_subset_dict(self) -> Dict[str, Any]:
        return {
            SubsetIndex(mask=m).label: encode_scalar(self.values[m]) for m in graded_masks(self.n)
        }

    @property
    def is_complex(self) -> bool:
        return bool(np.iscomplexobj(self.values) and np.any(self.values.imag != 0))

    def __getitem__(self, key: Union[SubsetIndex, int, str]) -> Scalar:
        if isinstance(key, SubsetIndex):
            mask = key.mask
        elif isinstance(key, str):
            mask = SubsetIndex.from_label(key).mask
        else:
            mask = int(key)
        return self.values[mask]


class DataVector(SubsetVector):
    """Counts u_I per subset; complex entries allowed for generic algebraic tests."""

    @model_validator(mode="after")
    def validate_counts(self):
        if not np.iscomplexobj(self.values) and np.any(self.values < 0):
            raise InvalidInputError("Real data vectors must be nonnegative")
        return self

    @property
    def total(self) -> Scalar:
        """Sample size |u|."""
        return self.values.sum()


class MinorVector(SubsetVector):
    """Unnormalized principal minors det(Theta_I), homogeneous coordinates p_I."""


# ============================================================================
# Birational chart
# ============================================================================


class ReparamPoint(BaseModel):
    """Chart coordinates: diagonal theta_ii and x_ij for i < j.

    ``x_1j = theta_1j^2`` and ``x_ij = theta_1i theta_1j theta_ij`` for i, j >= 2.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(..., ge=1, le=MAX_SUBSET_N)
    diag: np.ndarray = Field(..., description="theta_ii, i = 1..n")
    off: np.ndarray = Field(..., description="x_ij for i < j, row-major")

    @field_validator("diag", "off", mode="before")
    @classmethod
    def validate_arrays(cls, v):
        return decode_array(v, 1)

    @model_validator(mode="after")
    def validate_shapes(self):
        if self.diag.shape[0] != self.n or self.off.shape[0] != self.n * (self.n - 1) // 2:
            raise InvalidInputError(f"Chart point has wrong number of coordinates for n={self.n}")
        return self

    @field_serializer("diag", "off")
    def serialize_arrays(self, arr: np.ndarray):
        return encode_array(arr)

    def to_vector(self) -> np.ndarray:
        """Coordinates in parameter order: (i, i) -> theta_ii, (i, j) -> x_ij."""
        dtype = np.result_type(self.diag, self.off)
        out = np.empty(len(param_pairs(self.n)), dtype=dtype)
        k_off = 0
        for k, (i, j) in enumerate(param_pairs(self.n)):
            if i == j:
                out[k] = self.diag[i]
            else:
                out[k] = self.off[k_off]
                k_off += 1
        return out

    @classmethod
    def from_vector(cls, n: int, z: np.ndarray) -> "ReparamPoint":
        z = np.asarray(z)
        pairs = param_pairs(n)
        diag = np.array([z[k] for k, (i, j) in enumerate(pairs) if i == j])
        off = np.array([z[k] for k, (i, j) in enumerate(pairs) if i != j], dtype=z.dtype)
        return cls(n=n, diag=diag, off=off)


# ============================================================================
# Critical points and solver reports
# ============================================================================


class CriticalPoint(BaseModel):
    """A solved critical point with classification flags."""

    theta: SymMatrix
    chart: Optional[ReparamPoint] = Field(None, description="Chart coordinates, when defined")
    origin: SetPartition = Field(..., description="Block structure the point was assembled from")
    residual: float = Field(..., ge=0.0, description="Max-norm of the full parametric gradient")
    value: Optional[float] = Field(None, description="Real log-likelihood, when defined")
    is_real: bool = False
    is_real_minors: bool = False
    is_positive_definite: bool = False
    kind: Optional[CriticalKind] = None
    is_global_max: bool = False
    multiplicity: int = Field(1, ge=1)
    orbit_size: int = Field(1, ge=1, description="Sign-orbit members this entry stands for")
    accidental_zero: bool = False

    @field_serializer("origin")
    def serialize_origin(self, origin: SetPartition):
        return str(origin)

    @field_validator("origin", mode="before")
    @classmethod
    def parse_origin(cls, v):
        if isinstance(v, str):
            return SetPartition.parse(v)
        return v


class NewtonReport(BaseModel):
    iterations: int = Field(..., ge=0)
    status: NewtonStatus
    step_norm: float = Field(..., description="Last relative Newton step")
    residual: float = Field(..., description="Max-norm of the residual at the returned point")


class PathResult(BaseModel):
    """Outcome of one tracked path."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    end: np.ndarray
    steps: int
    rejected_steps: int = 0
    newton: Optional[NewtonReport] = None


class HomotopyRun(BaseModel):
    """Report of one monodromy run."""

    seed: int
    n: int
    block: Optional[str] = Field(None, description="Block the run solved, e.g. '123'")
    target: Optional[int] = Field(None, description="Known ML degree, if any")
    loops: int = 0
    solutions_found: int = 0
    stop_reason: Optional[StopReason] = None
    path_failures: int = 0
    failure_reasons: Dict[str, int] = Field(default_factory=dict)
    final_leg_failures: int = 0
    points: List[CriticalPoint] = Field(default_factory=list, exclude=True)

    @property
    def complete(self) -> bool:
        return self.target is None or len(self.points) >= self.target

    def record_failure(self, reason: str) -> None:
        self.path_failures += 1
        self.failure_reasons[reason] = self.failure_reasons.get(reason, 0) + 1


class MultistartReport(BaseModel):
    starts: int
    converged: int = 0
    failures: Dict[str, int] = Field(default_factory=dict)
    distinct: int = 0


# ============================================================================
# ML degrees and decouplings
# ============================================================================


class MLDegreeEntry(BaseModel):
    value: int = Field(..., ge=1)
    provenance: Provenance = Provenance.EXACT


class MLDegreeTable(BaseModel):
    """Known ML degrees mu_r of the DPP model on r elements."""

    model_config = ConfigDict(frozen=True)

    entries: Dict[int, MLDegreeEntry] = Field(default_factory=dict)

    @classmethod
    def default(cls) -> "MLDegreeTable":
        return cls(
            entries={
                1: MLDegreeEntry(value=1),
                2: MLDegreeEntry(value=1),
                3: MLDegreeEntry(value=13),
                4: MLDegreeEntry(value=3526, provenance=Provenance.NUMERICAL),
            }
        )

    def get(self, r: int) -> int:
        """mu_r.

        Raises:
            MissingMLDegreeError: If the table has no entry for r
        """
        if r not in self.entries:
            raise MissingMLDegreeError(f"No ML degree known for block size {r}")
        return self.entries[r].value

    def known(self, r: int) -> Optional[int]:
        entry = self.entries.get(r)
        return entry.value if entry else None

    def with_overrides(self, overrides: Mapping[int, int]) -> "MLDegreeTable":
        merged = dict(self.entries)
        for r, value in overrides.items():
            merged[int(r)] = MLDegreeEntry(value=int(value), provenance=Provenance.USER)
        return MLDegreeTable(entries=merged)


class BlockCriticalSet(BaseModel):
    """Critical points of the likelihood restricted to one block."""

    block: Tuple[int, ...] = Field(..., description="One-based elements of the block")
    points: List[SymMatrix] = Field(default_factory=list)
    multiplicities: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def fill_multiplicities(self):
        if not self.multiplicities:
            self.multiplicities = [1] * len(self.points)
        if len(self.multiplicities) != len(self.points):
            raise InvalidInputError("One multiplicity per block point is required")
        return self


class PartitionSummand(BaseModel):
    partition: str
    factors: List[int]
    value: int


class CountBreakdown(BaseModel):
    """Critical-point count as a sum over set partitions."""

    n: int
    total: int
    summands: List[PartitionSummand]
    provenance: Provenance = Provenance.EXACT


# ============================================================================
# Verification reports
# ============================================================================


class PointCertificate(BaseModel):
    index: int
    beta: float = Field(..., description="Norm of the Newton step")
    lipschitz: float = Field(..., description="Estimated Lipschitz constant of J^-1 J")
    h: float
    radius: Optional[float] = Field(None, description="Convergence-ball radius when certified")
    residual: float
    certified: bool
    reason: Optional[str] = None


class CertificationReport(BaseModel):
    certificates: List[PointCertificate]
    overlaps: List[Tuple[int, int]] = Field(default_factory=list)

    @property
    def certified_count(self) -> int:
        return sum(c.certified for c in self.certificates)

    @property
    def all_distinct(self) -> bool:
        return self.certified_count == len(self.certificates) and not self.overlaps


class RankReport(BaseModel):
    """Numerical rank of the 3 x 8 criticality matrix."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: np.ndarray
    singular_values: List[float]
    rank: int

    @field_serializer("matrix")
    def serialize_matrix(self, matrix: np.ndarray):
        return encode_array(matrix)

    @property
    def ratio(self) -> float:
        """Third singular value over the first."""
        s = self.singular_values
        return s[2] / s[0] if s[0] > 0 else 0.0


class ScreenReport(BaseModel):
    zero_coordinates: List[str] = Field(default_factory=list)
    zero_sum: bool = False
    flattening_ranks: List[int]

    @property
    def admissible(self) -> bool:
        return not self.zero_coordinates and not self.zero_sum


# ============================================================================
# Census and run configuration
# ============================================================================


class CensusResult(BaseModel):
    n: int
    data: DataVector
    component: Component
    seed: int
    points: List[CriticalPoint]
    summary: Dict[str, Any] = Field(default_factory=dict)
    runs: List[HomotopyRun] = Field(default_factory=list)

    @property
    def complete(self) -> bool:
        return all(run.complete for run in self.runs)


class RunConfig(BaseModel):
    """One CLI invocation."""

    command: str
    data_path: Optional[str] = None
    matrix_path: Optional[str] = None
    points_path: Optional[str] = None
    partition: Optional[str] = None
    component: Component = Component.MAIN
    n: Optional[int] = Field(None, ge=1)
    settings: SolverSettings = Field(default_factory=SolverSettings)
    ml_degrees: Dict[int, int] = Field(default_factory=dict)
    out_path: Optional[str] = None
    csv_path: Optional[str] = None

    @field_validator("partition")
    @classmethod
    def validate_partition(cls, v):
        """Reject partition strings that do not parse."""
        if v is not None:
            SetPartition.parse(v)
        return v
