"""
Monodromy solving over the likelihood correspondence, multistart Newton and
deduplication.

The seed pair comes from the linearity of the equations in the data: at a
random complex chart point z*, any u* in the kernel of A(z*) makes z* critical.
Loops are random triangles through u* on the affine slice u_empty = u*_empty.
The closing leg from u* to the target data runs in matrix coordinates so that
solutions on the chart boundary are tracked as regular points. All seeds share
one closing path per round; a round with lost or colliding paths is repeated
along a fresh path, and orbits still missing after that are harvested by loops
based at the target data.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .combinatorics import SetPartition
from .exceptions import DPPError, PathFailureError, StallWithoutTargetError
from .likelihood import canonical_representative, gradient_vector
from .models import (
    CriticalPoint,
    DataVector,
    HomotopyRun,
    MLDegreeTable,
    MultistartReport,
    ReparamPoint,
    StopReason,
    SymMatrix,
    pack_upper,
)
from .reparam import (
    ChartSystem,
    FixedDataSystem,
    ThetaSystem,
    chart_vector,
    matrix_from_chart,
)
from .settings import SolverSettings
from .tracker import LinearSegment, PathTracker, newton_refine

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Stage tags for per-path random streams
HARVEST = 0
CLOSING = 1
TARGET_LOOPS = 2

SUPPORT_TOL = 1e-8


def _complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


def _unit_phase(rng: np.random.Generator) -> complex:
    return complex(np.exp(2j * np.pi * rng.random()))


# ============================================================================
# Deduplication
# ============================================================================


def relative_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max-norm distance relative to 1 + the larger max-norm."""
    scale = 1.0 + max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def orbit_key(theta: np.ndarray) -> np.ndarray:
    """Upper entries of the canonical member of the sign orbit of ``theta``."""
    return pack_upper(canonical_representative(np.asarray(theta)))


def has_connected_support(theta: np.ndarray, tol: float = SUPPORT_TOL) -> bool:
    """Whether the graph of nonzero off-diagonal entries is connected.

    Main-component points of generic data are never block diagonal, so this
    separates them from partial decouplings.
    """
    theta = np.asarray(theta)
    scale = tol * (1.0 + float(np.max(np.abs(theta))))
    count, _ = connected_components((np.abs(theta) > scale).astype(int), directed=False)
    return count == 1


def deduplicate(
    points: Sequence[T],
    tol: float = 1e-8,
    coords: Optional[Callable[[T], np.ndarray]] = None,
    residual: Optional[Callable[[T], float]] = None,
) -> List[T]:
    """Merge points closer than ``tol`` (relative max-norm).

    Points are visited by increasing residual, so each representative is the
    lowest-residual member of its cluster.

    Args:
        points: Points or objects carrying coordinates
        tol: Relative merge distance
        coords: Coordinate accessor; identity by default
        residual: Residual accessor; all zero by default

    Returns:
        Distinct representatives
    """
    coords = coords or (lambda p: np.asarray(p))
    order = sorted(range(len(points)), key=lambda k: residual(points[k]) if residual else 0.0)
    kept: List[T] = []
    kept_coords: List[np.ndarray] = []
    for k in order:
        c = coords(points[k])
        if any(relative_distance(c, other) <= tol for other in kept_coords):
            continue
        kept.append(points[k])
        kept_coords.append(c)
    return kept


def cluster(
    points: Sequence[T], tol: float, coords: Optional[Callable[[T], np.ndarray]] = None
) -> List[List[int]]:
    """Indices of ``points`` grouped with the first earlier point within ``tol``."""
    coords = coords or (lambda p: np.asarray(p))
    groups: List[List[int]] = []
    anchors: List[np.ndarray] = []
    for k, point in enumerate(points):
        c = coords(point)
        for group, anchor in zip(groups, anchors):
            if relative_distance(c, anchor) <= tol:
                group.append(k)
                break
        else:
            groups.append([k])
            anchors.append(c)
    return groups


class SolutionStore:
    """Append-only set of solutions, safe for concurrent insertion.

    Two solutions count as one when their keys are within tolerance; the key
    is the solution itself unless ``key`` is given.
    """

    def __init__(self, tol: float, key: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.tol = tol
        self.key = key or (lambda z: z)
        self._points: List[np.ndarray] = []
        self._keys: List[np.ndarray] = []
        self._lock = threading.Lock()

    def add(self, z: np.ndarray) -> bool:
        """Insert ``z`` unless a stored point is within tolerance; True if new."""
        k = self.key(z)
        with self._lock:
            if any(relative_distance(k, other) <= self.tol for other in self._keys):
                return False
            self._points.append(np.array(z, dtype=complex))
            self._keys.append(k)
            return True

    def snapshot(self) -> List[np.ndarray]:
        with self._lock:
            return list(self._points)

    def __len__(self) -> int:
        with self._lock:
            return len(self._points)


# ============================================================================
# Seed pair
# ============================================================================


def random_symmetric(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = _complex_normal(rng, (n, n))
    return scale * ((a + a.T) / 2 + np.eye(n))


def seed_pair(
    n: int, rng: np.random.Generator, system: Optional[ChartSystem] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """A random chart point z* and data u* for which z* is critical.

    The data is a random complex combination of a kernel basis of A(z*),
    normalized to u*_empty = 1.
    """
    system = system or ChartSystem(n)
    z_star = chart_vector(random_symmetric(n, rng))
    kernel = scipy.linalg.null_space(system.kernel_map(z_star))
    u_star = kernel @ _complex_normal(rng, kernel.shape[1])
    u_star = u_star / u_star[0]
    logger.debug(f"Seed pair built, kernel dimension {kernel.shape[1]}")
    return z_star, u_star


# ============================================================================
# Monodromy
# ============================================================================


def _as_point(
    theta: np.ndarray, u: np.ndarray, origin: SetPartition, residual: Optional[float] = None
) -> CriticalPoint:
    n = theta.shape[0]
    matrix = SymMatrix(entries=theta)
    if residual is None:
        residual = float(np.max(np.abs(gradient_vector(theta, u))))
    return CriticalPoint(
        theta=matrix,
        chart=ReparamPoint.from_vector(n, chart_vector(theta)),
        origin=origin,
        residual=residual,
    )


class MonodromySolver:
    """Harvests main-component solutions by tracking known ones around loops."""

    def __init__(
        self,
        n: int,
        settings: Optional[SolverSettings] = None,
        target: Optional[int] = None,
    ):
        self.n = n
        self.settings = settings or SolverSettings()
        self.target = target
        self.chart = ChartSystem(n)
        self.theta = ThetaSystem(n)
        self.chart_tracker = PathTracker(self.chart, self.settings)
        self.theta_tracker = PathTracker(self.theta, self.settings)
        self._lock = threading.Lock()

    def _path_rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.settings.seed, *key]))

    def _map(self, work: Callable, items: list) -> list:
        if self.settings.workers > 1:
            with ThreadPoolExecutor(max_workers=self.settings.workers) as pool:
                return list(pool.map(work, items))
        return [work(item) for item in items]

    def theta_key(self, z: np.ndarray) -> np.ndarray:
        return orbit_key(self.theta.to_matrix(z))

    def on_main_component(self, z: np.ndarray) -> bool:
        return has_connected_support(self.theta.to_matrix(z))

    def _random_corner(self, rng: np.random.Generator, base: np.ndarray) -> np.ndarray:
        corner = _complex_normal(rng, base.shape[0]) * np.abs(base).mean()
        corner[0] = base[0]
        return corner

    def _run_loop(self, tracker: PathTracker, z: np.ndarray, base: np.ndarray, a: np.ndarray,
                  b: np.ndarray, key: Tuple[int, ...], run: HomotopyRun) -> Optional[np.ndarray]:
        """Track one solution around the triangle base -> a -> b -> base."""
        last_reason = "singular"
        size = np.abs(base).mean()
        for attempt in range(self.settings.path_retries + 1):
            rng = self._path_rng(*key, attempt)
            corners = [base, a, b, base]
            current = z
            try:
                for k in range(3):
                    bend = _complex_normal(rng, base.shape[0]) * size
                    bend[0] = 0.0
                    edge = LinearSegment(
                        start=corners[k], end=corners[k + 1], gamma=_unit_phase(rng), bend=bend
                    )
                    current = tracker.track(edge, current).end
                return current
            except PathFailureError as e:
                logger.debug(f"Loop path {key} attempt {attempt} failed: {e.reason}")
                last_reason = e.reason
        with self._lock:
            run.record_failure(last_reason)
        logger.warning(f"Loop path {key} lost after {self.settings.path_retries} retries")
        return None

    def _loops(
        self,
        tracker: PathTracker,
        store: SolutionStore,
        base: np.ndarray,
        rng: np.random.Generator,
        run: HomotopyRun,
        stage: int,
        goal: Optional[int],
        accept: Callable[[np.ndarray], bool] = lambda z: True,
    ) -> StopReason:
        """Loop at ``base`` until ``goal`` solutions are stored or a limit fires."""
        s = self.settings
        stall = 0
        loop = 0
        while True:
            if goal is not None and len(store) >= goal:
                return StopReason.TARGET_COUNT_REACHED
            if run.loops >= s.max_loops:
                return StopReason.MAX_LOOPS
            if stall >= s.stall_limit:
                return StopReason.STALL_LIMIT
            a = self._random_corner(rng, base)
            b = self._random_corner(rng, base)
            known = store.snapshot()

            def work(item):
                index, z = item
                if goal is not None and len(store) >= goal:
                    return False
                end = self._run_loop(tracker, z, base, a, b, (stage, loop, index), run)
                return end is not None and accept(end) and store.add(end)

            added = sum(self._map(work, list(enumerate(known))))
            run.loops += 1
            loop += 1
            stall = 0 if added else stall + 1
            logger.info(f"Loop {run.loops}: {added} new, {len(store)} known")

    def harvest(
        self, rng: np.random.Generator, run: HomotopyRun
    ) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Run loops at the seed data until a stop criterion fires."""
        z_star, u_star = seed_pair(self.n, rng, self.chart)
        store = SolutionStore(self.settings.dedup_tol)
        store.add(z_star)
        run.stop_reason = self._loops(
            self.chart_tracker, store, u_star, rng, run, HARVEST, self.target
        )
        logger.info(f"Monodromy stopped: {run.stop_reason.value} with {len(store)} solutions")
        return u_star, store.snapshot()

    def _closing_path(self, u_star: np.ndarray, u: np.ndarray, round_: int) -> LinearSegment:
        """The path shared by all seeds in one closing round."""
        rng = self._path_rng(CLOSING, round_)
        scale = np.linalg.norm(u) / np.linalg.norm(u_star)
        return LinearSegment(
            start=u_star * scale * _unit_phase(rng),
            end=u.astype(complex),
            gamma=_unit_phase(rng),
            bend=_complex_normal(rng, u.shape[0]) * np.abs(u).mean(),
        )

    def _close_one(
        self, path: LinearSegment, start: np.ndarray, index: int
    ) -> Tuple[Optional[np.ndarray], str]:
        try:
            end = self.theta_tracker.track(path, start).end
        except PathFailureError as e:
            logger.debug(f"Closing path {index} failed: {e.reason}")
            return None, e.reason
        if not self.on_main_component(end):
            return None, "off_component"
        return end, ""

    def close(self, u_star: np.ndarray, solutions: List[np.ndarray], u: np.ndarray,
              run: HomotopyRun) -> List[np.ndarray]:
        """Carry seed solutions to the target data in matrix coordinates.

        All seeds follow one common path, so distinct seeds reach distinct
        sign orbits. A round with lost paths or endpoints sharing an orbit is
        repeated along a fresh path, up to ``path_retries`` times, and the
        endpoints of every round are kept. When the rounds together miss some
        orbit, the losses and collisions of the last round are recorded as
        path failures.

        Returns:
            Endpoints in matrix coordinates, one per sign orbit reached
        """
        s = self.settings
        starts = [self.theta.from_matrix(matrix_from_chart(self.n, z)) for z in solutions]
        store = SolutionStore(s.dedup_tol, key=self.theta_key)
        failures: List[str] = []
        for round_ in range(s.path_retries + 1):
            path = self._closing_path(u_star, u, round_)
            results = self._map(
                lambda item: self._close_one(path, item[1], item[0]), list(enumerate(starts))
            )
            ends = [end for end, _ in results if end is not None]
            failures = [reason for end, reason in results if end is None]
            groups = cluster(ends, s.dedup_tol, coords=self.theta_key)
            failures += ["collision"] * sum(len(group) - 1 for group in groups)
            for end in ends:
                store.add(end)
            if not failures:
                break
            logger.info(f"Closing round {round_}: {len(failures)} paths lost or colliding")
        if len(store) < len(starts):
            with self._lock:
                for reason in failures:
                    run.final_leg_failures += 1
                    run.record_failure(reason)
            logger.warning(f"Closing leg reached {len(store)} of {len(starts)} seed orbits")
        return store.snapshot()

    def complete(
        self, u: np.ndarray, ends: List[np.ndarray], goal: int, rng: np.random.Generator,
        run: HomotopyRun
    ) -> Tuple[List[np.ndarray], Optional[StopReason]]:
        """Harvest missing target solutions with loops based at the target data.

        Returns:
            All known target solutions and the stop reason of the loops, or
            None when no loops were needed
        """
        store = SolutionStore(self.settings.dedup_tol, key=self.theta_key)
        for end in ends:
            store.add(end)
        if len(store) >= goal:
            return store.snapshot(), None
        logger.info(f"Closing leg reached {len(store)} of {goal} solutions, looping at the target")
        reason = self._loops(
            self.theta_tracker,
            store,
            u.astype(complex),
            rng,
            run,
            TARGET_LOOPS,
            goal,
            accept=self.on_main_component,
        )
        logger.info(f"Target loops stopped: {reason.value} with {len(store)} solutions")
        return store.snapshot(), reason


def monodromy_solve(
    u: DataVector,
    settings: Optional[SolverSettings] = None,
    table: Optional[MLDegreeTable] = None,
    require_target: bool = False,
    block: Optional[str] = None,
) -> HomotopyRun:
    """Main-component critical points of L_u by monodromy.

    The run reports ``target_count_reached`` only when the number of distinct
    points returned equals the known ML degree.

    Args:
        u: Target data vector
        settings: Solver settings
        table: ML degree table supplying the target count
        require_target: Raise instead of returning when the target is missed
        block: Label recorded in the run report

    Returns:
        Run report; ``run.points`` holds one critical point per sign orbit

    Raises:
        StallWithoutTargetError: If ``require_target`` and the known ML degree is not reached
    """
    settings = settings or SolverSettings()
    table = table or MLDegreeTable.default()
    target = table.known(u.n)
    run = HomotopyRun(seed=settings.seed, n=u.n, block=block, target=target)
    logger.info(f"Monodromy solve started: n={u.n}, target={target}, seed={settings.seed}")

    solver = MonodromySolver(u.n, settings, target)
    rng = np.random.default_rng(np.random.SeedSequence(settings.seed))
    u_star, seeds = solver.harvest(rng, run)
    ends = solver.close(u_star, seeds, u.values, run)
    goal = target if target is not None else len(seeds)
    ends, reason = solver.complete(u.values, ends, goal, rng, run)

    origin = SetPartition.trivial(u.n)
    candidates = []
    for z in ends:
        try:
            candidates.append(_as_point(solver.theta.to_matrix(z), u.values, origin))
        except DPPError as e:
            run.record_failure("singular")
            logger.warning(f"Dropping endpoint: {e}")
    points = deduplicate(
        candidates,
        settings.dedup_tol,
        coords=lambda p: orbit_key(p.theta.entries),
        residual=lambda p: p.residual,
    )
    accepted = settings.gradient_tol * (1.0 + abs(u.total))
    for p in points:
        if p.residual > accepted:
            logger.warning(f"Endpoint with large gradient residual {p.residual:.2e}")
    run.points = points
    run.solutions_found = len(points)

    if reason is not None and (target is not None or reason != StopReason.TARGET_COUNT_REACHED):
        run.stop_reason = reason
    if target is not None and len(points) < target:
        if run.stop_reason == StopReason.TARGET_COUNT_REACHED:
            run.stop_reason = (
                StopReason.MAX_LOOPS if run.loops >= settings.max_loops else StopReason.STALL_LIMIT
            )
    logger.info(f"Monodromy solve finished with {len(points)} solutions ({run.stop_reason.value})")
    if require_target and target is not None and len(points) < target:
        raise StallWithoutTargetError(
            f"Found {len(points)} of {target} solutions", found=len(points), expected=target
        )
    return run


# ============================================================================
# Multistart
# ============================================================================


def multistart_solve(
    u: DataVector,
    num_starts: Optional[int] = None,
    seed: Optional[int] = None,
    settings: Optional[SolverSettings] = None,
) -> Tuple[List[CriticalPoint], MultistartReport]:
    """Newton from random complex chart points, deduplicated.

    ``num_starts`` and ``seed`` default to ``settings.multistart_starts`` and
    ``settings.seed``.

    Returns:
        Distinct critical points and a per-start outcome report
    """
    settings = settings or SolverSettings()
    num_starts = settings.multistart_starts if num_starts is None else num_starts
    seed = settings.seed if seed is None else seed
    n = u.n
    system = FixedDataSystem(ChartSystem(n), u.values)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    empty = abs(u.values[0])
    scale = float(np.mean(np.abs(u.values[1 << np.arange(n)]))) / empty if empty else 1.0
    report = MultistartReport(starts=num_starts)
    found: List[np.ndarray] = []
    for k in range(num_starts):
        start = chart_vector(random_symmetric(n, rng, scale))
        try:
            z, _ = newton_refine(system, start, settings.residual_tol, settings.newton_max_iter)
        except DPPError as e:
            name = type(e).__name__
            report.failures[name] = report.failures.get(name, 0) + 1
            continue
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > settings.divergence_bound:
            report.failures["Divergence"] = report.failures.get("Divergence", 0) + 1
            continue
        report.converged += 1
        found.append(z)

    origin = SetPartition.trivial(n)
    candidates = []
    for z in deduplicate(found, settings.dedup_tol):
        try:
            theta = matrix_from_chart(n, z)
            candidates.append(_as_point(theta, u.values, origin))
        except DPPError as e:
            logger.debug(f"Multistart solution dropped: {e}")
    report.distinct = len(candidates)
    logger.info(
        f"Multistart: {report.converged}/{num_starts} converged, {report.distinct} distinct"
    )
    return candidates, report
