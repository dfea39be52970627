"""Interleaved parallel planner: an edge-queue best-first search over the
low-dimensional lattice whose edge evaluations are full-dimensional spline
optimizations.

The search loop pops (state, action) edges from a priority queue and hands
them to expansion workers.  A state's outgoing edges first enter the queue
as a single dummy edge; expanding the dummy inserts the real edges.  Real
edge expansion generates the low-D successor, then lifts the edge to a
full-D start-rooted trajectory by trying ever-shorter shortcuts from the
ancestors of the edge's source (warm-started from the stored prefix), with
a fixed-duration convex existence check plus a high-order tunnel solve as
the last resort.  All bookkeeping lives behind one lock with a change
notification; optimization runs outside it against immutable snapshots.

With a thread budget of one the machinery degenerates to a deterministic
sequential planner (the hand-off waits for the single worker to go idle),
which is exactly the sequential baseline.
"""
from __future__ import annotations

import heapq
import itertools
import math
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .bspline import BSplineCurve, clamped_knots
from .graph import (
    DUMMY_ACTION,
    LINE_OF_SIGHT_GOAL,
    UNIT_MOVE,
    ActionPrimitive,
    Heuristic,
    LowDState,
    ProblemInstance,
    bfs_heuristic,
    canonical_state,
)
from .trajopt import (
    CONVERGED,
    OptimizerConfig,
    TrajectorySolution,
    make_edge_tunnel,
    optimize,
    polyline_seed,
    solve_relaxation,
    warm_optimize,
)

__all__ = [
    "PlannerConfig",
    "PlanResult",
    "PlanStats",
    "SOLVED",
    "EXHAUSTED",
    "TIMEOUT",
    "plan",
    "repair_schedule",
    "generate_trajectory",
]

SOLVED = "solved"
EXHAUSTED = "exhausted"
TIMEOUT = "timeout"

GOAL_ACTION = ActionPrimitive("goal_los", LINE_OF_SIGHT_GOAL)


@dataclass(frozen=True)
class PlannerConfig:
    """Search weights, thread budget, and optimizer settings."""

    thread_budget: int = 1
    w_h: float = 2.0
    timeout: Optional[float] = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    tunnel_half_width: float = 1.0
    fallback_degree: Optional[int] = None  # tunnel-restricted retry order
    repair_retries: int = 1
    heuristic_scale: float = 1.0

    def __post_init__(self):
        if self.thread_budget < 1:
            raise ValueError("thread budget must be at least 1")
        if self.w_h < 1.0:
            raise ValueError("heuristic weight must be >= 1")


@dataclass(frozen=True)
class PlanStats:
    expansions: int
    evaluations: int
    optimizer_calls: int
    wall_time: float
    heuristic_time: float
    expansion_order: tuple[tuple[tuple, str], ...]


@dataclass(frozen=True)
class PlanResult:
    status: str
    trajectory: Optional[TrajectorySolution]
    cost: float
    goal_state: Optional[LowDState]
    stats: PlanStats

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


class _SearchState:
    __slots__ = ("state", "g", "h", "parent", "traj", "n_generated", "in_be", "in_closed")

    def __init__(self, state: LowDState, h: float):
        self.state = state
        self.g = math.inf
        self.h = h
        self.parent: Optional[LowDState] = None
        self.traj: Optional[TrajectorySolution] = None
        self.n_generated = 0
        self.in_be = False
        self.in_closed = False


def repair_schedule(base: OptimizerConfig, retries: int) -> list[OptimizerConfig]:
    """Escalating solver configurations for the retry phase.

    Attempt 0 is the base configuration; each retry doubles the outer
    iteration budget and the validation sampling density.
    """
    if retries < 0:
        raise ValueError("retries must be non-negative")
    out = [base]
    for i in range(1, retries + 1):
        out.append(
            replace(
                base,
                max_iters=base.max_iters * 2**i,
                validation_samples=base.validation_samples * 2**i,
            )
        )
    return out


def _perturbed_init(
    x1: np.ndarray, x2: np.ndarray, cfg: OptimizerConfig, limits, attempt: int
) -> TrajectorySolution:
    """Deterministically jittered straight-line warm start for retries."""
    n = max(cfg.num_ctrl, cfg.degree + 1)
    P = np.linspace(x1, x2, n)
    seed = abs(hash((tuple(np.round(x1, 9)), tuple(np.round(x2, 9)), attempt))) % 2**32
    rng = np.random.default_rng(seed)
    scale = 0.1 * max(float(np.linalg.norm(x2 - x1)), 1.0)
    P[1:-1] += rng.normal(0.0, scale, size=P[1:-1].shape)
    curve = BSplineCurve(clamped_knots(cfg.degree, n), P)
    T0 = min(max(limits.t_min, float(np.linalg.norm(x2 - x1)) / float(np.max(limits.bound(1)))), limits.t_max)
    return TrajectorySolution(curve, T0, math.inf, CONVERGED)


def _optimize_with_repair(x1, x2, limits, world, base_cfg, retries, counter):
    sol = None
    for attempt, cfg in enumerate(repair_schedule(base_cfg, retries)):
        init = None if attempt == 0 else _perturbed_init(
            np.atleast_1d(np.asarray(x1, dtype=float)),
            np.atleast_1d(np.asarray(x2, dtype=float)),
            cfg,
            limits,
            attempt,
        )
        counter[0] += 1
        sol = optimize(x1, x2, limits, world, cfg, init=init)
        if sol.feasible:
            return sol
    return sol


class _IntersectionWorld:
    """Free iff free in both constituents (world restricted to a tunnel)."""

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def point_free(self, point) -> bool:
        return self.a.point_free(point) and self.b.point_free(point)

    def segment_free(self, p, q) -> bool:
        return self.a.segment_free(p, q) and self.b.segment_free(p, q)


def generate_trajectory(
    ancestors: Sequence[tuple[np.ndarray, Optional[TrajectorySolution]]],
    target: np.ndarray,
    limits,
    world,
    cfg: PlannerConfig,
) -> tuple[Optional[TrajectorySolution], int]:
    """Lift one low-D edge to a start-rooted full-D trajectory.

    `ancestors` lists (coords, start-rooted trajectory) from the start state
    to the edge's source, in that order; the start entry may carry None.
    Each ancestor is tried as a shortcut origin; the first collision-free
    incremental piece is warm-combined with the stored prefix.  When every
    ancestor fails, the source-to-target edge gets a fixed-duration convex
    existence check inside its tunnel and, if one exists, a high-order
    tunnel-restricted solve.

    Returns (trajectory or None, shortcut origin index, optimizer calls);
    the origin index points into `ancestors`.
    """
    counter = [0]
    opt_cfg = cfg.optimizer
    last = len(ancestors) - 1
    for idx, (coords, prefix) in enumerate(ancestors):
        piece = _optimize_with_repair(
            coords, target, limits, world, opt_cfg, cfg.repair_retries, counter
        )
        if piece.feasible:
            if idx == 0 or prefix is None:
                return piece, idx, counter[0]
            counter[0] += 1
            full = warm_optimize(prefix, piece, limits, world, opt_cfg)
            if full.feasible:
                return full, idx, counter[0]
            continue
        if idx == last:
            tunnel = make_edge_tunnel(coords, target, cfg.tunnel_half_width)
            inside = _IntersectionWorld(world, tunnel)
            counter[0] += 1
            existence = solve_relaxation(coords, target, limits, inside, opt_cfg)
            if existence is None:
                break
            degree = cfg.fallback_degree or opt_cfg.degree
            k_cfg = replace(
                opt_cfg,
                degree=degree,
                num_ctrl=max(opt_cfg.num_ctrl, degree + 1),
            )
            # The existence certificate seeds the solve only when its
            # control count still supports the (possibly higher) order.
            seed = existence if len(existence.curve.control_points) >= degree + 1 else None
            counter[0] += 1
            piece = optimize(coords, target, limits, inside, k_cfg, init=seed)
            if not piece.feasible:
                break
            if prefix is None:
                return piece, idx, counter[0]
            counter[0] += 1
            full = warm_optimize(prefix, piece, limits, world, opt_cfg)
            if full.feasible:
                return full, idx, counter[0]
            break
    # Last resort: one fresh start-rooted solve seeded along the whole
    # ancestor polyline.  Warm-combining accumulates duration slack piece by
    # piece, which can overrun a tight duration cap that a single solve over
    # the full path still fits.
    if last >= 1:
        waypoints = np.vstack([c for c, _ in ancestors] + [target])
        n = max(opt_cfg.num_ctrl, opt_cfg.degree + 1, len(waypoints) + 2)
        seed_cfg = replace(opt_cfg, num_ctrl=min(n, opt_cfg.max_ctrl))
        seed = polyline_seed(waypoints, limits, seed_cfg)
        counter[0] += 1
        full = optimize(waypoints[0], target, limits, world, seed_cfg, init=seed)
        if full.feasible:
            return full, 0, counter[0]
    return None, last, counter[0]


class _Planner:
    """Edge-queue engine.  In geometric mode edges are priced by Euclidean
    length and no trajectories are attached (used by the search-then-optimize
    baseline); otherwise every edge evaluation runs the spline optimizer."""

    def __init__(
        self,
        problem: ProblemInstance,
        cfg: PlannerConfig,
        heuristic: Heuristic,
        geometric: bool = False,
    ):
        self.problem = problem
        self.cfg = cfg
        self.h = heuristic
        self.geometric = geometric
        self.result_cost = math.inf
        self.lock = threading.Lock()
        self.cv = threading.Condition(self.lock)
        self.states: dict[tuple, _SearchState] = {}
        self.open_heap: list = []
        self.open_best: dict[tuple, tuple] = {}  # edge id -> live heap token
        self.seq = itertools.count()
        self.pending: Optional[tuple] = None
        self.workers: list[threading.Thread] = []
        self.idle = 0
        self.busy = 0
        self.terminate = False
        self.error: Optional[BaseException] = None
        self.result_traj: Optional[TrajectorySolution] = None
        self.result_state: Optional[LowDState] = None
        self.status = EXHAUSTED
        self.expansions = 0
        self.evaluations = 0
        self.optimizer_calls = 0
        self.expansion_order: list[tuple[tuple, str]] = []
        self.deadline = None if cfg.timeout is None else time.monotonic() + cfg.timeout
        goal = canonical_state(problem.goal.center, problem.resolution)
        if not problem.goal.contains(goal):
            c = problem.goal.center
            goal = LowDState(c, tuple(float(round(v, 9)) for v in c))
        self.goal_state = goal
        self.real_actions = tuple(problem.actions) + (GOAL_ACTION,)

    # -- bookkeeping (lock held) ------------------------------------------

    def _lookup(self, state: LowDState) -> _SearchState:
        rec = self.states.get(state.key)
        if rec is None:
            rec = _SearchState(state, self.h(state))
            self.states[state.key] = rec
        return rec

    def _push_edge(self, state: LowDState, action: ActionPrimitive, f: float, g: float):
        token = (f, g, next(self.seq))
        edge_id = (state.key, action.name)
        self.open_best[edge_id] = token
        heapq.heappush(self.open_heap, (*token, state.key, action))

    def _pop_min(self):
        while self.open_heap:
            f, g, seq, key, action = self.open_heap[0]
            edge_id = (key, action.name)
            if self.open_best.get(edge_id) != (f, g, seq):
                heapq.heappop(self.open_heap)  # stale entry
                continue
            heapq.heappop(self.open_heap)
            del self.open_best[edge_id]
            return key, action
        return None

    def _be_nonempty(self) -> bool:
        return any(rec.in_be for rec in self.states.values())

    def _timed_out(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    # -- coordinator --------------------------------------------------------

    def run(self) -> None:
        start_rec = self._lookup(self.problem.start)
        start_rec.g = 0.0
        start_rec.traj = None
        with self.cv:
            self._push_edge(
                self.problem.start, DUMMY_ACTION, self.cfg.w_h * start_rec.h, 0.0
            )
            while not self.terminate:
                if self._timed_out():
                    self.status = TIMEOUT
                    break
                # Hand-off slot free and a worker available (or spawnable)?
                if self.pending is not None or (
                    self.idle == 0 and len(self.workers) >= self.cfg.thread_budget
                ):
                    self.cv.wait(timeout=0.05)
                    continue
                popped = self._pop_min()
                if popped is None:
                    if self.busy == 0 and self.pending is None and not self._be_nonempty():
                        self.status = EXHAUSTED
                        break
                    self.cv.wait(timeout=0.05)
                    continue
                key, action = popped
                rec = self.states[key]
                if self.problem.goal.contains(rec.state):
                    self.status = SOLVED
                    self.result_traj = rec.traj
                    self.result_state = rec.state
                    self.result_cost = rec.g
                    break
                if self.idle == 0 and len(self.workers) < self.cfg.thread_budget:
                    worker = threading.Thread(target=self._worker_loop, daemon=True)
                    self.workers.append(worker)
                    worker.start()
                self.pending = (key, action)
                self.cv.notify_all()
            self.terminate = True
            self.cv.notify_all()
        for worker in self.workers:
            worker.join()

    # -- workers ------------------------------------------------------------

    def _worker_loop(self) -> None:
        while True:
            with self.cv:
                self.idle += 1
                self.cv.notify_all()
                while self.pending is None and not self.terminate:
                    self.cv.wait()
                if self.terminate:
                    self.idle -= 1
                    return
                key, action = self.pending
                self.pending = None
                self.idle -= 1
                self.busy += 1
                self.expansions += 1
                self.expansion_order.append((key, action.name))
                self.cv.notify_all()
            try:
                self._expand(key, action)
            except BaseException as exc:  # surface worker crashes to plan()
                with self.cv:
                    self.error = exc
                    self.terminate = True
            finally:
                with self.cv:
                    self.busy -= 1
                    self.cv.notify_all()

    def _expand(self, key: tuple, action: ActionPrimitive) -> None:
        if action.kind == "dummy":
            with self.cv:
                rec = self.states[key]
                rec.in_be = True
                f = rec.g + self.cfg.w_h * rec.h
                for real in self.real_actions:
                    self._push_edge(rec.state, real, f, rec.g)
                self.cv.notify_all()
            return
        self._expand_real(key, action)

    def _successor_of(self, state: LowDState, action: ActionPrimitive) -> Optional[LowDState]:
        problem = self.problem
        if action.kind == UNIT_MOVE:
            nxt = state.coords + action.delta
            if not problem.bounds.contains(nxt):
                return None
            if not problem.world.segment_free(state.coords, nxt):
                return None
            return canonical_state(nxt, problem.resolution)
        if action.kind == LINE_OF_SIGHT_GOAL:
            goal = self.goal_state
            if goal == state:
                return None
            if not problem.world.segment_free(state.coords, goal.coords):
                return None
            return goal
        return None

    def _bump_counter(self, rec: _SearchState) -> None:
        rec.n_generated += 1
        if rec.n_generated == len(self.real_actions) and rec.in_be:
            rec.in_be = False
            rec.in_closed = True

    def _expand_real(self, key: tuple, action: ActionPrimitive) -> None:
        with self.cv:
            rec = self.states[key]
            state = rec.state
            g_src = rec.g
            self.evaluations += 1
        succ = self._successor_of(state, action)
        if succ is None:
            with self.cv:
                self._bump_counter(rec)
                self.cv.notify_all()
            return
        with self.cv:
            srec = self._lookup(succ)
            if srec.in_closed or srec.in_be:
                self._bump_counter(rec)
                self.cv.notify_all()
                return
            chain_states, ancestors = self._ancestors_snapshot(rec)
        if self.geometric:
            traj = None
            cost = g_src + float(np.linalg.norm(succ.coords - state.coords))
            parent = state
            calls = 0
            improved = True
        else:
            traj, origin, calls = generate_trajectory(
                ancestors, succ.coords, self.problem.limits, self.problem.world, self.cfg
            )
            improved = traj is not None and traj.feasible
            cost = traj.cost if improved else math.inf
            parent = chain_states[origin] if improved else state
        with self.cv:
            self.optimizer_calls += calls
            if improved:
                srec = self._lookup(succ)
                if not (srec.in_closed or srec.in_be) and cost < srec.g - 1e-9:
                    srec.g = cost
                    srec.parent = parent
                    srec.traj = traj
                    self._push_edge(succ, DUMMY_ACTION, cost + self.cfg.w_h * srec.h, cost)
            self._bump_counter(rec)
            self.cv.notify_all()

    def result_path(self) -> list[LowDState]:
        """Parent-chain waypoints from the start to the solved goal state."""
        if self.status != SOLVED or self.result_state is None:
            return []
        out = []
        cur = self.states.get(self.result_state.key)
        seen = set()
        while cur is not None and cur.state.key not in seen:
            seen.add(cur.state.key)
            out.append(cur.state)
            cur = self.states.get(cur.parent.key) if cur.parent is not None else None
        out.reverse()
        return out

    def _ancestors_snapshot(self, rec: _SearchState):
        """Parent chain from the start to rec: states plus immutable
        (coords, start-rooted trajectory) pairs for the optimizer."""
        states: list[LowDState] = []
        chain = []
        cur: Optional[_SearchState] = rec
        seen = set()
        while cur is not None and cur.state.key not in seen:
            seen.add(cur.state.key)
            states.append(cur.state)
            chain.append((np.array(cur.state.coords), cur.traj))
            cur = self.states.get(cur.parent.key) if cur.parent is not None else None
        states.reverse()
        chain.reverse()
        return states, chain


def _zero_trajectory(problem: ProblemInstance, cfg: PlannerConfig) -> TrajectorySolution:
    return optimize(
        problem.start.coords,
        problem.start.coords,
        problem.limits,
        problem.world,
        cfg.optimizer,
    )


def plan(
    problem: ProblemInstance,
    cfg: PlannerConfig,
    heuristic: Heuristic | None = None,
) -> PlanResult:
    """Run the interleaved search; see the module docstring for the contract."""
    t0 = time.perf_counter()
    if heuristic is None:
        heuristic = bfs_heuristic(
            problem.goal,
            problem.world,
            problem.bounds,
            problem.resolution,
            cfg.heuristic_scale,
        )
    heuristic_time = time.perf_counter() - t0

    t1 = time.perf_counter()
    if problem.goal.contains(problem.start):
        traj = _zero_trajectory(problem, cfg)
        stats = PlanStats(0, 0, 1, time.perf_counter() - t1, heuristic_time, ())
        return PlanResult(SOLVED, traj, traj.cost, problem.start, stats)

    engine = _Planner(problem, cfg, heuristic)
    engine.run()
    if engine.error is not None:
        raise engine.error
    wall = time.perf_counter() - t1
    stats = PlanStats(
        engine.expansions,
        engine.evaluations,
        engine.optimizer_calls,
        wall,
        heuristic_time,
        tuple(engine.expansion_order),
    )
    traj = engine.result_traj
    cost = engine.result_cost if engine.status == SOLVED else math.inf
    return PlanResult(engine.status, traj, cost, engine.result_state, stats)
