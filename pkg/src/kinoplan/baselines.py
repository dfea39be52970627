"""Comparison planners: the sequential interleaved planner, a geometric
parallel search followed by one-shot post-optimization, and a parallel
bidirectional RRT whose path is post-optimized the same way.

The post-optimization starts from boundary-only constraints and, while the
result collides, pins the path waypoint nearest the deepest collision as an
interior equality constraint; with every waypoint pinned the system can be
over-constrained and the attempt is abandoned.
"""
from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bspline import basis_matrix
from .graph import Heuristic, LowDState, ProblemInstance
from .planner import (
    EXHAUSTED,
    SOLVED,
    PlannerConfig,
    PlanResult,
    PlanStats,
    _Planner,
    bfs_heuristic,
)
from .trajopt import Limits, OptimizerConfig, optimize, polyline_seed

__all__ = [
    "KinematicPath",
    "RRTConfig",
    "UNSOLVED",
    "insat_sequential",
    "search_then_optimize",
    "pbirrt",
    "pbirrt_then_optimize",
    "postprocess_iterative_waypoints",
]

UNSOLVED = "unsolved"


@dataclass(frozen=True)
class KinematicPath:
    """Ordered low-D waypoints from the start into the goal region."""

    waypoints: tuple[LowDState, ...]

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ValueError("path needs at least one waypoint")
        object.__setattr__(self, "waypoints", tuple(self.waypoints))

    @property
    def coords(self) -> np.ndarray:
        return np.vstack([w.coords for w in self.waypoints])


def insat_sequential(
    problem: ProblemInstance, cfg: PlannerConfig, heuristic: Heuristic | None = None
) -> PlanResult:
    """The interleaved planner pinned to a single expansion thread."""
    from .planner import plan

    return plan(problem, replace(cfg, thread_budget=1), heuristic)


# -- geometric search + one-shot post-optimization ---------------------------


def search_then_optimize(
    problem: ProblemInstance, cfg: PlannerConfig, heuristic: Heuristic | None = None
) -> PlanResult:
    """Parallel edge search on Euclidean costs, then a single post-optimization
    of the resulting waypoint path.  Fails when either stage fails."""
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
        path = KinematicPath((problem.start,))
    else:
        engine = _Planner(problem, cfg, heuristic, geometric=True)
        engine.run()
        if engine.status != SOLVED:
            wall = time.perf_counter() - t1
            stats = PlanStats(
                engine.expansions,
                engine.evaluations,
                0,
                wall,
                heuristic_time,
                tuple(engine.expansion_order),
            )
            return PlanResult(engine.status, None, math.inf, None, stats)
        path = KinematicPath(tuple(engine.result_path()))
    traj, opt_calls = postprocess_iterative_waypoints(
        path, problem.limits, problem.world, cfg.optimizer, count_calls=True
    )
    wall = time.perf_counter() - t1
    if problem.goal.contains(problem.start):
        expansions = evaluations = 0
        order: tuple = ()
    else:
        expansions, evaluations = engine.expansions, engine.evaluations
        order = tuple(engine.expansion_order)
    stats = PlanStats(expansions, evaluations, opt_calls, wall, heuristic_time, order)
    if traj is None:
        return PlanResult(UNSOLVED, None, math.inf, None, stats)
    return PlanResult(SOLVED, traj, traj.cost, path.waypoints[-1], stats)


def _collision_runs(points: np.ndarray, world) -> list[tuple[int, int]]:
    """Maximal index runs of colliding samples along a sampled curve."""
    hit = np.array([not world.point_free(p) for p in points])
    runs = []
    i = 0
    n = len(hit)
    while i < n:
        if hit[i]:
            j = i
            while j + 1 < n and hit[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def _deepest_collision_sample(points: np.ndarray, world) -> Optional[np.ndarray]:
    """Midpoint of the longest colliding run: the sample needing the longest
    excursion along the curve to reach free space on either side."""
    runs = _collision_runs(points, world)
    if not runs:
        return None
    i, j = max(runs, key=lambda r: r[1] - r[0])
    return points[(i + j) // 2]


def postprocess_iterative_waypoints(
    path: KinematicPath,
    limits: Limits,
    world,
    cfg: OptimizerConfig,
    count_calls: bool = False,
):
    """Spline-fit a waypoint path, adding interior pins until collision-free.

    The first solve constrains only the boundary states (straight-line
    seed).  Each failed round pins the (not yet pinned) waypoint nearest the
    deepest collision of the failed curve to the control point closest to
    the waypoint's position along the path, re-seeds from the path polyline,
    and re-solves.  Returns the trajectory or None (plus the optimizer-call
    count when requested).
    """
    W = path.coords
    m = W.shape[0]
    calls = 0

    def done(result):
        return (result, calls) if count_calls else result

    if m == 1:
        calls += 1
        sol = optimize(W[0], W[0], limits, world, cfg)
        return done(sol if sol.feasible else None)

    seg = np.linalg.norm(np.diff(W, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    frac = arc / arc[-1] if arc[-1] > 0 else np.linspace(0.0, 1.0, m)
    n = max(cfg.num_ctrl, cfg.degree + 1, m + 2)
    solve_cfg = replace(cfg, num_ctrl=n)

    pinned: set[int] = set()
    while True:
        pins = {}
        for w in sorted(pinned):
            idx = int(round(frac[w] * (n - 1)))
            idx = min(max(idx, 1), n - 2)
            while idx in pins and idx < n - 2:
                idx += 1
            if idx not in pins:
                pins[idx] = W[w]
        calls += 1
        init = polyline_seed(W, limits, solve_cfg) if pinned else None
        sol = optimize(W[0], W[-1], limits, world, solve_cfg, init=init, pins=pins or None)
        if sol.feasible:
            return done(sol)
        # Locate the deepest collision on the failed curve and pin the
        # nearest unpinned interior waypoint.
        basis = basis_matrix(
            sol.curve.knots, np.linspace(0.0, 1.0, 20 * cfg.validation_samples)
        )
        pts = basis @ np.asarray(sol.curve.control_points)
        deep = _deepest_collision_sample(pts, world)
        candidates = [w for w in range(1, m - 1) if w not in pinned]
        if deep is None or not candidates:
            return done(None)
        nearest = min(candidates, key=lambda w: float(np.linalg.norm(W[w] - deep)))
        pinned.add(nearest)


# -- parallel bidirectional RRT ----------------------------------------------


@dataclass(frozen=True)
class RRTConfig:
    """Sampling parameters for the bidirectional tree planner."""

    step_size: float = 0.5
    max_samples: int = 5000
    goal_bias: float = 0.1
    seed: int = 0
    thread_budget: int = 1
    timeout: Optional[float] = None

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise ValueError("step size must be positive")
        if self.max_samples < 1:
            raise ValueError("sample budget must be positive")
        if not 0.0 <= self.goal_bias < 1.0:
            raise ValueError("goal bias must lie in [0, 1)")
        if self.thread_budget < 1:
            raise ValueError("thread budget must be at least 1")


class _Tree:
    __slots__ = ("nodes", "parents")

    def __init__(self, root: np.ndarray):
        self.nodes = [np.asarray(root, dtype=float)]
        self.parents = [-1]

    def add(self, point: np.ndarray, parent: int) -> int:
        self.nodes.append(np.asarray(point, dtype=float))
        self.parents.append(parent)
        return len(self.nodes) - 1

    def path_to_root(self, idx: int) -> list[np.ndarray]:
        out = []
        while idx >= 0:
            out.append(self.nodes[idx])
            idx = self.parents[idx]
        return out


def _nearest(nodes: list[np.ndarray], point: np.ndarray) -> int:
    arr = np.vstack(nodes)
    return int(np.argmin(np.sum((arr - point) ** 2, axis=1)))


def _steer(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    d = b - a
    dist = float(np.linalg.norm(d))
    if dist <= step:
        return b
    return a + d * (step / dist)


def pbirrt(problem: ProblemInstance, cfg: RRTConfig) -> Optional[KinematicPath]:
    """Bidirectional RRT-Connect with shared trees grown by worker threads.

    Workers snapshot the trees under a lock, steer and collision-check
    outside it, and commit extensions under the lock.  A connect attempt
    follows every successful extension; the first connecting pair of nodes
    yields the returned path.  Deterministic for a single worker.
    """
    lo, hi = problem.bounds.lower, problem.bounds.upper
    start = np.asarray(problem.start.coords, dtype=float)
    goal = np.asarray(problem.goal.center, dtype=float)
    trees = (_Tree(start), _Tree(goal))
    lock = threading.Lock()
    state = {"samples": 0, "bridge": None, "done": False}
    deadline = None if cfg.timeout is None else time.monotonic() + cfg.timeout

    def worker(worker_id: int) -> None:
        rng = np.random.default_rng((cfg.seed, worker_id))
        side = 0
        while True:
            with lock:
                if state["done"] or state["samples"] >= cfg.max_samples:
                    return
                state["samples"] += 1
                nodes_a = list(trees[side].nodes)
                nodes_b = list(trees[1 - side].nodes)
            if deadline is not None and time.monotonic() > deadline:
                return
            if rng.random() < cfg.goal_bias:
                target = goal if side == 0 else start
            else:
                target = rng.uniform(lo, hi)
            near_a = _nearest(nodes_a, target)
            new_pt = _steer(nodes_a[near_a], target, cfg.step_size)
            if not problem.world.segment_free(nodes_a[near_a], new_pt):
                side = 1 - side
                continue
            near_b = _nearest(nodes_b, new_pt)
            bridged = (
                float(np.linalg.norm(nodes_b[near_b] - new_pt)) <= cfg.step_size
                and problem.world.segment_free(nodes_b[near_b], new_pt)
            )
            with lock:
                if state["done"]:
                    return
                new_idx = trees[side].add(new_pt, near_a)
                if bridged and near_b < len(trees[1 - side].nodes):
                    state["bridge"] = (side, new_idx, near_b)
                    state["done"] = True
                    return
            side = 1 - side

    threads = [
        threading.Thread(target=worker, args=(i,), daemon=True)
        for i in range(cfg.thread_budget)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    bridge = state["bridge"]
    if bridge is None:
        return None
    side, idx_a, idx_b = bridge
    half_a = trees[side].path_to_root(idx_a)[::-1]
    half_b = trees[1 - side].path_to_root(idx_b)
    pts = half_a + half_b
    if side == 1:
        pts = pts[::-1]
    waypoints = [
        LowDState(p, tuple(float(round(v, 9)) for v in p)) for p in pts
    ]
    # Drop consecutive duplicates introduced by exact bridging.
    deduped = [waypoints[0]]
    for w in waypoints[1:]:
        if not np.allclose(w.coords, deduped[-1].coords, atol=1e-12):
            deduped.append(w)
    return KinematicPath(tuple(deduped))


def pbirrt_then_optimize(
    problem: ProblemInstance, cfg: PlannerConfig, rrt_cfg: RRTConfig
) -> PlanResult:
    """Bidirectional RRT path finding followed by the waypoint post-optimizer."""
    t1 = time.perf_counter()
    path = pbirrt(problem, rrt_cfg)
    if path is None:
        wall = time.perf_counter() - t1
        stats = PlanStats(0, 0, 0, wall, 0.0, ())
        return PlanResult(EXHAUSTED, None, math.inf, None, stats)
    traj, calls = postprocess_iterative_waypoints(
        path, problem.limits, problem.world, cfg.optimizer, count_calls=True
    )
    wall = time.perf_counter() - t1
    stats = PlanStats(0, len(path.waypoints), calls, wall, 0.0, ())
    if traj is None:
        return PlanResult(UNSOLVED, None, math.inf, None, stats)
    return PlanResult(SOLVED, traj, traj.cost, path.waypoints[-1], stats)
