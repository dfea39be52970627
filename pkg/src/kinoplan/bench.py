"""Benchmark harness: seeded problem-suite generation on a chambered bar
world, planner execution across thread budgets, Table-style aggregation, and
file serialization (suite, line-delimited records, summary, trajectories).

All formats carry a kind tag and a version number.  Suite generation and
single-thread runs are byte-reproducible under a fixed seed.
"""
from __future__ import annotations

import json
import math
import os
import time
import traceback
from dataclasses import asdict, dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .baselines import (
    RRTConfig,
    insat_sequential,
    pbirrt_then_optimize,
    search_then_optimize,
)
from .bspline import Box, KnotVector, BSplineCurve
from .graph import (
    GoalRegion,
    ProblemInstance,
    canonical_state,
    unit_move_actions,
)
from .planner import SOLVED, PlannerConfig, PlanResult, bfs_heuristic, plan
from .trajopt import (
    Limits,
    OptimizerConfig,
    TrajectorySolution,
    check_feasibility,
    compute_kmin,
    make_edge_tunnel,
)
from .worlds import DiscObstacle, RectObstacle, World2D, point2d_world

__all__ = [
    "FORMAT_VERSION",
    "SuiteSpec",
    "BenchmarkRecord",
    "PLANNERS",
    "sample_suite",
    "chamber_id",
    "run_suite",
    "aggregate",
    "write_suite",
    "load_suite",
    "write_records",
    "read_records",
    "write_summary",
    "validate_records",
    "compute_domain_kmin",
    "problem_to_dict",
    "problem_from_dict",
]

FORMAT_VERSION = 1
SUITE_KIND = "kinoplan-suite"
RECORDS_KIND = "kinoplan-records"
SUMMARY_KIND = "kinoplan-summary"
TRAJ_KIND = "kinoplan-trajectory"


@dataclass(frozen=True)
class SuiteSpec:
    """Seeded description of a problem suite; the seed fully determines it."""

    domain: str = "bars2d"
    n_problems: int = 10
    seed: int = 0
    budgets: tuple[int, ...] = (1,)
    timeout: float = 60.0
    extent: float = 6.0
    n_bars: int = 2
    bar_width: float = 0.5
    gap_height: float = 2.0
    resolution: float = 1.0
    step_magnitudes: tuple[float, ...] = (1.0,)
    vel_limit: float = 2.0
    acc_limit: float = 8.0
    t_min: float = 1.0
    t_max: float = 30.0
    duration_factor: Optional[float] = None
    sample_budget: int = 4000

    def __post_init__(self):
        if self.domain != "bars2d":
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.n_problems < 0:
            raise ValueError("problem count must be non-negative")
        if self.n_bars < 1 or self.extent <= 2.0:
            raise ValueError("need at least one bar inside a usable extent")
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        object.__setattr__(
            self, "step_magnitudes", tuple(float(m) for m in self.step_magnitudes)
        )

    def base_limits(self) -> Limits:
        return Limits(
            (
                np.full(2, self.vel_limit),
                np.full(2, self.acc_limit),
            ),
            self.t_min,
            self.t_max,
        )


def _bar_centers(spec: SuiteSpec) -> list[float]:
    """Bar x-positions snapped off the lattice so cell centers stay free."""
    span = 2.0 * spec.extent
    centers = []
    for i in range(spec.n_bars):
        raw = -spec.extent + (i + 1) * span / (spec.n_bars + 1)
        snapped = math.floor(raw) + 0.5
        centers.append(snapped)
    return centers


def _bar_world(spec: SuiteSpec, rng: np.random.Generator) -> tuple[World2D, list[float]]:
    """Vertical bars with one seeded gap each; returns world and bar centers."""
    lo, hi = -spec.extent, spec.extent
    half = spec.bar_width / 2.0
    obstacles = []
    for cx in _bar_centers(spec):
        gap_c = float(rng.uniform(lo + spec.gap_height, hi - spec.gap_height))
        g0, g1 = gap_c - spec.gap_height / 2.0, gap_c + spec.gap_height / 2.0
        obstacles.append(RectObstacle([cx - half, lo], [cx + half, g0]))
        obstacles.append(RectObstacle([cx - half, g1], [cx + half, hi]))
    bounds = Box(np.array([lo, lo]), np.array([hi, hi]))
    return point2d_world(obstacles, bounds), _bar_centers(spec)


def chamber_id(x: float, bar_centers: Sequence[float]) -> int:
    """Index of the bar-delimited chamber containing the x coordinate."""
    return sum(1 for c in bar_centers if c < x)


def free_space_min_duration(
    world, bounds: Box, resolution: float, start, goal, vel: float
) -> float:
    """Kinematic minimum duration: shortest free grid path at top speed.

    Dijkstra over the 8-connected cell grid with Euclidean step costs gives
    an octile upper bound on the free-space geodesic; dividing by the speed
    cap yields the fastest duration any planner could certify.  Returns inf
    when the goal cell is unreachable.
    """
    import heapq

    start = np.atleast_1d(np.asarray(start, dtype=float))
    goal = np.atleast_1d(np.asarray(goal, dtype=float))
    lo = bounds.lower
    shape = tuple(
        int(math.floor((bounds.upper[d] - lo[d]) / resolution + 1e-9)) + 1
        for d in range(2)
    )

    def cell(p):
        return tuple(int(round((p[d] - lo[d]) / resolution)) for d in range(2))

    def center(c):
        return lo + np.asarray(c, dtype=float) * resolution

    src, dst = cell(start), cell(goal)
    dist = {src: 0.0}
    heap = [(0.0, src)]
    while heap:
        d, c = heapq.heappop(heap)
        if c == dst:
            return d / vel
        if d > dist.get(c, math.inf):
            continue
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nxt = (c[0] + dx, c[1] + dy)
                if not (0 <= nxt[0] < shape[0] and 0 <= nxt[1] < shape[1]):
                    continue
                if not world.point_free(center(nxt)):
                    continue
                nd = d + resolution * math.hypot(dx, dy)
                if nd < dist.get(nxt, math.inf):
                    dist[nxt] = nd
                    heapq.heappush(heap, (nd, nxt))
    return math.inf


def sample_suite(spec: SuiteSpec) -> list[ProblemInstance]:
    """Seeded start/goal pairs on the lattice, straddling at least one bar."""
    rng = np.random.default_rng(spec.seed)
    world, centers = _bar_world(spec, rng)
    bounds = world.bounds
    limits = spec.base_limits()
    actions = tuple(unit_move_actions(2, spec.step_magnitudes))
    lattice = np.arange(
        -spec.extent + spec.resolution, spec.extent, spec.resolution
    )
    problems = []
    attempts = 0
    while len(problems) < spec.n_problems:
        if attempts >= spec.sample_budget:
            raise RuntimeError(
                f"sampling budget exhausted after {attempts} attempts; "
                "the separation rule may be over-constrained"
            )
        attempts += 1
        s = np.array([rng.choice(lattice), rng.choice(lattice)])
        g = np.array([rng.choice(lattice), rng.choice(lattice)])
        if chamber_id(s[0], centers) == chamber_id(g[0], centers):
            continue
        if not (world.point_free(s) and world.point_free(g)):
            continue
        prob_limits = limits
        if spec.duration_factor is not None:
            # Duration cap relative to the free-space kinematic minimum,
            # i.e. the fastest traversal of the shortest collision-free path.
            d_min = free_space_min_duration(
                world, bounds, spec.resolution, s, g, spec.vel_limit
            )
            if not math.isfinite(d_min):
                continue
            t_cap = max(spec.duration_factor * d_min, spec.t_min)
            prob_limits = limits.with_duration(t_max=t_cap)
        problems.append(
            ProblemInstance(
                start=canonical_state(s, spec.resolution),
                goal=GoalRegion(g),
                world=world,
                limits=prob_limits,
                bounds=bounds,
                actions=actions,
                resolution=spec.resolution,
                name=f"{spec.domain}-{spec.seed}-{len(problems):04d}",
            )
        )
    return problems


# -- serialization ------------------------------------------------------------


def _obstacle_to_dict(ob) -> dict:
    if isinstance(ob, RectObstacle):
        return {"type": "rect", "lower": ob.lower.tolist(), "upper": ob.upper.tolist()}
    if isinstance(ob, DiscObstacle):
        return {"type": "disc", "center": ob.center.tolist(), "radius": ob.radius}
    raise TypeError(f"unsupported obstacle {type(ob).__name__}")


def _obstacle_from_dict(d: dict):
    if d["type"] == "rect":
        return RectObstacle(d["lower"], d["upper"])
    if d["type"] == "disc":
        return DiscObstacle(d["center"], d["radius"])
    raise ValueError(f"unknown obstacle type {d['type']!r}")


def problem_to_dict(problem: ProblemInstance) -> dict:
    magnitudes = sorted(
        {float(np.max(np.abs(a.delta))) for a in problem.actions if a.delta is not None}
    )
    return {
        "name": problem.name,
        "resolution": problem.resolution,
        "start": problem.start.coords.tolist(),
        "goal": {
            "center": problem.goal.center.tolist(),
            "tolerance": problem.goal.tolerance,
        },
        "bounds": {
            "lower": problem.bounds.lower.tolist(),
            "upper": problem.bounds.upper.tolist(),
        },
        "limits": {
            "deriv_limits": [l.tolist() for l in problem.limits.deriv_limits],
            "t_min": problem.limits.t_min,
            "t_max": problem.limits.t_max,
        },
        "actions": {"magnitudes": magnitudes},
        "world": {
            "type": "point2d",
            "obstacles": [_obstacle_to_dict(ob) for ob in problem.world.obstacles],
        },
    }


def problem_from_dict(d: dict) -> ProblemInstance:
    if d["world"]["type"] != "point2d":
        raise ValueError(f"unknown world type {d['world']['type']!r}")
    bounds = Box(np.array(d["bounds"]["lower"]), np.array(d["bounds"]["upper"]))
    world = point2d_world(
        [_obstacle_from_dict(ob) for ob in d["world"]["obstacles"]], bounds
    )
    limits = Limits(
        tuple(np.array(l) for l in d["limits"]["deriv_limits"]),
        d["limits"]["t_min"],
        d["limits"]["t_max"],
    )
    dim = len(d["start"])
    return ProblemInstance(
        start=canonical_state(d["start"], d["resolution"]),
        goal=GoalRegion(np.array(d["goal"]["center"]), d["goal"]["tolerance"]),
        world=world,
        limits=limits,
        bounds=bounds,
        actions=tuple(unit_move_actions(dim, d["actions"]["magnitudes"])),
        resolution=d["resolution"],
        name=d["name"],
    )


def write_suite(path: str, spec: SuiteSpec, problems: Sequence[ProblemInstance]) -> None:
    doc = {
        "kind": SUITE_KIND,
        "version": FORMAT_VERSION,
        "spec": asdict(spec),
        "problems": [problem_to_dict(p) for p in problems],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_suite(path: str) -> tuple[SuiteSpec, list[ProblemInstance]]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != SUITE_KIND:
        raise ValueError(f"{path}: not a suite file")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported suite version {doc.get('version')}")
    spec_d = dict(doc["spec"])
    spec_d["budgets"] = tuple(spec_d["budgets"])
    spec_d["step_magnitudes"] = tuple(spec_d["step_magnitudes"])
    spec = SuiteSpec(**spec_d)
    return spec, [problem_from_dict(p) for p in doc["problems"]]


# -- execution ----------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkRecord:
    """Outcome of one (problem, planner, budget) run."""

    problem: str
    planner: str
    budget: int
    success: bool
    wall_time: float
    cost: float
    optimizer_calls: int
    expansions: int
    status: str
    trajectory_file: Optional[str] = None

    def __post_init__(self):
        if self.success and not math.isfinite(self.cost):
            raise ValueError("successful record must carry a finite cost")
        if self.success and self.trajectory_file is None:
            raise ValueError("successful record must reference its trajectory")

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(d["cost"]):
            d["cost"] = None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkRecord":
        d = dict(d)
        if d.get("cost") is None:
            d["cost"] = math.inf
        return cls(**d)


def _trajectory_to_dict(sol: TrajectorySolution, problem: ProblemInstance) -> dict:
    return {
        "kind": TRAJ_KIND,
        "version": FORMAT_VERSION,
        "degree": sol.curve.degree,
        "duration": sol.duration,
        "cost": sol.cost,
        "status": sol.status,
        "knots": list(sol.curve.knots.knots),
        "control_points": np.asarray(sol.curve.control_points).tolist(),
        "problem": problem_to_dict(problem),
    }


def trajectory_from_dict(d: dict) -> tuple[TrajectorySolution, ProblemInstance]:
    if d.get("kind") != TRAJ_KIND:
        raise ValueError("not a trajectory document")
    curve = BSplineCurve(
        KnotVector(tuple(d["knots"]), d["degree"]), np.array(d["control_points"])
    )
    sol = TrajectorySolution(curve, d["duration"], d["cost"], d["status"])
    return sol, problem_from_dict(d["problem"])


def _run_pinsat(problem, cfg, rrt, heuristic):
    return plan(problem, cfg, heuristic)


def _run_insat(problem, cfg, rrt, heuristic):
    return insat_sequential(problem, cfg, heuristic)


def _run_search_then_optimize(problem, cfg, rrt, heuristic):
    return search_then_optimize(problem, cfg, heuristic)


def _run_pbirrt(problem, cfg, rrt, heuristic):
    return pbirrt_then_optimize(problem, cfg, rrt)


PLANNERS: dict[str, Callable[..., PlanResult]] = {
    "pinsat": _run_pinsat,
    "insat": _run_insat,
    "search_then_optimize": _run_search_then_optimize,
    "pbirrt": _run_pbirrt,
}


def run_suite(
    problems: Sequence[ProblemInstance],
    planner_ids: Sequence[str],
    budgets: Sequence[int],
    cfg: PlannerConfig,
    rrt: RRTConfig = RRTConfig(),
    timeout: Optional[float] = None,
    traj_dir: Optional[str] = None,
) -> list[BenchmarkRecord]:
    """One record per (problem, planner, budget); crashes become failures.

    The grid heuristic is shared across runs of the same problem and its
    construction time is excluded from the recorded wall time.
    """
    for pid in planner_ids:
        if pid not in PLANNERS:
            raise ValueError(f"unknown planner {pid!r}; known: {sorted(PLANNERS)}")
    if traj_dir is not None:
        os.makedirs(traj_dir, exist_ok=True)
    records = []
    for p_idx, problem in enumerate(problems):
        heuristic = bfs_heuristic(
            problem.goal,
            problem.world,
            problem.bounds,
            problem.resolution,
            cfg.heuristic_scale,
        )
        for pid in planner_ids:
            for budget in budgets:
                run_cfg = replace(
                    cfg,
                    thread_budget=budget,
                    timeout=timeout if timeout is not None else cfg.timeout,
                )
                run_rrt = replace(
                    rrt,
                    thread_budget=budget,
                    timeout=run_cfg.timeout,
                    seed=rrt.seed * 100003 + p_idx,
                )
                try:
                    result = PLANNERS[pid](problem, run_cfg, run_rrt, heuristic)
                    success = result.status == SOLVED and result.trajectory is not None
                    traj_file = None
                    if success and traj_dir is not None:
                        traj_file = os.path.join(
                            traj_dir, f"{problem.name}-{pid}-nt{budget}.json"
                        )
                        with open(traj_file, "w") as fh:
                            json.dump(
                                _trajectory_to_dict(result.trajectory, problem),
                                fh,
                                sort_keys=True,
                            )
                    elif success:
                        # No storage requested: keep the record honest by
                        # pointing at an in-memory-only marker.
                        traj_file = "<unstored>"
                    records.append(
                        BenchmarkRecord(
                            problem=problem.name,
                            planner=pid,
                            budget=budget,
                            success=success,
                            wall_time=result.stats.wall_time,
                            cost=result.cost,
                            optimizer_calls=result.stats.optimizer_calls,
                            expansions=result.stats.expansions,
                            status=result.status,
                            trajectory_file=traj_file,
                        )
                    )
                except Exception:
                    records.append(
                        BenchmarkRecord(
                            problem=problem.name,
                            planner=pid,
                            budget=budget,
                            success=False,
                            wall_time=math.nan,
                            cost=math.inf,
                            optimizer_calls=0,
                            expansions=0,
                            status="error: " + traceback.format_exc(limit=1).splitlines()[-1],
                        )
                    )
    return records


def write_records(path: str, records: Sequence[BenchmarkRecord]) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"kind": RECORDS_KIND, "version": FORMAT_VERSION}))
        fh.write("\n")
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True))
            fh.write("\n")


def read_records(path: str) -> list[BenchmarkRecord]:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty records file")
    header = json.loads(lines[0])
    if header.get("kind") != RECORDS_KIND:
        raise ValueError(f"{path}: missing records header")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported records version")
    return [BenchmarkRecord.from_dict(json.loads(ln)) for ln in lines[1:]]


# -- aggregation ---------------------------------------------------------------


def aggregate(records: Sequence[BenchmarkRecord]) -> dict:
    """Per planner x budget summary with common-subset time/cost statistics.

    Success rates run over all problems of the group; mean/std of wall time
    and cost are restricted to the problems solved by every group, so the
    numbers compare like against like.  Standard deviations are population
    standard deviations.  Groups get available=False when the commonly
    solved subset is empty.
    """
    if not records:
        raise ValueError("cannot aggregate zero records")
    groups: dict[tuple[str, int], list[BenchmarkRecord]] = {}
    for rec in records:
        groups.setdefault((rec.planner, rec.budget), []).append(rec)
    solved_sets = [
        {r.problem for r in recs if r.success} for recs in groups.values()
    ]
    common = set.intersection(*solved_sets) if solved_sets else set()
    out_groups = []
    for (planner, budget), recs in sorted(groups.items()):
        n = len(recs)
        successes = sum(1 for r in recs if r.success)
        sub = [r for r in recs if r.success and r.problem in common]
        available = bool(sub)
        times = np.array([r.wall_time for r in sub])
        costs = np.array([r.cost for r in sub])
        out_groups.append(
            {
                "planner": planner,
                "budget": budget,
                "n": n,
                "successes": successes,
                "success_rate": successes / n if n else 0.0,
                "available": available,
                "mean_time": float(np.mean(times)) if available else None,
                "std_time": float(np.std(times)) if available else None,
                "mean_cost": float(np.mean(costs)) if available else None,
                "std_cost": float(np.std(costs)) if available else None,
            }
        )
    return {
        "kind": SUMMARY_KIND,
        "version": FORMAT_VERSION,
        "common_problems": sorted(common),
        "groups": out_groups,
    }


def write_summary(path: str, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- validation and domain constants -------------------------------------------


def validate_records(
    records: Sequence[BenchmarkRecord],
    samples: int = 240,
) -> list[tuple[BenchmarkRecord, str]]:
    """Independently re-check every stored successful trajectory.

    Returns the list of (record, reason) failures; an empty list means all
    stored solutions pass the duration, derivative, boundary, and collision
    re-validation at the given sampling density.
    """
    failures = []
    for rec in records:
        if not rec.success:
            continue
        if rec.trajectory_file in (None, "<unstored>"):
            failures.append((rec, "trajectory not stored"))
            continue
        try:
            with open(rec.trajectory_file) as fh:
                sol, problem = trajectory_from_dict(json.load(fh))
        except Exception as exc:
            failures.append((rec, f"unreadable trajectory: {exc}"))
            continue
        report = check_feasibility(
            sol,
            problem.limits,
            problem.world,
            samples=samples,
            expected_start=problem.start.coords,
        )
        if not report.ok:
            failures.append(
                (
                    rec,
                    "duration_ok=%s boundary_ok=%s derivatives_ok=%s collision_ok=%s"
                    % (
                        report.duration_ok,
                        report.boundary_ok,
                        report.derivatives_ok,
                        report.collision_ok,
                    ),
                )
            )
    return failures


def compute_domain_kmin(
    spec: SuiteSpec, half_width: float = 1.0, cap: int = 12
) -> int:
    """Minimum spline order over the suite's action primitives."""
    actions = []
    tunnels = []
    for act in unit_move_actions(2, spec.step_magnitudes):
        x1 = np.zeros(2)
        x2 = np.asarray(act.delta, dtype=float)
        actions.append((x1, x2))
        tunnels.append(make_edge_tunnel(x1, x2, half_width))
    return compute_kmin(actions, tunnels, spec.base_limits(), cap=cap)
