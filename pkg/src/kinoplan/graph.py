"""Low-dimensional planning graph: lattice states, action primitives,
successor generation, goal regions, and a grid breadth-first heuristic.

States live in the positional subspace that the discrete search explores;
the trajectory optimizer lifts its edges to the full space.  States are
canonicalized by rounding to a fixed lattice resolution so that hash-based
bookkeeping (open/closed sets) treats numerically equal states as one.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .bspline import Box
from .trajopt import CollisionWorld, Limits

__all__ = [
    "LowDState",
    "ActionPrimitive",
    "GoalRegion",
    "ProblemInstance",
    "Heuristic",
    "GridBFSHeuristic",
    "canonical_state",
    "unit_move_actions",
    "successors",
    "bfs_heuristic",
]

UNIT_MOVE = "unit_move"
LINE_OF_SIGHT_GOAL = "line_of_sight_goal"
DUMMY = "dummy"


@dataclass(frozen=True)
class LowDState:
    """Lattice-canonicalized low-dimensional state."""

    coords: np.ndarray = field(repr=True)
    key: tuple[int, ...] = field(repr=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=float)).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        return isinstance(other, LowDState) and self.key == other.key

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


def canonical_state(coords, resolution: float) -> LowDState:
    """Round to the primitive lattice and build the hashable key."""
    if resolution <= 0.0:
        raise ValueError("resolution must be positive")
    c = np.atleast_1d(np.asarray(coords, dtype=float))
    key = tuple(int(round(x / resolution)) for x in c)
    snapped = np.array([k * resolution for k in key])
    return LowDState(snapped, key)


@dataclass(frozen=True)
class ActionPrimitive:
    """One element of the finite action set."""

    name: str
    kind: str
    delta: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in (UNIT_MOVE, LINE_OF_SIGHT_GOAL, DUMMY):
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind == UNIT_MOVE:
            if self.delta is None:
                raise ValueError("unit moves need a displacement")
            d = np.atleast_1d(np.asarray(self.delta, dtype=float)).copy()
            d.setflags(write=False)
            object.__setattr__(self, "delta", d)

    def __hash__(self):
        return hash((self.name, self.kind))

    def __eq__(self, other):
        return (
            isinstance(other, ActionPrimitive)
            and self.name == other.name
            and self.kind == other.kind
        )


DUMMY_ACTION = ActionPrimitive("dummy", DUMMY)


def unit_move_actions(dim: int, magnitudes: Sequence[float]) -> list[ActionPrimitive]:
    """Axis-aligned moves at each magnitude in both directions per dimension."""
    if dim < 1 or not magnitudes:
        raise ValueError("need at least one dimension and one magnitude")
    actions = []
    for mag in magnitudes:
        if mag <= 0.0:
            raise ValueError("magnitudes must be positive")
        for axis in range(dim):
            for sign in (1.0, -1.0):
                delta = np.zeros(dim)
                delta[axis] = sign * mag
                tag = "p" if sign > 0 else "m"
                actions.append(
                    ActionPrimitive(f"move_{axis}{tag}_{mag:g}", UNIT_MOVE, delta)
                )
    return actions


@dataclass(frozen=True)
class GoalRegion:
    """Ball-shaped goal set around a representative goal state."""

    center: np.ndarray
    tolerance: float = 1e-6

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float)).copy()
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if self.tolerance < 0.0:
            raise ValueError("tolerance must be non-negative")

    def contains(self, state: LowDState) -> bool:
        return bool(np.linalg.norm(state.coords - self.center) <= self.tolerance)


@dataclass(frozen=True)
class ProblemInstance:
    """One planning query: start, goal region, world, limits, lattice."""

    start: LowDState
    goal: GoalRegion
    world: CollisionWorld
    limits: Limits
    bounds: Box
    actions: tuple[ActionPrimitive, ...]
    resolution: float
    name: str = "problem"

    def __post_init__(self):
        if not self.world.point_free(self.start.coords):
            raise ValueError("start state is in collision")
        if not self.world.point_free(self.goal.center):
            raise ValueError("goal state is in collision")
        object.__setattr__(self, "actions", tuple(self.actions))


class Heuristic(Protocol):
    def __call__(self, state: LowDState) -> float: ...


def successors(
    state: LowDState,
    actions: Sequence[ActionPrimitive],
    world: CollisionWorld,
    goal: GoalRegion | None = None,
    bounds: Box | None = None,
    resolution: float | None = None,
) -> list[tuple[ActionPrimitive, LowDState]]:
    """Collision-free candidate successors, one per applicable primitive.

    A line-of-sight goal candidate is appended when the goal region's
    representative state is directly visible from `state`.
    """
    out: list[tuple[ActionPrimitive, LowDState]] = []
    res = resolution
    for action in actions:
        if action.kind != UNIT_MOVE:
            continue
        nxt = state.coords + action.delta
        if bounds is not None and not bounds.contains(nxt):
            continue
        if not world.segment_free(state.coords, nxt):
            continue
        succ = canonical_state(nxt, res) if res else LowDState(nxt, tuple(map(float, nxt)))
        out.append((action, succ))
    if goal is not None:
        goal_state = (
            canonical_state(goal.center, res) if res else LowDState(goal.center, tuple(map(float, goal.center)))
        )
        if goal_state != state and world.segment_free(state.coords, goal.center):
            out.append((ActionPrimitive("goal_los", LINE_OF_SIGHT_GOAL), goal_state))
    return out


class GridBFSHeuristic:
    """Backward breadth-first hop distance from the goal on a uniform grid.

    8-connected in 2D (and its generalization in n-D: all nonzero offsets in
    {-1,0,1}^n), so the hop count equals the Chebyshev grid distance in an
    empty world.  Values are hops * cell_size * scale; blocked or
    unreachable cells are +inf.
    """

    def __init__(
        self,
        goal: GoalRegion,
        world: CollisionWorld,
        bounds: Box,
        resolution: float,
        scale: float = 1.0,
    ):
        if resolution <= 0.0:
            raise ValueError("resolution must be positive")
        self.bounds = bounds
        self.resolution = float(resolution)
        self.scale = float(scale)
        lo = bounds.lower
        shape = tuple(
            int(math.floor((bounds.upper[d] - lo[d]) / resolution + 1e-9)) + 1
            for d in range(lo.shape[0])
        )
        self.lo = lo
        self.shape = shape
        goal_cell = self._cell(goal.center)
        if goal_cell is None:
            raise ValueError("goal state outside heuristic bounds")
        if not world.point_free(self._center(goal_cell)):
            raise ValueError("goal cell is in collision")
        hops = np.full(shape, np.inf)
        free = np.empty(shape, dtype=bool)
        for idx in np.ndindex(*shape):
            free[idx] = world.point_free(self._center(idx))
        offsets = [
            off
            for off in np.ndindex(*(3,) * len(shape))
            if any(o != 1 for o in off)
        ]
        hops[goal_cell] = 0.0
        queue = deque([goal_cell])
        while queue:
            cell = queue.popleft()
            base = hops[cell]
            for off in offsets:
                nxt = tuple(c + o - 1 for c, o in zip(cell, off))
                if any(n < 0 or n >= s for n, s in zip(nxt, shape)):
                    continue
                if not free[nxt] or hops[nxt] < np.inf:
                    continue
                hops[nxt] = base + 1.0
                queue.append(nxt)
        self.hops = hops

    def _cell(self, point) -> tuple[int, ...] | None:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        idx = tuple(int(round((p[d] - self.lo[d]) / self.resolution)) for d in range(p.shape[0]))
        if any(i < 0 or i >= s for i, s in zip(idx, self.shape)):
            return None
        return idx

    def _center(self, cell: tuple[int, ...]) -> np.ndarray:
        return self.lo + np.asarray(cell, dtype=float) * self.resolution

    def __call__(self, state: LowDState) -> float:
        cell = self._cell(state.coords)
        if cell is None:
            return math.inf
        return float(self.hops[cell] * self.resolution * self.scale)


def bfs_heuristic(
    goal: GoalRegion,
    world: CollisionWorld,
    bounds: Box,
    resolution: float,
    scale: float = 1.0,
) -> GridBFSHeuristic:
    """Grid breadth-first heuristic rooted at the goal region's center."""
    return GridBFSHeuristic(goal, world, bounds, resolution, scale)
