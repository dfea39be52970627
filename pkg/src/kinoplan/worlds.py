"""Collision worlds for the benchmark domains.

Two domains are provided: a 2D point robot among axis-aligned rectangles
and discs, with exact point and segment tests, and a planar revolute arm
whose joint-space queries are resolved through forward kinematics and
per-link segment tests against the same 2D obstacles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bspline import Box

__all__ = [
    "RectObstacle",
    "DiscObstacle",
    "World2D",
    "PlanarArmWorld",
    "point2d_world",
    "planar_arm_world",
]


@dataclass(frozen=True)
class RectObstacle:
    """Solid axis-aligned rectangle."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != (2,) or hi.shape != (2,):
            raise ValueError("rectangle corners must be 2D")
        if np.any(lo >= hi):
            raise ValueError("rectangle has empty interior")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains_point(self, p: np.ndarray) -> bool:
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    def intersects_segment(self, a: np.ndarray, b: np.ndarray) -> bool:
        # Liang-Barsky clipping of the segment against the slab box.
        d = b - a
        t0, t1 = 0.0, 1.0
        for axis in range(2):
            if abs(d[axis]) < 1e-15:
                if a[axis] < self.lower[axis] or a[axis] > self.upper[axis]:
                    return False
                continue
            ta = (self.lower[axis] - a[axis]) / d[axis]
            tb = (self.upper[axis] - a[axis]) / d[axis]
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return False
        return True


@dataclass(frozen=True)
class DiscObstacle:
    """Solid disc."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if c.shape != (2,):
            raise ValueError("disc center must be 2D")
        if self.radius <= 0.0:
            raise ValueError("disc radius must be positive")
        object.__setattr__(self, "center", c)

    def contains_point(self, p: np.ndarray) -> bool:
        return bool(np.sum((p - self.center) ** 2) <= self.radius**2)

    def intersects_segment(self, a: np.ndarray, b: np.ndarray) -> bool:
        d = b - a
        denom = float(d @ d)
        if denom < 1e-30:
            return self.contains_point(a)
        t = float(np.clip((self.center - a) @ d / denom, 0.0, 1.0))
        closest = a + t * d
        return self.contains_point(closest)


Obstacle = RectObstacle | DiscObstacle


class World2D:
    """Point robot world: free iff inside bounds and outside all obstacles."""

    def __init__(self, obstacles: Sequence[Obstacle], bounds: Box):
        if bounds.lower.shape != (2,):
            raise ValueError("bounds must be 2D")
        self.obstacles = tuple(obstacles)
        self.bounds = bounds

    def point_free(self, point) -> bool:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        if not self.bounds.contains(p):
            return False
        return not any(ob.contains_point(p) for ob in self.obstacles)

    def segment_free(self, a, b) -> bool:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if not (self.bounds.contains(a) and self.bounds.contains(b)):
            return False
        return not any(ob.intersects_segment(a, b) for ob in self.obstacles)


def point2d_world(obstacles: Sequence[Obstacle], bounds: Box) -> World2D:
    """Exact-geometry 2D collision world."""
    return World2D(obstacles, bounds)


class PlanarArmWorld:
    """Joint-space collision world for a planar chain of revolute links.

    A configuration is free when every link segment, placed by forward
    kinematics from the base, avoids all workspace obstacles and each joint
    respects its limits.  Joint-space segments are checked by sampling at a
    fixed angular resolution.
    """

    def __init__(
        self,
        link_lengths: Sequence[float],
        joint_limits: Sequence[tuple[float, float]],
        obstacles: Sequence[Obstacle],
        base: Sequence[float] = (0.0, 0.0),
        segment_resolution: float = 0.05,
    ):
        lengths = [float(l) for l in link_lengths]
        if not lengths:
            raise ValueError("kinematic chain needs at least one link")
        if any(l < 0.0 for l in lengths):
            raise ValueError("link lengths must be non-negative")
        if len(joint_limits) != len(lengths):
            raise ValueError("need one joint limit pair per link")
        for lo, hi in joint_limits:
            if lo > hi:
                raise ValueError("joint limit lower exceeds upper")
        self.link_lengths = tuple(lengths)
        self.joint_limits = tuple((float(lo), float(hi)) for lo, hi in joint_limits)
        self.obstacles = tuple(obstacles)
        self.base = np.atleast_1d(np.asarray(base, dtype=float))
        self.segment_resolution = float(segment_resolution)

    @property
    def dim(self) -> int:
        return len(self.link_lengths)

    def forward_kinematics(self, q) -> np.ndarray:
        """Joint positions: base plus one endpoint per link, absolute angles
        accumulated along the chain."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        pts = [self.base]
        angle = 0.0
        for theta, length in zip(q, self.link_lengths):
            angle += float(theta)
            pts.append(pts[-1] + length * np.array([math.cos(angle), math.sin(angle)]))
        return np.vstack(pts)

    def point_free(self, q) -> bool:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        for theta, (lo, hi) in zip(q, self.joint_limits):
            if theta < lo or theta > hi:
                return False
        pts = self.forward_kinematics(q)
        for a, b in zip(pts[:-1], pts[1:]):
            if any(ob.intersects_segment(a, b) for ob in self.obstacles):
                return False
        return True

    def segment_free(self, q1, q2) -> bool:
        q1 = np.atleast_1d(np.asarray(q1, dtype=float))
        q2 = np.atleast_1d(np.asarray(q2, dtype=float))
        span = float(np.max(np.abs(q2 - q1)))
        steps = max(2, int(math.ceil(span / self.segment_resolution)) + 1)
        for s in np.linspace(0.0, 1.0, steps):
            if not self.point_free(q1 + s * (q2 - q1)):
                return False
        return True


def planar_arm_world(
    link_lengths: Sequence[float],
    joint_limits: Sequence[tuple[float, float]],
    obstacles: Sequence[Obstacle],
    base: Sequence[float] = (0.0, 0.0),
    segment_resolution: float = 0.05,
) -> PlanarArmWorld:
    """Joint-space world for a planar revolute arm among 2D obstacles."""
    return PlanarArmWorld(link_lengths, joint_limits, obstacles, base, segment_resolution)
