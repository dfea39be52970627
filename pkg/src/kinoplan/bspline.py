"""Clamped B-spline machinery: Cox-de Boor bases, knot vectors, curve and
derivative evaluation, and hull containment predicates.

Indexing convention used throughout this package
------------------------------------------------
A curve of degree ``k`` with ``n`` control points ``p_0 .. p_{n-1}`` uses a
clamped knot vector of length ``n + k + 1`` whose first and last knots are
each repeated ``k + 1`` times.  Interior knots are uniformly spaced.  With
this convention the curve interpolates ``p_0`` at the first knot and
``p_{n-1}`` at the last knot, and the j-th derivative is a degree ``k - j``
spline with ``n - j`` control points over the knot vector with ``j`` knots
dropped from each end.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "KnotVector",
    "BSplineCurve",
    "Box",
    "TrajectorySamples",
    "basis",
    "clamped_knots",
    "evaluate",
    "derivative_control_points",
    "derivative_curve",
    "active_hull_box",
    "reconstruct",
]


@dataclass(frozen=True)
class KnotVector:
    """Non-decreasing knot sequence with (degree+1)-fold clamped ends."""

    knots: tuple[float, ...]
    degree: int

    def __post_init__(self):
        k = self.degree
        t = self.knots
        if k < 0:
            raise ValueError("degree must be non-negative")
        if len(t) < 2 * (k + 1):
            raise ValueError("knot vector too short for degree")
        if any(t[i] > t[i + 1] for i in range(len(t) - 1)):
            raise ValueError("knots must be non-decreasing")

    @property
    def num_ctrl(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def t0(self) -> float:
        return self.knots[0]

    @property
    def tf(self) -> float:
        return self.knots[-1]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box lower <= upper componentwise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("lower/upper shape mismatch")
        if np.any(lo > hi):
            raise ValueError("box lower exceeds upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def inflate(self, margin: float) -> "Box":
        return Box(self.lower - margin, self.upper + margin)


@dataclass(frozen=True)
class BSplineCurve:
    """Degree-k spline defined by a clamped knot vector and de Boor points."""

    knots: KnotVector
    control_points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.control_points, dtype=float))
        if pts.shape[0] != self.knots.num_ctrl:
            raise ValueError(
                f"expected {self.knots.num_ctrl} control points, got {pts.shape[0]}"
            )
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "control_points", pts)

    @property
    def degree(self) -> int:
        return self.knots.degree

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]


def clamped_knots(degree: int, num_ctrl: int, t0: float = 0.0, tf: float = 1.0) -> KnotVector:
    """Uniform clamped knot vector for `num_ctrl` points of the given degree."""
    if num_ctrl < degree + 1:
        raise ValueError(f"need at least degree+1={degree + 1} control points, got {num_ctrl}")
    if not tf > t0:
        raise ValueError("tf must exceed t0")
    interior = num_ctrl - degree - 1
    inner = np.linspace(t0, tf, interior + 2)[1:-1]
    knots = [t0] * (degree + 1) + list(inner) + [tf] * (degree + 1)
    return KnotVector(tuple(float(t) for t in knots), degree)


def _span_check(knots: KnotVector, t: float) -> None:
    if t < knots.t0 or t > knots.tf:
        raise ValueError(f"parameter {t} outside knot span [{knots.t0}, {knots.tf}]")


def basis(i: int, k: int, t: float, knots: KnotVector) -> float:
    """Cox-de Boor basis value N_{i,k}(t).

    0/0 terms in the recursion are taken as 0.  The final knot is treated as
    belonging to the last non-empty span so that the basis values sum to one
    on the closed span.
    """
    u = knots.knots
    if i < 0 or i + k + 1 > len(u) - 1:
        raise IndexError(f"basis index {i} out of range for degree {k}")
    _span_check(knots, t)
    return _cox_de_boor(u, i, k, float(t))


def _cox_de_boor(u: tuple[float, ...], i: int, k: int, t: float) -> float:
    if k == 0:
        if u[i] <= t < u[i + 1]:
            return 1.0
        # Right-closed final interval: t at the last knot activates the
        # last non-empty degree-0 span.
        if t == u[-1] and u[i] < u[i + 1] == u[-1]:
            return 1.0
        return 0.0
    total = 0.0
    d1 = u[i + k] - u[i]
    if d1 > 0.0:
        total += (t - u[i]) / d1 * _cox_de_boor(u, i, k - 1, t)
    d2 = u[i + k + 1] - u[i + 1]
    if d2 > 0.0:
        total += (u[i + k + 1] - t) / d2 * _cox_de_boor(u, i + 1, k - 1, t)
    return total


@lru_cache(maxsize=4096)
def _basis_row_cached(u: tuple[float, ...], k: int, t: float) -> tuple[float, ...]:
    n = len(u) - k - 1
    return tuple(_cox_de_boor(u, i, k, t) for i in range(n))


def basis_matrix(knots: KnotVector, ts: np.ndarray) -> np.ndarray:
    """Matrix B with B[s, i] = N_{i,k}(ts[s]); reconstruction is B @ P."""
    k = knots.degree
    u = knots.knots
    return np.array([_basis_row_cached(u, k, float(t)) for t in ts])


def evaluate(curve: BSplineCurve, t: float) -> np.ndarray:
    """Curve point sum_i p_i N_{i,k}(t)."""
    _span_check(curve.knots, t)
    row = np.asarray(_basis_row_cached(curve.knots.knots, curve.degree, float(t)))
    return row @ curve.control_points


def derivative_control_points(curve: BSplineCurve, j: int) -> np.ndarray:
    """Control points of the j-th derivative spline.

    Applies the difference recursion once per order; each application drops
    one control point and one knot from each end.
    """
    if j < 0:
        raise ValueError("derivative order must be non-negative")
    if j > curve.degree:
        raise ValueError(f"order {j} exceeds degree {curve.degree}")
    pts = np.array(curve.control_points)
    if j == 0:
        return pts
    u = np.asarray(curve.knots.knots)
    k = curve.degree
    for step in range(1, j + 1):
        deg = k - step + 1  # degree before this differentiation step
        spans = u[step + deg : step + deg + len(pts) - 1] - u[step : step + len(pts) - 1]
        if np.any(spans <= 0.0):
            raise ZeroDivisionError("zero knot span while differentiating")
        pts = deg * (pts[1:] - pts[:-1]) / spans[:, None]
    return pts


def derivative_curve(curve: BSplineCurve, j: int) -> BSplineCurve:
    """The j-th derivative as a degree (k - j) spline."""
    pts = derivative_control_points(curve, j)
    if j == 0:
        return curve
    knots = KnotVector(curve.knots.knots[j:-j], curve.degree - j)
    return BSplineCurve(knots, pts)


def _active_span(knots: KnotVector, t: float) -> int:
    """Index s with knots[s] <= t < knots[s+1] (last non-empty span at tf)."""
    u = knots.knots
    if t >= knots.tf:
        s = len(u) - 2
        while u[s] == u[s + 1]:
            s -= 1
        return s
    s = int(np.searchsorted(np.asarray(u), t, side="right")) - 1
    return s


def active_hull_box(curve: BSplineCurve, t: float) -> Box:
    """Bounding box of the control points with non-zero basis at t."""
    _span_check(curve.knots, t)
    s = _active_span(curve.knots, t)
    k = curve.degree
    lo = max(0, s - k)
    hi = min(curve.control_points.shape[0], s + 1)
    active = curve.control_points[lo:hi]
    return Box(active.min(axis=0), active.max(axis=0))


@dataclass(frozen=True)
class TrajectorySamples:
    """Uniform-grid samples of a timed trajectory and derivatives to order 3."""

    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray


def reconstruct(control_points, duration: float, degree: int, samples: int) -> TrajectorySamples:
    """Sample position and derivatives up to order 3 over t in [0, duration].

    The curve is parameterised over u in [0, 1]; real-time derivatives pick
    up a 1/duration**j factor from t = duration * u.
    """
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    pts = np.atleast_2d(np.asarray(control_points, dtype=float))
    knots = clamped_knots(degree, pts.shape[0])
    curve = BSplineCurve(knots, pts)
    us = np.linspace(0.0, 1.0, samples)
    ts = us * duration
    pos = basis_matrix(knots, us) @ pts
    derivs = []
    for j in (1, 2, 3):
        if j > degree:
            derivs.append(np.zeros_like(pos))
            continue
        dcurve = derivative_curve(curve, j)
        vals = basis_matrix(dcurve.knots, us) @ dcurve.control_points
        derivs.append(vals / duration**j)
    return TrajectorySamples(ts, pos, derivs[0], derivs[1], derivs[2])
