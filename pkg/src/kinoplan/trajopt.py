"""Full-dimensional B-spline trajectory optimization.

The joint length + duration problem is solved with an augmented-Lagrangian
outer loop over a bound-constrained quasi-Newton inner solve.  Decision
variables are the free control points of a spline in the normalized
coordinate u in [0, 1] plus the duration T; derivative limits are enforced
at the derivative control points (a sufficient condition), obstacle
avoidance by reconstructing each outer iterate and terminating early on
collision, returning the best fully feasible iterate seen so far.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np
from scipy.optimize import linprog, minimize

from .bspline import (
    Box,
    BSplineCurve,
    basis_matrix,
    clamped_knots,
    derivative_curve,
    evaluate,
    reconstruct,
)

__all__ = [
    "CONVERGED",
    "COLLISION_TRUNCATED",
    "INFEASIBLE",
    "Limits",
    "Tunnel",
    "TrajectorySolution",
    "OptimizerConfig",
    "FeasibilityReport",
    "CollisionWorld",
    "KminInfeasibleError",
    "make_edge_tunnel",
    "time_scaled_derivative",
    "solve_relaxation",
    "optimize",
    "polyline_seed",
    "warm_optimize",
    "check_feasibility",
    "trajectory_cost",
    "compute_kmin",
    "kmin_order_feasible",
    "boundary_derivative_pins",
]

CONVERGED = "converged"
COLLISION_TRUNCATED = "collision_truncated"
INFEASIBLE = "infeasible"


class CollisionWorld(Protocol):
    """Pure, thread-safe free-space predicates."""

    def point_free(self, point) -> bool: ...

    def segment_free(self, a, b) -> bool: ...


@dataclass(frozen=True)
class Limits:
    """Componentwise derivative bounds and the duration window."""

    deriv_limits: tuple[np.ndarray, ...]  # index j-1 holds the order-j bound
    t_min: float
    t_max: float

    def __post_init__(self):
        lims = tuple(np.atleast_1d(np.asarray(l, dtype=float)) for l in self.deriv_limits)
        if not lims:
            raise ValueError("need at least one derivative bound")
        if any(np.any(l <= 0.0) for l in lims):
            raise ValueError("derivative bounds must be strictly positive")
        if not (0.0 < self.t_min <= self.t_max):
            raise ValueError("require 0 < t_min <= t_max")
        object.__setattr__(self, "deriv_limits", lims)

    @property
    def gamma(self) -> int:
        return len(self.deriv_limits)

    def bound(self, j: int) -> np.ndarray:
        return self.deriv_limits[j - 1]

    def with_duration(self, t_min: float | None = None, t_max: float | None = None) -> "Limits":
        return Limits(
            self.deriv_limits,
            self.t_min if t_min is None else t_min,
            self.t_max if t_max is None else t_max,
        )


@dataclass(frozen=True)
class Tunnel:
    """Convex corridor around a low-D edge; a union of boxes for paths."""

    segments: tuple[Box, ...]
    edge: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("tunnel needs at least one segment")
        x1 = np.atleast_1d(np.asarray(self.edge[0], dtype=float))
        x2 = np.atleast_1d(np.asarray(self.edge[1], dtype=float))
        object.__setattr__(self, "edge", (x1, x2))
        if not (self.point_free(x1) and self.point_free(x2)):
            raise ValueError("tunnel must contain both edge endpoints")

    @property
    def box(self) -> Box | None:
        """The single convex region, when the tunnel has one segment."""
        return self.segments[0] if len(self.segments) == 1 else None

    def point_free(self, point) -> bool:
        return any(seg.contains(point, tol=1e-9) for seg in self.segments)

    def segment_free(self, a, b) -> bool:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        # Within one convex segment the chord is contained; otherwise sample.
        for seg in self.segments:
            if seg.contains(a, tol=1e-9) and seg.contains(b, tol=1e-9):
                return True
        for s in np.linspace(0.0, 1.0, 8):
            if not self.point_free(a + s * (b - a)):
                return False
        return True


def make_edge_tunnel(x1, x2, half_width: float) -> Tunnel:
    """Axis-aligned box corridor of half-width r around the straight edge."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    lo = np.minimum(x1, x2) - half_width
    hi = np.maximum(x1, x2) + half_width
    return Tunnel((Box(lo, hi),), (x1, x2))


@dataclass(frozen=True)
class TrajectorySolution:
    """Optimized spline in u in [0,1] plus its duration, cost and status."""

    curve: BSplineCurve
    duration: float
    cost: float
    status: str

    @property
    def start_point(self) -> np.ndarray:
        return np.array(self.curve.control_points[0])

    @property
    def end_point(self) -> np.ndarray:
        return np.array(self.curve.control_points[-1])

    @property
    def feasible(self) -> bool:
        return self.status != INFEASIBLE

    def sample(self, samples: int):
        return reconstruct(
            self.curve.control_points, self.duration, self.curve.degree, samples
        )


@dataclass(frozen=True)
class OptimizerConfig:
    """Weights, discretization and solver schedule for the spline optimizer."""

    w1: float = 1.0  # duration weight
    w2: float = 1.0  # path length weight
    num_ctrl: int = 8
    degree: int = 3
    validation_samples: int = 24
    max_iters: int = 10  # outer augmented-Lagrangian iterations
    convergence_tol: float = 1e-8
    mu0: float = 10.0
    mu_growth: float = 10.0
    mu_max: float = 1e9
    inner_maxiter: int = 80
    max_ctrl: int = 28  # cap on warm-start concatenation size
    length_eps: float = 1e-8
    feas_tol: float = 1e-8

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or (self.w1 == 0 and self.w2 == 0):
            raise ValueError("weights must be non-negative and not both zero")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")


@dataclass(frozen=True)
class FeasibilityReport:
    duration_ok: bool
    boundary_ok: bool
    derivatives_ok: bool
    collision_ok: bool
    max_derivative_ratio: float  # max over samples/orders of |phi^(j)| / limit

    @property
    def ok(self) -> bool:
        return self.duration_ok and self.boundary_ok and self.derivatives_ok and self.collision_ok


class KminInfeasibleError(RuntimeError):
    """No spline order below the cap admits the saturated boundary program."""


# ---------------------------------------------------------------------------
# spline operators


@lru_cache(maxsize=256)
def _deriv_operators(degree: int, num_ctrl: int) -> tuple[np.ndarray, ...]:
    """Matrices D_j with derivative control points p^(j) = D_j @ P."""
    u = np.asarray(clamped_knots(degree, num_ctrl).knots)
    ops = []
    D = np.eye(num_ctrl)
    n = num_ctrl
    for step in range(1, min(degree, 3) + 1):
        deg = degree - step + 1
        spans = u[step + deg : step + deg + n - 1] - u[step : step + n - 1]
        diff = (np.eye(n - 1, n, 1) - np.eye(n - 1, n)) * (deg / spans)[:, None]
        D = diff @ D
        ops.append(D)
        n -= 1
    return tuple(ops)


@lru_cache(maxsize=256)
def _validation_basis(degree: int, num_ctrl: int, samples: int) -> np.ndarray:
    knots = clamped_knots(degree, num_ctrl)
    return basis_matrix(knots, np.linspace(0.0, 1.0, samples))


def _polyline_length(P: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))


def _required_duration(P: np.ndarray, degree: int, limits: Limits) -> float:
    """Smallest T for which the control-point derivative bounds hold."""
    ops = _deriv_operators(degree, P.shape[0])
    t_req = 0.0
    for j in range(1, min(3, limits.gamma, degree) + 1):
        Y = ops[j - 1] @ P
        ratio = float(np.max(np.abs(Y) / limits.bound(j)[None, :])) if Y.size else 0.0
        if ratio > 0.0:
            t_req = max(t_req, ratio ** (1.0 / j))
    return t_req


def time_scaled_derivative(curve: BSplineCurve, T: float, j: int, u: float) -> np.ndarray:
    """j-th real-time derivative at t = T*u, i.e. psi^(j)(u) / T**j."""
    if j not in (1, 2, 3):
        raise ValueError("supported derivative orders are 1, 2, 3")
    if T <= 0.0:
        raise ValueError("duration must be positive")
    if j > curve.degree:
        return np.zeros(curve.dim)
    return evaluate(derivative_curve(curve, j), u) / T**j


# ---------------------------------------------------------------------------
# core solver


def _collision_free(P: np.ndarray, degree: int, world, samples: int) -> bool:
    pts = _validation_basis(degree, P.shape[0], samples) @ P
    if not world.point_free(pts[0]):
        return False
    for a, b in zip(pts[:-1], pts[1:]):
        if not world.segment_free(a, b):
            return False
    return True


class _Assembler:
    """Maps the flat optimization vector to (P, T) and back."""

    def __init__(self, n: int, dim: int, pins: dict[int, np.ndarray], free_T: bool):
        self.n = n
        self.dim = dim
        self.pins = pins
        self.free_T = free_T
        self.free_idx = [i for i in range(n) if i not in pins]
        self.num_free = len(self.free_idx) * dim

    def to_z(self, P: np.ndarray, T: float) -> np.ndarray:
        z = P[self.free_idx].ravel()
        return np.append(z, T) if self.free_T else z

    def split(self, z: np.ndarray, T_frozen: float):
        P = np.empty((self.n, self.dim))
        flat = z[: self.num_free].reshape(len(self.free_idx), self.dim)
        P[self.free_idx] = flat
        for i, v in self.pins.items():
            P[i] = v
        T = float(z[-1]) if self.free_T else T_frozen
        return P, T

    def grad_to_z(self, gP: np.ndarray, gT: float) -> np.ndarray:
        g = gP[self.free_idx].ravel()
        return np.append(g, gT) if self.free_T else g


def _solve_spline(
    *,
    limits: Limits,
    world,
    cfg: OptimizerConfig,
    P0: np.ndarray,
    T0: float,
    pins: dict[int, np.ndarray],
    freeze_T: bool,
    squared_length: bool,
    region: Box | None,
) -> tuple[Optional[tuple[np.ndarray, float, float]], str]:
    """Shared augmented-Lagrangian driver.

    Returns ((P, T, cost), status) where the cached triple is the best fully
    feasible iterate, or (None, "infeasible").
    """
    n, dim = P0.shape
    degree = cfg.degree
    ops = _deriv_operators(degree, n)
    orders = list(range(1, min(3, limits.gamma, degree) + 1))
    # Row-normalize constraints: derivative operator rows grow like m**j and
    # would otherwise make the penalty Hessian hopelessly ill-conditioned.
    inv_scale = [1.0 / np.maximum(np.linalg.norm(ops[j - 1], axis=1), 1.0) for j in orders]
    asm = _Assembler(n, dim, pins, free_T=not freeze_T)

    def true_cost(P: np.ndarray, T: float) -> float:
        if squared_length:
            return cfg.w2 * float(np.sum(np.diff(P, axis=0) ** 2))
        return cfg.w1 * T + cfg.w2 * _polyline_length(P)

    def snapshot(P: np.ndarray, T: float, best):
        """Validate an iterate; cache it when fully feasible and improving."""
        if not _collision_free(P, degree, world, cfg.validation_samples):
            return best, True
        t_req = _required_duration(P, degree, limits)
        # Margin matches the outer convergence tolerance: active-limit optima
        # land on the boundary to within feas_tol, not machine epsilon.
        if t_req > limits.t_max * (1.0 + 10.0 * cfg.feas_tol):
            return best, False
        T_snap = limits.t_max if freeze_T else min(max(T, t_req, limits.t_min), limits.t_max)
        c = true_cost(P, T_snap)
        if best is None or c < best[2]:
            best = (P.copy(), T_snap, c)
        return best, False

    best = None
    best, collided = snapshot(P0, T0, best)
    if collided:
        return None, INFEASIBLE

    # multipliers: per order, two-sided
    lam = [np.zeros((2, n - j, dim)) for j in orders]
    mu = cfg.mu0
    prev_viol = math.inf
    prev_F = math.inf
    status = CONVERGED

    bounds = []
    for i in asm.free_idx:
        for c in range(dim):
            if region is not None:
                bounds.append((region.lower[c], region.upper[c]))
            else:
                bounds.append((None, None))
    if not freeze_T:
        bounds.append((limits.t_min, limits.t_max))

    def objective(z):
        P, T = asm.split(z, T0)
        gP = np.zeros_like(P)
        gT = 0.0
        if squared_length:
            d = np.diff(P, axis=0)
            F = cfg.w2 * float(np.sum(d * d))
            gd = 2.0 * cfg.w2 * d
            gP[:-1] -= gd
            gP[1:] += gd
        else:
            d = np.diff(P, axis=0)
            norms = np.sqrt(np.sum(d * d, axis=1) + cfg.length_eps**2)
            F = cfg.w2 * float(np.sum(norms))
            gd = cfg.w2 * d / norms[:, None]
            gP[:-1] -= gd
            gP[1:] += gd
            F += cfg.w1 * T
            gT += cfg.w1
        for idx, j in enumerate(orders):
            s = inv_scale[idx][:, None]
            Y = ops[j - 1] @ P
            bnd = (T**j) * limits.bound(j)[None, :]
            c_plus = (Y - bnd) * s
            c_minus = (-Y - bnd) * s
            a_plus = np.maximum(0.0, lam[idx][0] + mu * c_plus)
            a_minus = np.maximum(0.0, lam[idx][1] + mu * c_minus)
            F += float(
                np.sum(a_plus**2 - lam[idx][0] ** 2) + np.sum(a_minus**2 - lam[idx][1] ** 2)
            ) / (2.0 * mu)
            gY = (a_plus - a_minus) * s
            gP += ops[j - 1].T @ gY
            if not freeze_T:
                dbnd = j * T ** (j - 1) * limits.bound(j)[None, :]
                gT -= float(np.sum((a_plus + a_minus) * s * dbnd))
        return F, asm.grad_to_z(gP, gT)

    z = asm.to_z(P0, min(max(T0, limits.t_min), limits.t_max))
    for _ in range(cfg.max_iters):
        res = minimize(
            objective,
            z,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": cfg.inner_maxiter, "ftol": 1e-14, "gtol": 1e-10},
        )
        z = res.x
        P, T = asm.split(z, T0)
        best, collided = snapshot(P, T, best)
        if collided:
            status = COLLISION_TRUNCATED
            break
        # constraint values and multiplier update
        viol = 0.0
        for idx, j in enumerate(orders):
            s = inv_scale[idx][:, None]
            Y = ops[j - 1] @ P
            bnd = (T**j) * limits.bound(j)[None, :]
            c_plus = (Y - bnd) * s
            c_minus = (-Y - bnd) * s
            lam[idx][0] = np.maximum(0.0, lam[idx][0] + mu * c_plus)
            lam[idx][1] = np.maximum(0.0, lam[idx][1] + mu * c_minus)
            if c_plus.size:
                viol = max(viol, float(c_plus.max()), float(c_minus.max()))
        if viol < cfg.feas_tol and abs(prev_F - res.fun) <= cfg.convergence_tol * max(
            1.0, abs(res.fun)
        ):
            break
        if viol > 0.25 * prev_viol:
            mu = min(mu * cfg.mu_growth, cfg.mu_max)
        prev_viol = max(viol, 1e-300)
        prev_F = res.fun

    if best is None:
        return None, INFEASIBLE
    return best, status


def _region_of(world) -> Box | None:
    if isinstance(world, Tunnel):
        return world.box
    return None


def _straight_line_init(x1: np.ndarray, x2: np.ndarray, n: int) -> np.ndarray:
    return np.linspace(x1, x2, n)


def _initial_duration(P0: np.ndarray, limits: Limits) -> float:
    v_fast = float(np.max(limits.bound(1)))
    return min(max(_polyline_length(P0) / v_fast, limits.t_min), limits.t_max)


def _stationary_solution(x, limits: Limits, cfg: OptimizerConfig, world) -> TrajectorySolution:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = cfg.degree + 1
    P = np.tile(x, (n, 1))
    curve = BSplineCurve(clamped_knots(cfg.degree, n), P)
    status = CONVERGED if world is None or world.point_free(x) else INFEASIBLE
    return TrajectorySolution(curve, limits.t_min, cfg.w1 * limits.t_min, status)


def solve_relaxation(
    x1,
    x2,
    limits: Limits,
    world,
    cfg: OptimizerConfig,
    init_points: np.ndarray | None = None,
) -> Optional[TrajectorySolution]:
    """Fixed-duration convex relaxation: squared-spread objective at T = t_max.

    Convex whenever the containment region is convex (e.g. a single-segment
    tunnel), so multi-start solves agree on the optimum.  Returns None when
    no feasible iterate is found.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape:
        raise ValueError("boundary state dimension mismatch")
    n = max(cfg.num_ctrl, cfg.degree + 1)
    P0 = np.asarray(init_points, dtype=float) if init_points is not None else _straight_line_init(x1, x2, n)
    if P0.shape != (n, x1.size):
        raise ValueError(f"init_points must have shape {(n, x1.size)}")
    P0 = P0.copy()
    P0[0], P0[-1] = x1, x2
    region = _region_of(world)
    if region is not None:
        P0 = np.clip(P0, region.lower, region.upper)
    relax_cfg = replace(cfg, max_iters=max(cfg.max_iters, 25), inner_maxiter=max(cfg.inner_maxiter, 200))
    best, status = _solve_spline(
        limits=limits,
        world=world,
        cfg=relax_cfg,
        P0=P0,
        T0=limits.t_max,
        pins={0: x1, n - 1: x2},
        freeze_T=True,
        squared_length=True,
        region=region,
    )
    if best is None:
        return None
    P, T, cost = best
    curve = BSplineCurve(clamped_knots(cfg.degree, n), P)
    return TrajectorySolution(curve, T, cost, status)


def optimize(
    x1,
    x2,
    limits: Limits,
    world,
    cfg: OptimizerConfig,
    init: TrajectorySolution | None = None,
    pins: dict[int, np.ndarray] | None = None,
) -> TrajectorySolution:
    """Jointly optimize control points and duration for w1*T + w2*length.

    Each outer iterate is reconstructed and validated; on collision the best
    previously feasible iterate is returned with status collision_truncated,
    or infeasible when none exists.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape:
        raise ValueError("boundary state dimension mismatch")
    if init is None and pins is None and float(np.linalg.norm(x2 - x1)) < 1e-12:
        return _stationary_solution(x1, limits, cfg, world)

    if init is not None:
        P0 = np.array(init.curve.control_points)
        T0 = min(max(init.duration, limits.t_min), limits.t_max)
        n = P0.shape[0]
    else:
        n = max(cfg.num_ctrl, cfg.degree + 1)
        P0 = _straight_line_init(x1, x2, n)
        T0 = _initial_duration(P0, limits)
    all_pins = {0: x1, n - 1: x2}
    if pins:
        for i, v in pins.items():
            if not 0 <= i < n:
                raise ValueError(f"pin index {i} out of range")
            all_pins[i] = np.atleast_1d(np.asarray(v, dtype=float))
        P0 = P0.copy()
        for i, v in all_pins.items():
            P0[i] = v
    best, status = _solve_spline(
        limits=limits,
        world=world,
        cfg=cfg,
        P0=P0,
        T0=T0,
        pins=all_pins,
        freeze_T=False,
        squared_length=False,
        region=_region_of(world),
    )
    if best is None:
        curve = BSplineCurve(clamped_knots(cfg.degree, n), P0)
        return TrajectorySolution(curve, min(max(T0, limits.t_min), limits.t_max), math.inf, INFEASIBLE)
    P, T, cost = best
    curve = BSplineCurve(clamped_knots(cfg.degree, n), P)
    return TrajectorySolution(curve, T, cost, status)


def _resample_polyline(P: np.ndarray, n: int) -> np.ndarray:
    """Arc-length resampling of a control polygon, endpoints preserved."""
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0.0:
        return np.tile(P[0], (n, 1))
    targets = np.linspace(0.0, s[-1], n)
    out = np.empty((n, P.shape[1]))
    for c in range(P.shape[1]):
        out[:, c] = np.interp(targets, s, P[:, c])
    out[0], out[-1] = P[0], P[-1]
    return out


def polyline_seed(
    waypoints: np.ndarray, limits: Limits, cfg: OptimizerConfig
) -> TrajectorySolution:
    """Control polygon traced along a waypoint polyline.

    Sampling at the Greville abscissae (knot averages) spaces the polygon
    like the clamped spans, keeping the boundary derivative control points
    from demanding an inadmissible duration.  The duration starts at the
    polyline's kinematic minimum, clipped to the admissible range.
    """
    W = np.asarray(waypoints, dtype=float)
    n = max(cfg.num_ctrl, cfg.degree + 1)
    seg = np.linalg.norm(np.diff(W, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    knots = clamped_knots(cfg.degree, n)
    u = np.asarray(knots.knots)
    greville = np.array([np.mean(u[i + 1 : i + 1 + cfg.degree]) for i in range(n)])
    P0 = np.empty((n, W.shape[1]))
    if arc[-1] <= 0.0:
        P0[:] = W[0]
    else:
        targets = greville * arc[-1]
        for c in range(W.shape[1]):
            P0[:, c] = np.interp(targets, arc, W[:, c])
        P0[0], P0[-1] = W[0], W[-1]
    v_fast = float(np.max(limits.bound(1)))
    T0 = min(max(arc[-1] / v_fast, limits.t_min), limits.t_max)
    return TrajectorySolution(BSplineCurve(knots, P0), T0, math.inf, CONVERGED)


def warm_optimize(
    prefix: TrajectorySolution,
    suffix: TrajectorySolution,
    limits: Limits,
    world,
    cfg: OptimizerConfig,
    endpoint_tol: float = 1e-6,
) -> TrajectorySolution:
    """Re-optimize the concatenation of a stored trajectory and a fresh piece.

    Control polygons are appended (dropping the duplicated junction point),
    re-clamped over a uniform knot vector, and the duration initialized to
    the clipped sum of the piece durations.
    """
    gap = float(np.linalg.norm(prefix.end_point - suffix.start_point))
    if gap > endpoint_tol:
        raise ValueError(f"prefix/suffix endpoint mismatch: {gap}")
    P = np.vstack([prefix.curve.control_points, suffix.curve.control_points[1:]])
    n = P.shape[0]
    if n > cfg.max_ctrl:
        P = _resample_polyline(P, cfg.max_ctrl)
        n = cfg.max_ctrl
    if n < cfg.degree + 1:
        P = _resample_polyline(P, cfg.degree + 1)
        n = cfg.degree + 1
    T0 = min(max(prefix.duration + suffix.duration, limits.t_min), limits.t_max)
    curve0 = BSplineCurve(clamped_knots(cfg.degree, n), P)
    init = TrajectorySolution(curve0, T0, math.inf, CONVERGED)
    return optimize(P[0], P[-1], limits, world, cfg, init=init)


def trajectory_cost(sol: TrajectorySolution, w1: float, w2: float) -> float:
    """w1*T + w2 * control-polygon length."""
    return w1 * sol.duration + w2 * _polyline_length(np.asarray(sol.curve.control_points))


def check_feasibility(
    sol: TrajectorySolution,
    limits: Limits,
    world,
    samples: int = 200,
    expected_start=None,
    expected_end=None,
    rel_tol: float = 1e-6,
) -> FeasibilityReport:
    """Independent sampled re-validation of Eq-style constraints.

    Derivatives are checked at sample points (the necessary condition),
    complementing the sufficient control-point condition the optimizer
    enforces.
    """
    duration_ok = limits.t_min * (1 - 1e-12) <= sol.duration <= limits.t_max * (1 + 1e-12)
    boundary_ok = True
    if expected_start is not None:
        boundary_ok &= bool(np.allclose(sol.start_point, expected_start, atol=1e-9))
    if expected_end is not None:
        boundary_ok &= bool(np.allclose(sol.end_point, expected_end, atol=1e-9))
    traj = sol.sample(samples)
    max_ratio = 0.0
    for j, vals in ((1, traj.velocity), (2, traj.acceleration), (3, traj.jerk)):
        if j > limits.gamma:
            continue
        ratio = float(np.max(np.abs(vals) / limits.bound(j)[None, :]))
        max_ratio = max(max_ratio, ratio)
    derivatives_ok = max_ratio <= 1.0 + rel_tol
    collision_ok = world.point_free(traj.position[0]) and all(
        world.segment_free(a, b) for a, b in zip(traj.position[:-1], traj.position[1:])
    )
    return FeasibilityReport(duration_ok, boundary_ok, derivatives_ok, collision_ok, max_ratio)


# ---------------------------------------------------------------------------
# minimum spline order


def _kmin_sign_patterns(rows: int) -> Iterable[tuple[int, ...]]:
    if rows == 0:
        yield ()
        return
    for mask in range(2**rows):
        yield tuple(1 if mask >> r & 1 else -1 for r in range(rows))


def kmin_order_feasible(x1, x2, tunnel: Tunnel, limits: Limits, k: int, t_min: float | None = None) -> bool:
    """Feasibility of the saturated boundary-derivative program at order k.

    Control points are confined to the tunnel box, boundary derivative
    control points are pinned to the saturated magnitude (the absolute
    value is resolved existentially: the program is feasible when some
    sign resolution admits a solution), interior derivative control
    points are bounded, all at duration t_min.  Dimensions decouple, so
    each is checked by its own family of small LPs.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    t = limits.t_min if t_min is None else t_min
    J = min(3, limits.gamma)
    if k < J:
        return False
    box = tunnel.box
    if box is None:
        raise ValueError("order program needs a single-segment (convex) tunnel")
    n = k + 1  # Bezier-form: exactly k+1 control points
    ops = _deriv_operators(k, n)
    for c in range(x1.size):
        if not _kmin_dim_feasible(
            x1[c], x2[c], float(box.lower[c]), float(box.upper[c]),
            [float(t**j * limits.bound(j)[c]) for j in range(1, J + 1)],
            k, n, ops,
        ):
            return False
    return True


def _kmin_dim_feasible(a, b, lo, hi, sat, k, n, ops) -> bool:
    """Per-dimension feasibility: some boundary sign pattern must solve."""
    J = len(sat)
    eq_rows = []  # (coeff row over full p, order j, is_pair_second)
    ub_rows = []  # (coeff row, bound)
    for j in range(1, J + 1):
        D = ops[j - 1]
        last = n - j - 1
        eq_rows.append((D[0], j))
        if last != 0:
            eq_rows.append((D[last], j))
        for r in range(1, last):
            ub_rows.append((D[r], sat[j - 1]))
    free = list(range(1, n - 1))
    if not free:
        p = np.array([a, b])
        if not all(abs(float(row @ p)) <= bound + 1e-9 for row, bound in ub_rows):
            return False
        return all(
            abs(abs(float(row @ p)) - sat[j - 1]) <= 1e-9 for row, j in eq_rows
        )
    for signs in _kmin_sign_patterns(len(eq_rows)):
        A_eq, b_eq = [], []
        for (row, j), s in zip(eq_rows, signs):
            A_eq.append(row[free])
            b_eq.append(s * sat[j - 1] - row[0] * a - row[-1] * b)
        A_ub, b_ub = [], []
        for row, bound in ub_rows:
            rhs = row[0] * a + row[-1] * b
            A_ub.append(row[free])
            b_ub.append(bound - rhs)
            A_ub.append(-row[free])
            b_ub.append(bound + rhs)
        res = linprog(
            np.zeros(len(free)),
            A_ub=np.array(A_ub) if A_ub else None,
            b_ub=np.array(b_ub) if b_ub else None,
            A_eq=np.array(A_eq),
            b_eq=np.array(b_eq),
            bounds=[(lo, hi)] * len(free),
            method="highs",
        )
        if res.success:
            return True
    return False


def compute_kmin(
    actions: Sequence[tuple[np.ndarray, np.ndarray]],
    tunnels: Sequence[Tunnel],
    limits: Limits,
    floor_degree: int = 3,
    cap: int = 12,
) -> int:
    """Minimum spline order: max over actions of the smallest feasible order.

    Each action is given as its (x', x'') endpoint pair with its tunnel; the
    per-action sweep starts at the lowest order for which all required
    derivative orders exist.
    """
    if not actions:
        raise ValueError("action set must be non-empty")
    if len(actions) != len(tunnels):
        raise ValueError("need one tunnel per action")
    overall = floor_degree
    for (x1, x2), tunnel in zip(actions, tunnels):
        k_e = None
        for k in range(min(3, limits.gamma), cap + 1):
            if kmin_order_feasible(x1, x2, tunnel, limits, k):
                k_e = k
                break
        if k_e is None:
            raise KminInfeasibleError(
                f"no feasible order <= {cap} for action {np.asarray(x1)}->{np.asarray(x2)}; "
                "tunnel too narrow or limits too tight"
            )
        overall = max(overall, k_e)
    return overall


def boundary_derivative_pins(
    x_start,
    x_end,
    d_start: Sequence[np.ndarray],
    d_end: Sequence[np.ndarray],
    degree: int,
    num_ctrl: int,
) -> dict[int, np.ndarray]:
    """Control-point pins realizing prescribed endpoint derivatives.

    Inverts the derivative recursion order by order: the j-th start (end)
    derivative determines control point j (num_ctrl-1-j).
    """
    x_start = np.atleast_1d(np.asarray(x_start, dtype=float))
    x_end = np.atleast_1d(np.asarray(x_end, dtype=float))
    if len(d_start) > degree or len(d_end) > degree:
        raise ValueError("more derivative conditions than the degree supports")
    if num_ctrl < len(d_start) + len(d_end) + 2:
        raise ValueError("not enough control points for the requested pins")
    ops = _deriv_operators(degree, num_ctrl)
    pins = {0: x_start, num_ctrl - 1: x_end}
    P = np.zeros((num_ctrl, x_start.size))
    P[0], P[-1] = x_start, x_end
    for j, target in enumerate(d_start, start=1):
        row = ops[j - 1][0]
        resid = np.atleast_1d(np.asarray(target, dtype=float)) - row[:j] @ P[:j]
        P[j] = resid / row[j]
        pins[j] = P[j]
    for j, target in enumerate(d_end, start=1):
        row = ops[j - 1][-1]
        idx = num_ctrl - 1 - j
        resid = np.atleast_1d(np.asarray(target, dtype=float)) - row[idx + 1 :] @ P[idx + 1 :]
        P[idx] = resid / row[idx]
        pins[idx] = P[idx]
    return pins
