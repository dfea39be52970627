"""Figure builders for the three plot kinds.

Every builder takes a parsed JSON document, validates the fields it needs,
and returns a matplotlib Figure; the CLI handles file IO and saving.
Styling is fixed so identical inputs produce identical images.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle, Rectangle  # noqa: E402

TRAJ_KIND = "kinoplan-trajectory"
SUMMARY_KIND = "kinoplan-summary"

_STYLE = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


class DocumentError(ValueError):
    """Input document is missing fields or has the wrong kind."""


def _require(doc: dict, kind: str, fields: tuple[str, ...]) -> None:
    if doc.get("kind") != kind:
        raise DocumentError(f"expected a {kind} document, got {doc.get('kind')!r}")
    missing = [f for f in fields if f not in doc]
    if missing:
        raise DocumentError(f"{kind} document missing fields: {missing}")


def _spline(doc: dict) -> BSpline:
    return BSpline(
        np.asarray(doc["knots"], dtype=float),
        np.asarray(doc["control_points"], dtype=float),
        int(doc["degree"]),
    )


def _draw_world(ax, problem: dict) -> None:
    lo = problem["bounds"]["lower"]
    hi = problem["bounds"]["upper"]
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    for ob in problem["world"]["obstacles"]:
        if ob["type"] == "rect":
            w = ob["upper"][0] - ob["lower"][0]
            h = ob["upper"][1] - ob["lower"][1]
            ax.add_patch(Rectangle(ob["lower"], w, h, color="0.45", zorder=1))
        elif ob["type"] == "disc":
            ax.add_patch(Circle(ob["center"], ob["radius"], color="0.45", zorder=1))


def plot_trajectory(doc: dict):
    """World obstacles, the spline path, and its control polygon."""
    _require(
        doc, TRAJ_KIND, ("degree", "duration", "knots", "control_points", "problem")
    )
    problem = doc["problem"]
    spline = _spline(doc)
    u = np.linspace(0.0, 1.0, 400)
    pts = spline(u)
    ctrl = np.asarray(doc["control_points"], dtype=float)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        _draw_world(ax, problem)
        ax.plot(
            ctrl[:, 0], ctrl[:, 1], "o--", color="tab:orange", ms=3, lw=0.8,
            label="control polygon", zorder=2,
        )
        ax.plot(pts[:, 0], pts[:, 1], color="tab:blue", lw=1.8, label="path", zorder=3)
        ax.plot(*problem["start"], "g^", ms=8, label="start", zorder=4)
        goal = problem["goal"]
        ax.add_patch(
            Circle(goal["center"], goal["tolerance"], fill=False, color="tab:green", zorder=4)
        )
        ax.set_title(
            f"{problem['name']}  T={doc['duration']:.2f}s cost={doc.get('cost', float('nan')):.2f}"
        )
        ax.legend(loc="upper right")
        fig.tight_layout()
    return fig


def plot_profiles(doc: dict):
    """Per-derivative magnitude profiles against the stated limits."""
    _require(
        doc, TRAJ_KIND, ("degree", "duration", "knots", "control_points", "problem")
    )
    limits = doc["problem"]["limits"]["deriv_limits"]
    T = float(doc["duration"])
    spline = _spline(doc)
    u = np.linspace(0.0, 1.0, 400)
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(len(limits), 1, figsize=(6.0, 2.2 * len(limits)), sharex=True)
        axes = np.atleast_1d(axes)
        for j, (ax, lim) in enumerate(zip(axes, limits), start=1):
            deriv = spline.derivative(j)(u) / T**j
            for c in range(deriv.shape[1]):
                ax.plot(u * T, deriv[:, c], lw=1.2, label=f"axis {c}")
            bound = float(np.max(lim))
            ax.axhline(bound, color="tab:red", lw=0.9, ls="--")
            ax.axhline(-bound, color="tab:red", lw=0.9, ls="--")
            ax.set_ylabel(f"order {j}")
        axes[-1].set_xlabel("time (s)")
        axes[0].legend(loc="upper right")
        axes[0].set_title(f"derivative profiles, {doc['problem']['name']}")
        fig.tight_layout()
    return fig


def scaling_series(doc: dict) -> dict[str, tuple[list[int], list[float], list]]:
    """Per-planner (budgets, success rates, mean times) from a summary doc.

    Kept separate from the figure builder so tests can echo the parsed
    values against fixtures.
    """
    _require(doc, SUMMARY_KIND, ("groups",))
    if not doc["groups"]:
        raise DocumentError("summary has no groups to plot")
    series: dict[str, list] = {}
    for g in doc["groups"]:
        series.setdefault(g["planner"], []).append(
            (int(g["budget"]), float(g["success_rate"]), g["mean_time"])
        )
    out = {}
    for planner, rows in series.items():
        rows.sort()
        out[planner] = (
            [r[0] for r in rows],
            [r[1] for r in rows],
            [r[2] for r in rows],
        )
    return out


def plot_scaling(doc: dict):
    """Success rate and mean wall time versus thread budget, per planner."""
    series = scaling_series(doc)
    with plt.rc_context(_STYLE):
        fig, (ax_rate, ax_time) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        for planner, (budgets, rates, times) in sorted(series.items()):
            ax_rate.plot(budgets, rates, "o-", label=planner)
            known = [(b, t) for b, t in zip(budgets, times) if t is not None]
            if known:
                ax_time.plot(*zip(*known), "o-", label=planner)
        ax_rate.set_xlabel("thread budget")
        ax_rate.set_ylabel("success rate")
        ax_rate.set_ylim(-0.02, 1.02)
        ax_time.set_xlabel("thread budget")
        ax_time.set_ylabel("mean wall time (s)")
        ax_rate.legend()
        fig.tight_layout()
    return fig
