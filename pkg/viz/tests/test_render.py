import json

import numpy as np
import pytest

from kinoviz.cli import main
from kinoviz.render import (
    DocumentError,
    plot_profiles,
    plot_scaling,
    plot_trajectory,
    scaling_series,
)


def clamped_knots(degree, n):
    interior = list(np.linspace(0.0, 1.0, n - degree + 1))
    return [0.0] * degree + interior + [1.0] * degree


def trajectory_doc(obstacles=(), n_ctrl=6, degree=3):
    ctrl = np.column_stack(
        [np.linspace(-2.0, 2.0, n_ctrl), np.linspace(-1.0, 1.5, n_ctrl)]
    ).tolist()
    return {
        "kind": "kinoplan-trajectory",
        "version": 1,
        "degree": degree,
        "duration": 3.0,
        "cost": 8.5,
        "status": "converged",
        "knots": clamped_knots(degree, n_ctrl),
        "control_points": ctrl,
        "problem": {
            "name": "fixture-0000",
            "resolution": 1.0,
            "start": [-2.0, -1.0],
            "goal": {"center": [2.0, 1.5], "tolerance": 0.5},
            "bounds": {"lower": [-6.0, -6.0], "upper": [6.0, 6.0]},
            "limits": {
                "deriv_limits": [[2.0, 2.0], [8.0, 8.0]],
                "t_min": 1.0,
                "t_max": 30.0,
            },
            "actions": {"magnitudes": [1.0]},
            "world": {"type": "point2d", "obstacles": list(obstacles)},
        },
    }


def summary_doc(groups):
    return {
        "kind": "kinoplan-summary",
        "version": 1,
        "common_problems": ["p1"],
        "groups": groups,
    }


def group(planner, budget, rate, mean_time):
    return {
        "planner": planner,
        "budget": budget,
        "success_rate": rate,
        "mean_time": mean_time,
        "std_time": 0.0,
        "mean_cost": 1.0,
        "std_cost": 0.0,
        "available": mean_time is not None,
    }


class TestTrajectoryPlot:
    def test_empty_obstacle_list_renders(self):
        fig = plot_trajectory(trajectory_doc())
        assert fig.axes

    def test_control_polygon_echoes_file_counts(self):
        doc = trajectory_doc(n_ctrl=9)
        fig = plot_trajectory(doc)
        polygon = next(
            ln for ln in fig.axes[0].lines if ln.get_label() == "control polygon"
        )
        assert len(polygon.get_xdata()) == len(doc["control_points"])

    def test_obstacles_drawn(self):
        doc = trajectory_doc(
            obstacles=[
                {"type": "rect", "lower": [0.0, -6.0], "upper": [0.5, -1.0]},
                {"type": "disc", "center": [1.0, 3.0], "radius": 0.75},
            ]
        )
        fig = plot_trajectory(doc)
        # Two obstacle patches plus the goal circle.
        assert len(fig.axes[0].patches) == 3

    def test_wrong_kind_rejected(self):
        doc = trajectory_doc()
        doc["kind"] = "something-else"
        with pytest.raises(DocumentError):
            plot_trajectory(doc)

    def test_missing_field_rejected(self):
        doc = trajectory_doc()
        del doc["control_points"]
        with pytest.raises(DocumentError):
            plot_trajectory(doc)


class TestProfilesPlot:
    def test_one_panel_per_limit_order(self):
        fig = plot_profiles(trajectory_doc())
        assert len(fig.axes) == 2


class TestScalingPlot:
    def test_single_budget_single_point(self):
        doc = summary_doc([group("pinsat", 1, 0.9, 0.5)])
        series = scaling_series(doc)
        assert series == {"pinsat": ([1], [0.9], [0.5])}
        fig = plot_scaling(doc)
        assert len(fig.axes) == 2

    def test_fixture_echo(self):
        doc = summary_doc(
            [
                group("pinsat", 8, 0.95, 0.25),
                group("pinsat", 1, 0.90, 1.00),
                group("pbirrt", 1, 0.40, 2.00),
                group("pbirrt", 8, 0.40, None),
            ]
        )
        series = scaling_series(doc)
        assert series["pinsat"] == ([1, 8], [0.90, 0.95], [1.00, 0.25])
        assert series["pbirrt"] == ([1, 8], [0.40, 0.40], [2.00, None])
        fig = plot_scaling(doc)
        rate_ax = fig.axes[0]
        pinsat_line = next(
            ln for ln in rate_ax.lines if ln.get_label() == "pinsat"
        )
        assert list(pinsat_line.get_ydata()) == [0.90, 0.95]

    def test_empty_summary_rejected(self):
        with pytest.raises(DocumentError):
            plot_scaling(summary_doc([]))


class TestCLI:
    def test_trajectory_end_to_end(self, tmp_path):
        src = tmp_path / "traj.json"
        src.write_text(json.dumps(trajectory_doc()))
        out = tmp_path / "traj.png"
        assert main([str(src), "--kind", "trajectory", "--out", str(out)]) == 0
        assert out.stat().st_size > 0

    def test_identical_inputs_identical_images(self, tmp_path):
        src = tmp_path / "traj.json"
        src.write_text(json.dumps(trajectory_doc()))
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert main([str(src), "--kind", "profiles", "--out", str(a)]) == 0
        assert main([str(src), "--kind", "profiles", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_empty_summary_exit_code(self, tmp_path):
        src = tmp_path / "summary.json"
        src.write_text(json.dumps(summary_doc([])))
        code = main([str(src), "--kind", "scaling", "--out", str(tmp_path / "s.png")])
        assert code == 2

    def test_unparseable_input(self, tmp_path):
        src = tmp_path / "bad.json"
        src.write_text("{nope")
        code = main([str(src), "--kind", "scaling", "--out", str(tmp_path / "s.png")])
        assert code == 2

    def test_usage_error(self):
        assert main(["--kind", "scaling"]) == 1
