import json
import math

import numpy as np
import pytest

from kinoplan.baselines import RRTConfig
from kinoplan.bench import (
    BenchmarkRecord,
    SuiteSpec,
    aggregate,
    chamber_id,
    compute_domain_kmin,
    free_space_min_duration,
    load_suite,
    problem_from_dict,
    problem_to_dict,
    read_records,
    run_suite,
    sample_suite,
    validate_records,
    write_records,
    write_suite,
)
from kinoplan.planner import PlannerConfig
from kinoplan.trajopt import OptimizerConfig, kmin_order_feasible, make_edge_tunnel


SPEC = SuiteSpec(n_problems=3, seed=5, budgets=(1,), timeout=60.0)
CFG = PlannerConfig(timeout=60.0, optimizer=OptimizerConfig())


def bar_centers_of(problem):
    """Recover the bar x-centers from the serialized obstacle pairs."""
    xs = sorted({(ob.lower[0] + ob.upper[0]) / 2.0 for ob in problem.world.obstacles})
    return xs


class TestSuiteSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SuiteSpec(domain="nope")
        with pytest.raises(ValueError):
            SuiteSpec(n_problems=-1)
        with pytest.raises(ValueError):
            SuiteSpec(n_bars=0)

    def test_base_limits_shape(self):
        limits = SPEC.base_limits()
        assert limits.gamma == 2
        assert np.allclose(limits.bound(1), SPEC.vel_limit)


class TestSampleSuite:
    def test_seed_determinism(self):
        a = sample_suite(SPEC)
        b = sample_suite(SPEC)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.start.coords, pb.start.coords)
            assert np.array_equal(pa.goal.center, pb.goal.center)

    def test_zero_problems(self):
        assert sample_suite(SuiteSpec(n_problems=0)) == []

    def test_every_pair_straddles_a_bar(self):
        for prob in sample_suite(SuiteSpec(n_problems=10, seed=1)):
            centers = bar_centers_of(prob)
            assert chamber_id(prob.start.coords[0], centers) != chamber_id(
                prob.goal.center[0], centers
            )

    def test_starts_and_goals_collision_free(self):
        for prob in sample_suite(SuiteSpec(n_problems=10, seed=2)):
            assert prob.world.point_free(prob.start.coords)
            assert prob.world.point_free(prob.goal.center)

    def test_budget_exhaustion_raises(self):
        with pytest.raises(RuntimeError):
            sample_suite(SuiteSpec(n_problems=1, sample_budget=0))

    def test_duration_factor_caps_t_max(self):
        spec = SuiteSpec(n_problems=5, seed=3, duration_factor=1.2)
        for prob in sample_suite(spec):
            d_min = free_space_min_duration(
                prob.world,
                prob.bounds,
                spec.resolution,
                prob.start.coords,
                prob.goal.center,
                spec.vel_limit,
            )
            assert math.isfinite(d_min)
            # Never tighter than the straight-line minimum.
            straight = float(
                np.linalg.norm(prob.goal.center - prob.start.coords)
            ) / spec.vel_limit
            assert d_min >= straight - 1e-9
            expected = max(1.2 * d_min, spec.t_min)
            assert prob.limits.t_max == pytest.approx(expected)


class TestSerialization:
    def test_problem_roundtrip(self):
        prob = sample_suite(SPEC)[0]
        clone = problem_from_dict(problem_to_dict(prob))
        assert clone.name == prob.name
        assert np.array_equal(clone.start.coords, prob.start.coords)
        assert clone.limits.t_max == prob.limits.t_max
        assert len(clone.world.obstacles) == len(prob.world.obstacles)
        assert len(clone.actions) == len(prob.actions)

    def test_suite_file_roundtrip_and_reproducibility(self, tmp_path):
        problems = sample_suite(SPEC)
        f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
        write_suite(str(f1), SPEC, problems)
        write_suite(str(f2), SPEC, sample_suite(SPEC))
        assert f1.read_bytes() == f2.read_bytes()
        spec, loaded = load_suite(str(f1))
        assert spec == SPEC
        assert [p.name for p in loaded] == [p.name for p in problems]

    def test_records_file_roundtrip(self, tmp_path):
        recs = [
            BenchmarkRecord("p0", "pinsat", 1, True, 0.5, 10.0, 3, 7, "solved", "t.json"),
            BenchmarkRecord("p1", "pinsat", 1, False, 0.1, math.inf, 0, 2, "exhausted"),
        ]
        path = tmp_path / "r.jsonl"
        write_records(str(path), recs)
        assert read_records(str(path)) == recs

    def test_records_header_required(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"problem": "p"}\n')
        with pytest.raises(ValueError):
            read_records(str(path))

    def test_success_invariants(self):
        with pytest.raises(ValueError):
            BenchmarkRecord("p", "pinsat", 1, True, 0.5, math.inf, 0, 0, "solved", "t")
        with pytest.raises(ValueError):
            BenchmarkRecord("p", "pinsat", 1, True, 0.5, 1.0, 0, 0, "solved", None)


class TestRunSuite:
    def test_record_grid_shape(self, tmp_path):
        problems = sample_suite(SuiteSpec(n_problems=1, seed=5))
        recs = run_suite(
            problems,
            ["pinsat", "search_then_optimize"],
            [1, 2],
            CFG,
            traj_dir=str(tmp_path / "traj"),
        )
        assert len(recs) == 4
        assert {(r.planner, r.budget) for r in recs} == {
            ("pinsat", 1),
            ("pinsat", 2),
            ("search_then_optimize", 1),
            ("search_then_optimize", 2),
        }

    def test_zero_timeout_fails_all(self):
        problems = sample_suite(SuiteSpec(n_problems=1, seed=5))
        recs = run_suite(problems, ["pinsat"], [1], CFG, timeout=1e-9)
        assert all(not r.success for r in recs)
        assert all(r.status == "timeout" for r in recs)

    def test_single_thread_replay_identical(self, tmp_path):
        problems = sample_suite(SuiteSpec(n_problems=2, seed=5))
        a = run_suite(problems, ["insat"], [1], CFG, traj_dir=str(tmp_path / "a"))
        b = run_suite(problems, ["insat"], [1], CFG, traj_dir=str(tmp_path / "b"))
        assert [(r.success, r.cost, r.expansions) for r in a] == [
            (r.success, r.cost, r.expansions) for r in b
        ]

    def test_unknown_planner_rejected(self):
        with pytest.raises(ValueError):
            run_suite([], ["does_not_exist"], [1], CFG)


class TestAggregate:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_hand_fixture(self):
        recs = [
            BenchmarkRecord("p1", "a", 1, True, 2.0, 10.0, 1, 1, "solved", "t"),
            BenchmarkRecord("p2", "a", 1, True, 4.0, 20.0, 1, 1, "solved", "t"),
            BenchmarkRecord("p1", "b", 1, True, 6.0, 30.0, 1, 1, "solved", "t"),
            BenchmarkRecord("p2", "b", 1, False, 1.0, math.inf, 1, 1, "exhausted"),
        ]
        summary = aggregate(recs)
        assert summary["common_problems"] == ["p1"]
        by = {(g["planner"], g["budget"]): g for g in summary["groups"]}
        ga, gb = by[("a", 1)], by[("b", 1)]
        # Success rates over all problems of the group.
        assert ga["success_rate"] == 1.0
        assert gb["success_rate"] == 0.5
        # Time/cost restricted to the commonly solved subset {p1}.
        assert ga["mean_time"] == 2.0 and ga["std_time"] == 0.0
        assert ga["mean_cost"] == 10.0
        assert gb["mean_time"] == 6.0 and gb["mean_cost"] == 30.0

    def test_equal_times_zero_std(self):
        recs = [
            BenchmarkRecord(f"p{i}", "a", 1, True, 3.0, 5.0, 1, 1, "solved", "t")
            for i in range(4)
        ]
        g = aggregate(recs)["groups"][0]
        assert g["std_time"] == 0.0 and g["std_cost"] == 0.0

    def test_empty_intersection_marks_unavailable(self):
        recs = [
            BenchmarkRecord("p1", "a", 1, True, 2.0, 10.0, 1, 1, "solved", "t"),
            BenchmarkRecord("p1", "b", 1, False, 2.0, math.inf, 1, 1, "exhausted"),
        ]
        summary = aggregate(recs)
        assert summary["common_problems"] == []
        for g in summary["groups"]:
            assert g["available"] is False
            assert g["mean_time"] is None


class TestValidate:
    def test_stored_solutions_pass(self, tmp_path):
        problems = sample_suite(SuiteSpec(n_problems=1, seed=5))
        recs = run_suite(problems, ["pinsat"], [1], CFG, traj_dir=str(tmp_path))
        assert any(r.success for r in recs)
        assert validate_records(recs) == []

    def test_corrupted_trajectory_flagged(self, tmp_path):
        problems = sample_suite(SuiteSpec(n_problems=1, seed=5))
        recs = run_suite(problems, ["pinsat"], [1], CFG, traj_dir=str(tmp_path))
        rec = next(r for r in recs if r.success)
        with open(rec.trajectory_file) as fh:
            doc = json.load(fh)
        # Teleport the curve into an obstacle.
        doc["control_points"] = (np.array(doc["control_points"]) * 0.0 - 1.5).tolist()
        with open(rec.trajectory_file, "w") as fh:
            json.dump(doc, fh)
        failures = validate_records(recs)
        assert len(failures) == 1

    def test_unstored_success_flagged(self):
        rec = BenchmarkRecord("p", "pinsat", 1, True, 0.5, 1.0, 0, 0, "solved", "<unstored>")
        failures = validate_records([rec])
        assert failures and failures[0][1] == "trajectory not stored"


class TestDomainKmin:
    def test_default_domain_value_and_bracketing(self):
        k = compute_domain_kmin(SPEC)
        assert k == 5
        limits = SPEC.base_limits()
        x1, x2 = np.zeros(2), np.array([1.0, 0.0])
        tunnel = make_edge_tunnel(x1, x2, 1.0)
        assert kmin_order_feasible(x1, x2, tunnel, limits, k)
        assert not kmin_order_feasible(x1, x2, tunnel, limits, k - 1)
