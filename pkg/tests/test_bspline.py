import numpy as np
import pytest

from kinoplan.bspline import (
    Box,
    BSplineCurve,
    KnotVector,
    active_hull_box,
    basis,
    clamped_knots,
    derivative_control_points,
    derivative_curve,
    evaluate,
    reconstruct,
)


def random_curve(rng, degree=None, num_ctrl=None, dim=2):
    degree = degree if degree is not None else int(rng.integers(1, 6))
    num_ctrl = num_ctrl if num_ctrl is not None else degree + 1 + int(rng.integers(0, 5))
    pts = rng.uniform(-3.0, 3.0, size=(num_ctrl, dim))
    return BSplineCurve(clamped_knots(degree, num_ctrl), pts)


def naive_basis(u, i, k, t):
    """Independent textbook recursion transcription used as the oracle."""
    if k == 0:
        if u[i] <= t < u[i + 1]:
            return 1.0
        if t == u[-1] and u[i] < u[i + 1] == u[-1]:
            return 1.0
        return 0.0
    left = 0.0
    if u[i + k] != u[i]:
        left = (t - u[i]) / (u[i + k] - u[i]) * naive_basis(u, i, k - 1, t)
    right = 0.0
    if u[i + k + 1] != u[i + 1]:
        right = (u[i + k + 1] - t) / (u[i + k + 1] - u[i + 1]) * naive_basis(u, i + 1, k - 1, t)
    return left + right


class TestBasis:
    def test_degree_zero_indicator(self):
        kv = KnotVector((0.0, 1.0), 0)
        assert basis(0, 0, 0.5, kv) == 1.0

    def test_partition_of_unity_random(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            k = int(rng.integers(1, 6))
            n = k + 1 + int(rng.integers(0, 6))
            kv = clamped_knots(k, n)
            t = float(rng.uniform(0.0, 1.0))
            total = sum(basis(i, k, t, kv) for i in range(n))
            assert abs(total - 1.0) < 1e-12
        # Endpoints included
        kv = clamped_knots(3, 6)
        for t in (0.0, 1.0):
            assert abs(sum(basis(i, 3, t, kv) for i in range(6)) - 1.0) < 1e-12

    def test_non_negativity_and_local_support(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            k = int(rng.integers(1, 6))
            n = k + 1 + int(rng.integers(0, 6))
            kv = clamped_knots(k, n)
            t = float(rng.uniform(0.0, 1.0))
            u = kv.knots
            for i in range(n):
                val = basis(i, k, t, kv)
                assert val >= 0.0
                if t < u[i] or t > u[i + k + 1]:
                    assert val == 0.0

    def test_matches_hand_unrolled_oracle(self):
        kv = clamped_knots(2, 4)  # knots (0,0,0,0.5,1,1,1)
        t = 0.5
        expected = [naive_basis(kv.knots, i, 2, t) for i in range(4)]
        got = [basis(i, 2, t, kv) for i in range(4)]
        assert got == pytest.approx(expected, abs=1e-15)
        assert abs(sum(expected) - 1.0) < 1e-12
        # Symmetry of the uniform clamped layout at midpoint
        assert got[1] == pytest.approx(got[2], abs=1e-15)

    def test_errors(self):
        kv = clamped_knots(2, 4)
        with pytest.raises(IndexError):
            basis(7, 2, 0.5, kv)
        with pytest.raises(ValueError):
            basis(0, 2, 1.5, kv)


class TestKnots:
    def test_straight_segment(self):
        kv = clamped_knots(1, 2, 0.0, 1.0)
        assert kv.knots == (0.0, 0.0, 1.0, 1.0)

    def test_bezier_case(self):
        kv = clamped_knots(3, 4, 0.0, 1.0)
        assert kv.knots == (0.0,) * 4 + (1.0,) * 4

    def test_interior_uniform_and_endpoint_interpolation(self):
        kv = clamped_knots(2, 5, 0.0, 2.0)
        inner = kv.knots[3:-3]
        assert np.allclose(inner, np.linspace(0.0, 2.0, 4)[1:-1])
        pts = np.arange(10.0).reshape(5, 2)
        curve = BSplineCurve(kv, pts)
        assert np.allclose(evaluate(curve, 0.0), pts[0], atol=1e-12)
        assert np.allclose(evaluate(curve, 2.0), pts[-1], atol=1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            clamped_knots(3, 3)


class TestEvaluate:
    def test_collinear_points_stay_on_line(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        curve = BSplineCurve(clamped_knots(2, 4), pts)
        for t in np.linspace(0.0, 1.0, 23):
            p = evaluate(curve, t)
            assert abs(p[0] - p[1]) < 1e-12

    def test_clamped_interpolation(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            curve = random_curve(rng)
            assert np.allclose(evaluate(curve, 0.0), curve.control_points[0], atol=1e-12)
            assert np.allclose(evaluate(curve, 1.0), curve.control_points[-1], atol=1e-12)

    def test_square_corner_inside_bounding_box(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        curve = BSplineCurve(clamped_knots(2, 4), pts)
        for t in np.linspace(0.0, 1.0, 200):
            p = evaluate(curve, t)
            assert np.all(p >= -1e-12) and np.all(p <= 1.0 + 1e-12)


class TestDerivatives:
    def test_constant_curve_zero_derivative(self):
        pts = np.tile([1.5, -2.0], (5, 1))
        curve = BSplineCurve(clamped_knots(3, 5), pts)
        for j in (1, 2, 3):
            assert np.allclose(derivative_control_points(curve, j), 0.0)

    def test_order_zero_identity(self):
        rng = np.random.default_rng(3)
        curve = random_curve(rng, degree=3, num_ctrl=6)
        assert np.array_equal(derivative_control_points(curve, 0), curve.control_points)

    def test_bezier_first_derivative(self):
        pts = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, -1.0], [4.0, 4.0]])
        curve = BSplineCurve(clamped_knots(3, 4), pts)
        got = derivative_control_points(curve, 1)
        assert np.allclose(got, 3.0 * (pts[1:] - pts[:-1]), atol=1e-12)

    def test_order_exceeds_degree(self):
        rng = np.random.default_rng(4)
        curve = random_curve(rng, degree=2, num_ctrl=5)
        with pytest.raises(ValueError):
            derivative_control_points(curve, 3)

    def test_derivative_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        h = 1e-6
        for _ in range(5):
            curve = random_curve(rng, degree=int(rng.integers(2, 6)))
            dcurve = derivative_curve(curve, 1)
            scale = max(1.0, float(np.abs(dcurve.control_points).max()))
            for t in rng.uniform(h, 1.0 - h, size=20):
                fd = (evaluate(curve, t + h) - evaluate(curve, t - h)) / (2 * h)
                an = evaluate(dcurve, t)
                assert np.max(np.abs(an - fd)) / scale < 1e-5

    def test_straight_line_derivative_constant(self):
        pts = np.array([[0.0], [2.0]])
        curve = BSplineCurve(clamped_knots(1, 2), pts)
        d = derivative_curve(curve, 1)
        for t in np.linspace(0.0, 1.0, 7):
            assert np.allclose(evaluate(d, t), 2.0, atol=1e-12)

    def test_second_derivative_composition(self):
        rng = np.random.default_rng(6)
        curve = random_curve(rng, degree=4, num_ctrl=8)
        twice = derivative_curve(derivative_curve(curve, 1), 1)
        direct = derivative_curve(curve, 2)
        for t in np.linspace(0.0, 1.0, 40):
            assert np.allclose(evaluate(twice, t), evaluate(direct, t), atol=1e-9)


class TestHullBox:
    def test_linear_segment_box(self):
        pts = np.array([[0.0, 0.0], [2.0, 3.0]])
        curve = BSplineCurve(clamped_knots(1, 2), pts)
        box = active_hull_box(curve, 0.5)
        assert np.allclose(box.lower, [0.0, 0.0])
        assert np.allclose(box.upper, [2.0, 3.0])

    def test_evaluate_inside_box_sweep(self):
        rng = np.random.default_rng(7)
        violations = 0
        for _ in range(3):
            curve = random_curve(rng)
            for t in rng.uniform(0.0, 1.0, size=50):
                box = active_hull_box(curve, t)
                if not box.contains(evaluate(curve, t), tol=1e-10):
                    violations += 1
        assert violations == 0


class TestReconstruct:
    def test_stationary(self):
        pts = np.tile([0.5, 0.5], (6, 1))
        s = reconstruct(pts, 2.0, 3, 50)
        assert np.allclose(s.velocity, 0.0)
        assert np.allclose(s.acceleration, 0.0)
        assert np.allclose(s.jerk, 0.0)

    def test_duration_scaling_law(self):
        rng = np.random.default_rng(8)
        pts = rng.uniform(-1.0, 1.0, size=(7, 2))
        a = reconstruct(pts, 1.0, 3, 60)
        b = reconstruct(pts, 2.0, 3, 60)
        assert np.allclose(b.velocity * 2.0, a.velocity, atol=1e-12)
        assert np.allclose(b.acceleration * 4.0, a.acceleration, atol=1e-12)
        assert np.allclose(b.jerk * 8.0, a.jerk, atol=1e-12)

    def test_grid_nesting(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(-1.0, 1.0, size=(6, 2))
        coarse = reconstruct(pts, 1.5, 3, 101)
        fine = reconstruct(pts, 1.5, 3, 1001)
        assert np.allclose(coarse.position, fine.position[::10], atol=1e-9)
        assert np.allclose(coarse.velocity, fine.velocity[::10], atol=1e-9)


class TestBox:
    def test_invalid(self):
        with pytest.raises(ValueError):
            Box(np.array([1.0]), np.array([0.0]))

    def test_contains(self):
        box = Box(np.zeros(2), np.ones(2))
        assert box.contains([0.5, 0.5])
        assert not box.contains([1.5, 0.5])
