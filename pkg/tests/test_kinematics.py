import math

import numpy as np
import pytest

from tubenav.kinematics import (
    DisturbanceModel,
    Pose,
    RobotParams,
    bench_disturbance,
    disturbance,
    pose_derivative,
    rotation_matrix,
    rotation_matrix_inverse,
    virtual_point,
)


class TestRotationMatrix:
    def test_zero_heading(self):
        expected = np.array([[1.0, 0.0], [0.0, 0.05]])
        assert rotation_matrix(0.05, 0.0) == pytest.approx(expected, abs=0.0)

    def test_quarter_turn(self):
        m = rotation_matrix(0.05, math.pi / 2)
        assert m == pytest.approx(np.array([[0.0, -0.05], [1.0, 0.0]]), abs=1e-16)

    def test_inverse_contract(self):
        rng = np.random.default_rng(14)
        for _ in range(1000):
            off = rng.uniform(-1, 1)
            if abs(off) < 1e-3:
                continue
            th = rng.uniform(-10, 10)
            prod = rotation_matrix(off, th) @ rotation_matrix_inverse(off, th)
            assert prod == pytest.approx(np.eye(2), abs=1e-12)

    def test_determinant_is_offset(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            off = rng.uniform(-1, 1)
            th = rng.uniform(-10, 10)
            assert float(np.linalg.det(rotation_matrix(off, th))) == pytest.approx(off, abs=1e-12)


class TestVirtualPoint:
    def test_along_heading(self):
        p = virtual_point(RobotParams(0.05, 0.2, 1.5), Pose(0.0, 0.0, 0.0))
        assert p == pytest.approx([0.05, 0.0], abs=0.0)

    def test_negative_offset_flips(self):
        p = virtual_point(RobotParams(-0.02, 0.06, 1.5), Pose(1.0, 1.0, math.pi))
        assert p == pytest.approx([1.02, 1.0], abs=1e-15)

    def test_constant_distance(self):
        rp = RobotParams(-0.02, 0.06, 1.5)
        rng = np.random.default_rng(16)
        for _ in range(500):
            pose = Pose(*rng.uniform(-2, 2, size=2), rng.uniform(-20, 20))
            d = float(np.linalg.norm(virtual_point(rp, pose) - pose.position()))
            assert d == pytest.approx(0.02, abs=1e-15)

    def test_zero_offset_rejected(self):
        with pytest.raises(ValueError):
            RobotParams(0.0, 0.2, 1.5)


class TestPoseDerivative:
    def test_rest(self):
        d = pose_derivative(Pose(1.0, 2.0, 0.3), [0.0, 0.0], [0.0, 0.0])
        assert d == pytest.approx([0.0, 0.0, 0.0], abs=0.0)

    def test_pure_turn(self):
        d = pose_derivative(Pose(0.0, 0.0, 0.7), [0.0, 1.5], [0.0, 0.0])
        assert d == pytest.approx([0.0, 0.0, 1.5], abs=0.0)

    def test_forward_along_heading(self):
        d = pose_derivative(Pose(0.0, 0.0, math.pi / 2), [1.0, 0.0], [0.0, 0.0])
        assert d == pytest.approx([0.0, 1.0, 0.0], abs=1e-15)

    def test_point_velocity_matches_steering_map(self):
        # The controlled point's velocity must equal the steering map applied to
        # the total input. Oracle: central finite differences along the flow.
        rp = RobotParams(0.05, 0.2, 1.5)
        rng = np.random.default_rng(17)
        h = 1e-5
        for _ in range(300):
            pose = Pose(*rng.uniform(-1, 1, size=2), rng.uniform(-5, 5))
            u = rng.uniform(-1, 1, size=2)
            ud = rng.uniform(-0.05, 0.05, size=2)
            dp = pose_derivative(pose, u, ud)
            fwd = Pose(pose.x + h * dp[0], pose.y + h * dp[1], pose.heading + h * dp[2])
            back = Pose(pose.x - h * dp[0], pose.y - h * dp[1], pose.heading - h * dp[2])
            fd = (virtual_point(rp, fwd) - virtual_point(rp, back)) / (2 * h)
            expected = rotation_matrix(rp.point_offset, pose.heading) @ (u + ud)
            assert fd == pytest.approx(expected, abs=1e-8)


class TestDisturbance:
    def test_none_kind(self):
        assert disturbance(DisturbanceModel(), 3.7) == pytest.approx([0.0, 0.0], abs=0.0)

    def test_bench_at_zero(self):
        assert disturbance(bench_disturbance(), 0.0) == pytest.approx([0.01, -0.01], abs=1e-17)

    def test_bench_components(self):
        m = bench_disturbance()
        for t in (0.0, 1.3, 7.9, 100.0):
            v = disturbance(m, t)
            assert v[0] == pytest.approx(0.01 * (math.sin(0.2 * t) + 1.0), abs=1e-15)
            assert v[1] == pytest.approx(0.01 * (math.cos(0.3 * t) - 2.0), abs=1e-15)

    def test_sampled_sup(self):
        # Oracle: dense sampling over the common period 20*pi. The two phases
        # never hit their extremes together, so the sup sits below the
        # component-extremes envelope that the declared bound uses.
        m = bench_disturbance()
        t = np.linspace(0.0, 20.0 * math.pi, 2_000_001)
        norms = np.hypot(
            0.01 * (np.sin(0.2 * t) + 1.0), 0.01 * (np.cos(0.3 * t) - 2.0)
        )
        sup = float(norms.max())
        assert sup == pytest.approx(0.035480514029641, abs=1e-9)
        assert sup <= m.bound
        assert m.bound == pytest.approx(0.01 * math.sqrt(13.0), abs=1e-15)

    def test_never_exceeds_declared_bound(self):
        m = bench_disturbance()
        t = np.linspace(0.0, 500.0, 200_001)
        norms = np.hypot(
            0.01 * (np.sin(0.2 * t) + 1.0), 0.01 * (np.cos(0.3 * t) - 2.0)
        )
        assert float(norms.max()) <= m.bound

    def test_custom_kind(self):
        m = DisturbanceModel(kind="custom", bound=0.1, signal=lambda t: np.array([0.1, 0.0]))
        assert disturbance(m, 5.0) == pytest.approx([0.1, 0.0], abs=0.0)
        with pytest.raises(ValueError):
            DisturbanceModel(kind="custom", bound=0.1)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            DisturbanceModel(kind="random-walk")
