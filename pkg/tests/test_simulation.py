"""Simulation engine: reference flow, tube-tracking loop, baselines, serialization."""

import json
import math

import numpy as np
import pytest

from scenarios import CROWDED_GOAL, crowded_world, empty_world
from tubenav.controller import ControllerParams, input_norm_bound
from tubenav.errors import DomainError
from tubenav.geometry import workspace_erosion_distance
from tubenav.kinematics import DisturbanceModel, Pose, RobotParams, bench_disturbance
from tubenav.planner import PfParams, PlannerParams, stationary_point
from tubenav.simulation import (
    CSV_HEADER,
    CSV_HEADER_REF,
    SimConfig,
    Trajectory,
    batch_run,
    compute_metrics,
    integrate_closed_loop,
    integrate_reference,
    metrics_to_json,
    pf_closed_loop,
    sample_free_points,
    trajectory_from_csv,
    trajectory_to_csv,
)


def planner(**kw):
    kw.setdefault("max_speed", 0.03)
    kw.setdefault("softening", 0.005)
    kw.setdefault("goal", CROWDED_GOAL)
    return PlannerParams(**kw)


def controller():
    return ControllerParams(
        tube_radius=0.06,
        gain=0.1,
        smoothing=0.005,
        adapt_rate=0.1,
        leak_rate=0.01,
        disturbance_cap=0.03,
        projection_band=0.005,
        initial_estimate=0.01,
    )


def robot():
    return RobotParams(point_offset=0.05, body_radius=0.2, input_limit=1.5)


# axle pose whose controlled point (-2.85, -1.25) sits well inside the free set
CORNER_POSE = Pose(-2.9, -1.25, 0.0)


@pytest.fixture(scope="module")
def corner_ref():
    """Reference flow across the whole arena, corner to goal."""
    sim = SimConfig(dt=0.01, duration=500.0)
    return integrate_reference(planner(), crowded_world(), [-2.9, -1.3], sim)


@pytest.fixture(scope="module")
def bench_cl():
    """Full disturbed closed-loop crossing."""
    sim = SimConfig(dt=0.01, duration=500.0, start_pose=CORNER_POSE)
    return integrate_closed_loop(
        planner(), controller(), robot(), bench_disturbance(), crowded_world(), sim
    )


class TestSimConfig:
    def test_unknown_integrator_rejected(self):
        with pytest.raises(ValueError, match="integrator"):
            SimConfig(integrator="heun")

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(ValueError, match="dt"):
            SimConfig(dt=0.0)

    def test_step_count_rounds(self):
        assert SimConfig(dt=0.01, duration=500.0).steps == 50000
        assert SimConfig(dt=0.1, duration=0.25).steps == 2


class TestReference:
    def test_start_at_goal_logs_single_row(self):
        sim = SimConfig(dt=0.01, duration=10.0)
        traj = integrate_reference(planner(), crowded_world(), CROWDED_GOAL, sim)
        assert len(traj.t) == 1
        assert traj.t[0] == 0.0
        m = compute_metrics(traj)
        assert m.reached_goal and m.settling_time == 0.0 and m.ref_path_length == 0.0

    def test_zero_duration_logs_single_row(self):
        sim = SimConfig(dt=0.01, duration=0.0)
        traj = integrate_reference(planner(), crowded_world(), [-1.5, 1.2], sim)
        assert len(traj.t) == 1
        assert not compute_metrics(traj).reached_goal

    def test_start_inside_obstacle_margin_rejected(self):
        w = crowded_world()
        with pytest.raises(DomainError, match="free space"):
            integrate_reference(planner(), w, w.obstacles[2].center, SimConfig())

    def test_goal_inside_obstacle_margin_rejected(self):
        w = crowded_world()
        bad = planner(goal=w.obstacles[0].center)
        with pytest.raises(DomainError, match="goal"):
            integrate_reference(bad, w, [-1.5, 1.2], SimConfig())

    def test_reaches_goal_from_corner(self, corner_ref):
        m = compute_metrics(corner_ref)
        assert m.reached_goal
        assert m.settling_time is not None and m.settling_time < 500.0
        assert m.terminal_goal_distance <= 0.01

    def test_time_grid_is_exact(self, corner_ref):
        n = len(corner_ref.t)
        for i in (0, 1, 7, 1000, n - 1):
            assert corner_ref.t[i] == i * 0.01

    def test_clearance_never_dips_below_margin(self, corner_ref):
        w = crowded_world()
        assert corner_ref.ref_clearance.min() >= w.margin - 1e-6
        erosion = np.array(
            [workspace_erosion_distance(w, x) for x in corner_ref.reference]
        )
        assert erosion.min() >= w.margin - 1e-6

    def test_goal_distance_monotone(self, corner_ref):
        dist = np.linalg.norm(corner_ref.reference - corner_ref.goal, axis=1)
        assert np.all(np.diff(dist) <= 1e-9)

    def test_per_step_displacement_capped(self, corner_ref):
        steps = np.linalg.norm(np.diff(corner_ref.reference, axis=0), axis=1)
        assert steps.max() <= 0.03 * 0.01 * (1.0 + 1e-9)

    def test_rides_manifold_to_rest_point(self):
        # start on the radial ray behind the widest obstacle, at the influence
        # edge; the flow crawls down the shrinking normal component and parks
        # at the rest point without crossing the margin ring
        w = crowded_world()
        p = planner()
        s = stationary_point(p, w, 2)
        c = w.obstacles[2].center
        ray = (s - c) / np.linalg.norm(s - c)
        edge = w.robot_radius + w.obstacles[2].radius + w.influence
        traj = integrate_reference(p, w, c + edge * ray, SimConfig(dt=0.01, duration=500.0))
        assert not compute_metrics(traj).reached_goal
        assert float(np.linalg.norm(traj.reference[-1] - s)) < 1e-3
        assert traj.ref_clearance.min() >= w.margin - 1e-6


class TestIntegratorOrder:
    """Error against a fine-step truth halves (Euler) or /16s (RK4) per dt halving."""

    def _terminal(self, dt, integrator):
        p = PlannerParams(max_speed=1.0, softening=0.5, goal=[2.0, 1.0])
        sim = SimConfig(dt=dt, duration=2.0, goal_tol=1e-12, integrator=integrator)
        return integrate_reference(p, empty_world(), [-2.0, -1.0], sim).reference[-1]

    def test_convergence_orders(self):
        truth = self._terminal(0.0005, "rk4")
        errs = {
            integ: [
                float(np.linalg.norm(self._terminal(dt, integ) - truth))
                for dt in (0.2, 0.1, 0.05)
            ]
            for integ in ("euler", "rk4")
        }
        for a, b in zip(errs["euler"], errs["euler"][1:]):
            assert 1.8 < a / b < 2.2
        for a, b in zip(errs["rk4"], errs["rk4"][1:]):
            assert 14.5 < a / b < 17.5
        assert errs["rk4"][0] < errs["euler"][2]


class TestClosedLoop:
    def test_requires_start_pose(self):
        with pytest.raises(ValueError, match="start pose"):
            integrate_closed_loop(
                planner(), controller(), robot(), DisturbanceModel(), crowded_world(), SimConfig()
            )

    def test_start_point_outside_free_space_rejected(self):
        w = crowded_world()
        c = w.obstacles[2].center
        sim = SimConfig(start_pose=Pose(c[0] - 0.05, c[1], 0.0))
        with pytest.raises(DomainError, match="free space"):
            integrate_closed_loop(planner(), controller(), robot(), DisturbanceModel(), w, sim)

    def test_start_at_goal_logs_single_row(self):
        sim = SimConfig(duration=10.0, start_pose=Pose(2.45, 1.0, 0.0))
        traj = integrate_closed_loop(
            planner(), controller(), robot(), DisturbanceModel(), crowded_world(), sim
        )
        assert len(traj.t) == 1 and compute_metrics(traj).reached_goal

    def test_undisturbed_tracking_is_tight(self):
        # only the zero-order hold separates the point from the flow it chases
        sim = SimConfig(dt=0.01, duration=60.0, start_pose=CORNER_POSE)
        traj = integrate_closed_loop(
            planner(), controller(), robot(), DisturbanceModel(), crowded_world(), sim
        )
        assert float(np.linalg.norm(traj.error, axis=1).max()) < 1e-4

    def test_logged_reference_matches_standalone_flow(self):
        sim = SimConfig(dt=0.01, duration=30.0, start_pose=CORNER_POSE)
        cl = integrate_closed_loop(
            planner(), controller(), robot(), DisturbanceModel(), crowded_world(), sim
        )
        ref = integrate_reference(
            planner(), crowded_world(), cl.point[0], SimConfig(dt=0.01, duration=30.0)
        )
        n = min(len(cl.t), len(ref.t))
        assert np.array_equal(cl.reference[:n], ref.reference[:n])

    def test_disturbed_crossing_reaches_goal(self, bench_cl):
        m = compute_metrics(bench_cl)
        assert m.reached_goal and not m.tube_violated

    def test_error_stays_deep_inside_tube(self, bench_cl):
        max_err = float(np.linalg.norm(bench_cl.error, axis=1).max())
        assert max_err < 0.01
        assert np.all(bench_cl.ratio < 1.0)

    def test_estimate_stays_in_admissible_band(self, bench_cl):
        c = controller()
        hi = c.disturbance_cap + c.projection_band
        assert bench_cl.estimate.min() >= 0.0
        assert bench_cl.estimate.max() <= hi + 1e-12
        assert bench_cl.estimate.max() > c.initial_estimate

    def test_commands_respect_derived_bound(self, bench_cl):
        bound = input_norm_bound(controller(), 0.03, 0.05)
        assert float(np.linalg.norm(bench_cl.command, axis=1).max()) <= bound

    def test_actual_clearance_keeps_theory_floor(self, bench_cl):
        w = crowded_world()
        c = controller()
        assert bench_cl.act_clearance.min() >= w.margin - c.tube_radius
        erosion = np.array([workspace_erosion_distance(w, x) for x in bench_cl.point])
        assert erosion.min() >= w.margin - c.tube_radius

    def test_overwhelming_drift_flags_violation(self):
        # constant 0.5 m/s drift dwarfs what the adaptive term may cancel
        drift = DisturbanceModel(kind="custom", signal=lambda t: np.array([0.5, 0.0]), bound=0.5)
        sim = SimConfig(dt=0.01, duration=50.0, start_pose=CORNER_POSE)
        traj = integrate_closed_loop(
            planner(), controller(), robot(), drift, crowded_world(), sim
        )
        assert traj.tube_violated
        assert len(traj.t) < sim.steps + 1
        assert traj.ratio[-1] >= 1.0
        assert np.all(traj.command[-1] == 0.0)
        assert compute_metrics(traj).tube_violated

    def test_input_clamp_caps_command_norm(self):
        # a tiny input limit forces the clamp on from the first step
        sim = SimConfig(dt=0.01, duration=5.0, start_pose=CORNER_POSE, clamp_input=True)
        small = RobotParams(point_offset=0.05, body_radius=0.2, input_limit=0.01)
        traj = integrate_closed_loop(
            planner(), controller(), small, bench_disturbance(), crowded_world(), sim
        )
        norms = np.linalg.norm(traj.command, axis=1)
        assert norms.max() <= 0.01 * (1.0 + 1e-12)


class TestPfLoop:
    def test_undisturbed_run_tracks_its_flow(self):
        pf = PfParams(attract_gain=0.05, repulse_gain=0.0001, goal=CROWDED_GOAL)
        sim = SimConfig(dt=0.01, duration=500.0, start_pose=CORNER_POSE)
        traj = pf_closed_loop(pf, robot(), DisturbanceModel(), crowded_world(), sim, tube_radius=0.06)
        m = compute_metrics(traj)
        assert m.reached_goal and traj.aborted is None
        # pose-space and point-space discretizations differ, so the deviation
        # is nonzero even without disturbance, just small
        assert m.max_error_norm < 0.01

    def test_head_on_approach_hits_singularity(self):
        # symmetric start, goal, and obstacle: the gradient cannot break the
        # tie, the flow presses into the clearance ring, and a step lands past
        # it where the potential is undefined
        from tubenav.geometry import Obstacle, RectangleWorkspace, World

        w = World(
            workspace=RectangleWorkspace(center=[0.0, 0.0], half_extents=[3.2, 1.7]),
            obstacles=(Obstacle(center=[0.0, 0.0], radius=0.35),),
            robot_radius=0.2,
            clearance=0.2,
            margin=0.1,
            influence=0.2,
        )
        pf = PfParams(attract_gain=0.05, repulse_gain=1e-8, goal=[2.5, 0.0])
        sim = SimConfig(dt=0.01, duration=200.0, start_pose=Pose(-2.05, 0.0, 0.0))
        traj = pf_closed_loop(pf, robot(), DisturbanceModel(), w, sim, tube_radius=0.06)
        assert traj.aborted is not None and "clearance term" in traj.aborted
        assert len(traj.t) < sim.steps + 1
        assert not compute_metrics(traj).reached_goal


class TestBatchAndSampling:
    def test_batch_keeps_order_and_captures_failures(self):
        w = crowded_world()
        starts = [CROWDED_GOAL, w.obstacles[2].center, [-2.9, -1.3]]
        outcomes = batch_run(planner(), w, starts, SimConfig(dt=0.01, duration=5.0))
        assert [o.index for o in outcomes] == [0, 1, 2]
        assert outcomes[0].metrics.reached_goal
        assert outcomes[1].trajectory is None and "free space" in outcomes[1].error
        assert outcomes[2].error is None and not outcomes[2].metrics.reached_goal

    def test_sampling_is_deterministic(self):
        w = crowded_world()
        a = sample_free_points(w, 20, seed=1)
        b = sample_free_points(w, 20, seed=1)
        c = sample_free_points(w, 20, seed=2)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_samples_respect_margin(self):
        w = crowded_world()
        from tubenav.geometry import in_free_space

        for x in sample_free_points(w, 50, seed=3, margin=0.3):
            assert in_free_space(w, x, margin=0.3)

    def test_sampling_stalls_on_impossible_margin(self):
        with pytest.raises(RuntimeError, match="stalled"):
            sample_free_points(crowded_world(), 1, seed=0, margin=10.0)


class TestMetrics:
    def test_reference_only_arithmetic(self):
        traj = Trajectory(
            t=np.array([0.0, 0.01, 0.02]),
            reference=np.array([[0.0, 0.0], [0.01, 0.0], [0.02, 0.0]]),
            ref_clearance=np.array([0.5, 0.45, 0.4]),
            goal=np.array([0.02, 0.0]),
            goal_tol=0.0105,
        )
        m = compute_metrics(traj)
        assert m.reached_goal
        assert m.settling_time == 0.01
        assert m.terminal_goal_distance == 0.0
        assert m.ref_path_length == pytest.approx(0.02)
        assert m.min_ref_clearance == 0.4
        assert m.act_path_length is None and m.max_error_norm is None
        assert not m.tube_violated

    def test_ratio_scan_flags_violation(self):
        traj = Trajectory(
            t=np.array([0.0, 0.01]),
            reference=np.zeros((2, 2)),
            ref_clearance=np.array([0.5, 0.5]),
            goal=np.array([5.0, 0.0]),
            goal_tol=0.01,
            pose=np.zeros((2, 3)),
            point=np.array([[0.0, 0.0], [0.03, 0.04]]),
            error=np.array([[0.0, 0.0], [0.03, 0.04]]),
            ratio=np.array([0.5, 1.2]),
            command=np.array([[0.0, 0.0], [0.3, 0.4]]),
            estimate=np.array([0.01, 0.02]),
            act_clearance=np.array([0.5, 0.45]),
        )
        m = compute_metrics(traj)
        assert m.tube_violated
        assert not m.reached_goal and m.settling_time is None
        assert m.act_path_length == pytest.approx(0.05)
        assert m.max_error_norm == pytest.approx(0.05)
        assert m.max_command_norm == pytest.approx(0.5)
        assert m.min_act_clearance == 0.45

    def test_json_round_trip(self, corner_ref):
        m = compute_metrics(corner_ref)
        assert json.loads(metrics_to_json(m)) == m.to_dict()


class TestCsv:
    def test_reference_round_trip_is_lossless(self, corner_ref):
        text = trajectory_to_csv(corner_ref)
        assert text.splitlines()[0] == CSV_HEADER_REF
        back = trajectory_from_csv(text, goal=CROWDED_GOAL, goal_tol=0.01)
        assert not back.closed_loop
        assert np.array_equal(back.t, corner_ref.t)
        assert np.array_equal(back.reference, corner_ref.reference)
        assert np.array_equal(back.ref_clearance, corner_ref.ref_clearance)
        assert compute_metrics(back).to_dict() == compute_metrics(corner_ref).to_dict()

    def test_closed_loop_round_trip_is_lossless(self, bench_cl):
        text = trajectory_to_csv(bench_cl)
        assert text.splitlines()[0] == CSV_HEADER
        back = trajectory_from_csv(text, goal=CROWDED_GOAL, goal_tol=0.01)
        assert back.closed_loop
        for name in ("t", "reference", "pose", "point", "error", "ratio",
                     "command", "estimate", "ref_clearance", "act_clearance"):
            assert np.array_equal(getattr(back, name), getattr(bench_cl, name)), name
        assert back.tube_violated == bench_cl.tube_violated

    def test_fresh_runs_serialize_identically(self):
        def run():
            sim = SimConfig(dt=0.01, duration=20.0, start_pose=CORNER_POSE)
            return trajectory_to_csv(
                integrate_closed_loop(
                    planner(), controller(), robot(), bench_disturbance(), crowded_world(), sim
                )
            )

        assert run() == run()

    def test_unknown_header_rejected(self):
        with pytest.raises(ValueError, match="header"):
            trajectory_from_csv("a,b,c\n1,2,3\n")
