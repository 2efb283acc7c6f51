"""Fixed-step simulation of the reference flow and the tube-tracking closed loop.

All runs are deterministic: fixed step, fixed evaluation order, seeded
sampling. The commanded inputs are recomputed once per step and held over it
(a sampled-data controller); the disturbance-bound estimator advances by one
explicit-Euler step per control period with a hard clamp to its admissible
band.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .controller import (
    AdaptiveState,
    ControllerParams,
    adaptive_update,
    robust_term,
    transformed_error,
    z_vector,
)
from .errors import DomainError, PotentialSingularityError
from .geometry import World, in_free_space, obstacle_distance
from .kinematics import (
    DisturbanceModel,
    Pose,
    RobotParams,
    disturbance,
    pose_derivative,
    rotation_matrix_inverse,
    virtual_point,
)
from .planner import PfParams, PlannerParams, field, pf_field, require_valid_goal

INTEGRATORS = ("euler", "rk4")


@dataclass(frozen=True, eq=False)
class SimConfig:
    dt: float = 0.01
    duration: float = 500.0
    goal_tol: float = 0.01
    integrator: str = "rk4"
    clamp_input: bool = False
    start_pose: Pose | None = None
    seed: int = 0

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration >= 0:
            raise ValueError("duration must be nonnegative")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(eq=False)
class Trajectory:
    """Logged run. Reference-only runs leave the actual-state columns as None.

    Rows are states at t_i = i*dt; `command` row i is the input computed from
    row i's states and held over the following step (zero on a row where the
    tube was already violated, since the controller has nothing to offer
    there).
    """

    t: np.ndarray
    reference: np.ndarray  # (N, 2) planned point
    ref_clearance: np.ndarray  # (N,) obstacle distance of the planned point
    goal: np.ndarray | None
    goal_tol: float
    pose: np.ndarray | None = None  # (N, 3) axle pose
    point: np.ndarray | None = None  # (N, 2) controlled point
    error: np.ndarray | None = None  # (N, 2) point - reference
    ratio: np.ndarray | None = None  # (N,) squared error over squared tube radius
    command: np.ndarray | None = None  # (N, 2) held inputs
    estimate: np.ndarray | None = None  # (N,)
    act_clearance: np.ndarray | None = None  # (N,)
    tube_violated: bool = False
    aborted: str | None = None

    @property
    def closed_loop(self) -> bool:
        return self.pose is not None


@dataclass(eq=False)
class Metrics:
    reached_goal: bool
    settling_time: float | None
    terminal_goal_distance: float | None
    ref_path_length: float
    act_path_length: float | None
    min_ref_clearance: float
    min_act_clearance: float | None
    max_error_norm: float | None
    max_command_norm: float | None
    tube_violated: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _stepper(f, dt: float, integrator: str):
    """One explicit step of dy/dt = f(t, y)."""
    if integrator == "euler":

        def step(t, y):
            return y + dt * f(t, y)

    else:

        def step(t, y):
            k1 = f(t, y)
            k2 = f(t + 0.5 * dt, y + (0.5 * dt) * k1)
            k3 = f(t + 0.5 * dt, y + (0.5 * dt) * k2)
            k4 = f(t + dt, y + dt * k3)
            return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return step


def _planner_field(params, world: World):
    if isinstance(params, PfParams):
        return lambda t, x: pf_field(params, world, x)
    return lambda t, x: field(params, world, x)


def integrate_reference(params, world: World, start, sim: SimConfig) -> Trajectory:
    """Flow the planned point along the velocity field until the goal or timeout.

    The start must sit in the retained free space; the run stops on the first
    row within goal_tol of the goal (a start already there logs a single row).
    """
    require_valid_goal(params, world)
    x = np.asarray(start, dtype=float)
    if not in_free_space(world, x, margin=world.margin):
        raise DomainError(f"start ({x[0]:g}, {x[1]:g}) outside the retained free space")

    step = _stepper(_planner_field(params, world), sim.dt, sim.integrator)
    goal = params.goal
    gx, gy = float(goal[0]), float(goal[1])
    ts, xs = [], []
    for i in range(sim.steps + 1):
        ts.append(i * sim.dt)
        xs.append(x)
        if math.hypot(x[0] - gx, x[1] - gy) <= sim.goal_tol or i == sim.steps:
            break
        x = step(i * sim.dt, x)

    ref = np.array(xs)
    return Trajectory(
        t=np.array(ts),
        reference=ref,
        ref_clearance=_clearances(world, ref),
        goal=goal.copy(),
        goal_tol=sim.goal_tol,
    )


def _clearances(world: World, pts: np.ndarray) -> np.ndarray:
    if not world.obstacles:
        return np.full(len(pts), math.inf)
    diff = pts[:, None, :] - world.centers[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1]) - world.radii[None, :] - world.robot_radius
    return d.min(axis=1)


def integrate_closed_loop(
    planner: PlannerParams,
    ctrl: ControllerParams,
    robot: RobotParams,
    model: DisturbanceModel,
    world: World,
    sim: SimConfig,
) -> Trajectory:
    """Drive the robot so its controlled point tracks the planned flow.

    Commands are recomputed from the logged states once per step and held; the
    pose and the reference advance by the configured integrator over the step,
    with the disturbance evaluated at the integrator's stage times. The run
    stops when the controlled point reaches the goal tolerance, the duration
    runs out, or the tracking error reaches the tube wall (flagged, not
    raised).
    """
    if sim.start_pose is None:
        raise ValueError("closed-loop run needs a start pose")
    require_valid_goal(planner, world)
    pose = sim.start_pose
    x_d = virtual_point(robot, pose)
    if not in_free_space(world, x_d, margin=world.margin):
        raise DomainError("start pose puts the controlled point outside the retained free space")

    ref_step = _stepper(_planner_field(planner, world), sim.dt, sim.integrator)
    state = AdaptiveState(ctrl.initial_estimate)
    goal = planner.goal
    gx, gy = float(goal[0]), float(goal[1])

    # the closure reads the command assigned below on each call, so one stepper
    # serves the whole run despite the zero-order hold
    u = np.zeros(2)
    pose_step = _stepper(
        lambda tt, y: pose_derivative(Pose(y[0], y[1], y[2]), u, disturbance(model, tt)),
        sim.dt,
        sim.integrator,
    )

    ts, refs, poses, points, errors, ratios, commands, estimates = ([] for _ in range(8))
    tube_violated = False

    for i in range(sim.steps + 1):
        t = i * sim.dt
        x = virtual_point(robot, pose)
        x_e = x - x_d
        xi = transformed_error(ctrl, x_e)
        violated = xi >= 1.0

        if violated:
            u = np.zeros(2)
            z = None
        else:
            z = z_vector(ctrl, x_e)
            tau = field(planner, world, x_d)
            desired = -ctrl.gain * x_e + tau - robust_term(ctrl, state, z)
            u = rotation_matrix_inverse(robot.point_offset, pose.heading) @ desired
            if sim.clamp_input:
                norm = math.hypot(u[0], u[1])
                if norm > robot.input_limit:
                    u = u * (robot.input_limit / norm)

        y0 = np.array([pose.x, pose.y, pose.heading])
        ts.append(t)
        refs.append(x_d)
        poses.append(y0)
        points.append(x)
        errors.append(x_e)
        ratios.append(xi)
        commands.append(u)
        estimates.append(state.estimate)

        if violated:
            tube_violated = True
            break
        if math.hypot(x[0] - gx, x[1] - gy) <= sim.goal_tol or i == sim.steps:
            break

        y = pose_step(t, y0)
        pose = Pose(y[0], y[1], y[2])
        x_d = ref_step(t, x_d)
        state = adaptive_update(ctrl, state, z, sim.dt)

    refs = np.array(refs)
    points = np.array(points)
    return Trajectory(
        t=np.array(ts),
        reference=refs,
        ref_clearance=_clearances(world, refs),
        goal=goal.copy(),
        goal_tol=sim.goal_tol,
        pose=np.array(poses),
        point=points,
        error=np.array(errors),
        ratio=np.array(ratios),
        command=np.array(commands),
        estimate=np.array(estimates),
        act_clearance=_clearances(world, points),
        tube_violated=tube_violated,
    )


def pf_closed_loop(
    pf: PfParams,
    robot: RobotParams,
    model: DisturbanceModel,
    world: World,
    sim: SimConfig,
    tube_radius: float,
) -> Trajectory:
    """Steer directly along the potential field under disturbance.

    No feedback, no tube: the undisturbed flow from the same start is
    co-integrated as the ideal path, and the deviation from it is logged as
    the tracking error, with `tube_radius` only grading the logged ratio
    column. A potential singularity on the disturbed path truncates the run
    (recorded in `aborted`) rather than raising.
    """
    if sim.start_pose is None:
        raise ValueError("closed-loop run needs a start pose")
    pose = sim.start_pose
    x_d = virtual_point(robot, pose)
    if not in_free_space(world, x_d, margin=world.margin):
        raise DomainError("start pose puts the controlled point outside the retained free space")

    ref_step = _stepper(_planner_field(pf, world), sim.dt, sim.integrator)
    goal = pf.goal
    gx, gy = float(goal[0]), float(goal[1])

    u = np.zeros(2)
    pose_step = _stepper(
        lambda tt, y: pose_derivative(Pose(y[0], y[1], y[2]), u, disturbance(model, tt)),
        sim.dt,
        sim.integrator,
    )

    ts, refs, poses, points, errors, ratios, commands, estimates = ([] for _ in range(8))
    tube_violated = False
    aborted = None

    for i in range(sim.steps + 1):
        t = i * sim.dt
        x = virtual_point(robot, pose)
        x_e = x - x_d
        xi = float(x_e @ x_e) / tube_radius**2
        if xi >= 1.0:
            tube_violated = True

        try:
            tau = pf_field(pf, world, x)
        except PotentialSingularityError as exc:
            aborted = str(exc)
            ts.append(t)
            refs.append(x_d)
            poses.append(np.array([pose.x, pose.y, pose.heading]))
            points.append(x)
            errors.append(x_e)
            ratios.append(xi)
            commands.append(np.zeros(2))
            estimates.append(0.0)
            break

        u = rotation_matrix_inverse(robot.point_offset, pose.heading) @ tau
        if sim.clamp_input:
            norm = math.hypot(u[0], u[1])
            if norm > robot.input_limit:
                u = u * (robot.input_limit / norm)

        y0 = np.array([pose.x, pose.y, pose.heading])
        ts.append(t)
        refs.append(x_d)
        poses.append(y0)
        points.append(x)
        errors.append(x_e)
        ratios.append(xi)
        commands.append(u)
        estimates.append(0.0)

        if math.hypot(x[0] - gx, x[1] - gy) <= sim.goal_tol or i == sim.steps:
            break

        y = pose_step(t, y0)
        pose = Pose(y[0], y[1], y[2])
        try:
            x_d = ref_step(t, x_d)
        except PotentialSingularityError as exc:
            aborted = f"ideal path: {exc}"
            break

    refs = np.array(refs)
    points = np.array(points)
    return Trajectory(
        t=np.array(ts),
        reference=refs,
        ref_clearance=_clearances(world, refs),
        goal=goal.copy(),
        goal_tol=sim.goal_tol,
        pose=np.array(poses),
        point=points,
        error=np.array(errors),
        ratio=np.array(ratios),
        command=np.array(commands),
        estimate=np.array(estimates),
        act_clearance=_clearances(world, points),
        tube_violated=tube_violated,
        aborted=aborted,
    )


def compute_metrics(traj: Trajectory) -> Metrics:
    """Summary numbers for a run; actual-state entries are None on reference-only runs."""
    ref_len = float(np.sum(np.linalg.norm(np.diff(traj.reference, axis=0), axis=1)))
    closed = traj.closed_loop
    endpoint = traj.point[-1] if closed else traj.reference[-1]

    if traj.goal is not None:
        terminal = float(np.linalg.norm(endpoint - traj.goal))
        track = traj.point if closed else traj.reference
        dist = np.linalg.norm(track - traj.goal, axis=1)
        inside = np.nonzero(dist <= traj.goal_tol)[0]
        settled = len(inside) > 0
        settling = float(traj.t[inside[0]]) if settled else None
        reached = settled and traj.aborted is None
    else:
        terminal, settling, reached = None, None, False

    return Metrics(
        reached_goal=reached,
        settling_time=settling,
        terminal_goal_distance=terminal,
        ref_path_length=ref_len,
        act_path_length=(
            float(np.sum(np.linalg.norm(np.diff(traj.point, axis=0), axis=1))) if closed else None
        ),
        min_ref_clearance=float(traj.ref_clearance.min()),
        min_act_clearance=float(traj.act_clearance.min()) if closed else None,
        max_error_norm=float(np.linalg.norm(traj.error, axis=1).max()) if closed else None,
        max_command_norm=float(np.linalg.norm(traj.command, axis=1).max()) if closed else None,
        tube_violated=bool(traj.tube_violated or (closed and bool(np.any(traj.ratio >= 1.0)))),
    )


def sample_free_points(
    world: World, count: int, seed: int, margin: float | None = None
) -> np.ndarray:
    """Uniform rejection sample of `count` points over the retained free space."""
    rng = np.random.default_rng(seed)
    margin = world.margin if margin is None else margin
    lo, hi = world.workspace.bounding_box()
    out = np.empty((count, 2))
    placed = 0
    attempts = 0
    while placed < count:
        attempts += 1
        if attempts > 10_000 * max(count, 1):
            raise RuntimeError("rejection sampling stalled; free space too small?")
        x = rng.uniform(lo, hi)
        if in_free_space(world, x, margin=margin):
            out[placed] = x
            placed += 1
    return out


@dataclass(eq=False)
class RunOutcome:
    index: int
    start: np.ndarray
    trajectory: Trajectory | None
    metrics: Metrics | None
    error: str | None


def batch_run(params, world: World, starts, sim: SimConfig) -> list[RunOutcome]:
    """Reference runs from each start, in order; per-run failures are recorded,
    never raised, so one bad start cannot sink a sweep."""
    outcomes = []
    for i, start in enumerate(np.asarray(starts, dtype=float).reshape(-1, 2)):
        try:
            traj = integrate_reference(params, world, start, sim)
            outcomes.append(RunOutcome(i, start, traj, compute_metrics(traj), None))
        except (DomainError, PotentialSingularityError) as exc:
            outcomes.append(RunOutcome(i, start, None, None, str(exc)))
    return outcomes


# ---------------------------------------------------------------------------
# serialization

CSV_HEADER = "t,xd_x,xd_y,x,y,theta,px,py,xe_norm,xi,u_v,u_w,dhat,dO_ref,dO_act"
CSV_HEADER_REF = "t,xd_x,xd_y,dO_ref"


def _fmt(v: float) -> str:
    return repr(float(v))


def trajectory_to_csv(traj: Trajectory) -> str:
    """Render rows losslessly (shortest round-trip float text)."""
    lines = []
    if traj.closed_loop:
        lines.append(CSV_HEADER)
        err_norm = np.linalg.norm(traj.error, axis=1)
        for i in range(len(traj.t)):
            cells = (
                traj.t[i],
                traj.reference[i, 0],
                traj.reference[i, 1],
                traj.pose[i, 0],
                traj.pose[i, 1],
                traj.pose[i, 2],
                traj.point[i, 0],
                traj.point[i, 1],
                err_norm[i],
                traj.ratio[i],
                traj.command[i, 0],
                traj.command[i, 1],
                traj.estimate[i],
                traj.ref_clearance[i],
                traj.act_clearance[i],
            )
            lines.append(",".join(_fmt(c) for c in cells))
    else:
        lines.append(CSV_HEADER_REF)
        for i in range(len(traj.t)):
            cells = (
                traj.t[i],
                traj.reference[i, 0],
                traj.reference[i, 1],
                traj.ref_clearance[i],
            )
            lines.append(",".join(_fmt(c) for c in cells))
    return "\n".join(lines) + "\n"


def trajectory_from_csv(text: str, goal=None, goal_tol: float = 0.01) -> Trajectory:
    """Load a trajectory written by trajectory_to_csv.

    Goal metadata is not stored in the CSV; pass it back in if metrics are
    needed on the loaded copy.
    """
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0]
    data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    goal = None if goal is None else np.asarray(goal, dtype=float)
    if header == CSV_HEADER_REF:
        return Trajectory(
            t=data[:, 0],
            reference=data[:, 1:3],
            ref_clearance=data[:, 3],
            goal=goal,
            goal_tol=goal_tol,
        )
    if header != CSV_HEADER:
        raise ValueError("unrecognized trajectory header")
    return Trajectory(
        t=data[:, 0],
        reference=data[:, 1:3],
        ref_clearance=data[:, 13],
        goal=goal,
        goal_tol=goal_tol,
        pose=data[:, 3:6],
        point=data[:, 6:8],
        error=data[:, 6:8] - data[:, 1:3],
        ratio=data[:, 9],
        command=data[:, 10:12],
        estimate=data[:, 12],
        act_clearance=data[:, 14],
        tube_violated=bool(np.any(data[:, 9] >= 1.0)),
    )


def metrics_to_json(metrics: Metrics) -> str:
    return json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n"
