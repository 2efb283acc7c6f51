"""Scenario files: strict TOML parsing, defaults, invariant checks, emission.

A scenario file carries one full run setup: the world, the planner and
controller gains, the robot geometry, the disturbance, and the simulation
grid. Parsing is strict: unknown keys, missing keys, wrong types, and
parameter-ordering violations are all rejected with the offending field path,
so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, fields as dataclass_fields, is_dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controller import ControllerParams
from .errors import ConfigError
from .geometry import DiskWorkspace, Obstacle, RectangleWorkspace, World
from .kinematics import DisturbanceModel, Pose, RobotParams
from .planner import MODES, PfParams, PlannerParams
from .simulation import INTEGRATORS, SimConfig

_REQUIRED = object()


@dataclass(eq=False)
class ScenarioConfig:
    world: World
    planner: PlannerParams
    pf: PfParams
    controller: ControllerParams
    robot: RobotParams
    disturbance: DisturbanceModel
    sim: SimConfig
    out_dir: str | None = None

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return all(
            _value_eq(getattr(self, f.name), getattr(other, f.name))
            for f in dataclass_fields(self)
        )


def _value_eq(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(a, b)
    if is_dataclass(a) and not isinstance(a, type):
        if type(a) is not type(b):
            return False
        return all(
            _value_eq(getattr(a, f.name), getattr(b, f.name)) for f in dataclass_fields(a)
        )
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_value_eq(x, y) for x, y in zip(a, b))
    return a == b


class _Section:
    """One config table with consumed-key tracking."""

    def __init__(self, name: str, data: dict):
        self.name = name
        self.data = dict(data)

    def path(self, key: str) -> str:
        return f"{self.name}.{key}" if self.name else key

    def take(self, key: str, kind: str, default=_REQUIRED):
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError("missing required key", path=self.path(key))
            return default
        value = self.data.pop(key)
        if kind == "raw":
            return value
        return _coerce(value, kind, self.path(key))

    def finish(self):
        if self.data:
            extra = ", ".join(sorted(self.data))
            where = self.name or "top level"
            raise ConfigError(f"unknown key(s) in {where}: {extra}")


def _coerce(value, kind: str, path: str):
    def fail(expected):
        raise ConfigError(f"expected {expected}, got {value!r}", path=path)

    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            fail("true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            fail("a string")
        return value
    if kind == "vec2":
        if (
            not isinstance(value, list)
            or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
        ):
            fail("a pair of numbers [x, y]")
        return [float(v) for v in value]
    if kind == "pose3":
        if (
            not isinstance(value, list)
            or len(value) != 3
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
        ):
            fail("a triple of numbers [x, y, heading]")
        return [float(v) for v in value]
    raise AssertionError(kind)


def _positive(value: float, path: str) -> float:
    if not value > 0:
        raise ConfigError(f"must be positive, got {value:g}", path=path)
    return value


def _nonnegative(value: float, path: str) -> float:
    if not value >= 0:
        raise ConfigError(f"must be nonnegative, got {value:g}", path=path)
    return value


def _build_world(sec: _Section, obstacles: list) -> World:
    shape = sec.take("shape", "str", "rectangle")
    center = sec.take("center", "vec2", [0.0, 0.0])
    if shape == "rectangle":
        he = sec.take("half_extents", "vec2")
        _positive(he[0], sec.path("half_extents"))
        _positive(he[1], sec.path("half_extents"))
        workspace = RectangleWorkspace(center=center, half_extents=he)
    elif shape == "disk":
        radius = _positive(sec.take("radius", "float"), sec.path("radius"))
        workspace = DiskWorkspace(center=center, radius=radius)
    else:
        raise ConfigError(
            f"must be 'rectangle' or 'disk', got {shape!r}", path=sec.path("shape")
        )

    robot_radius = _positive(sec.take("robot_radius", "float"), sec.path("robot_radius"))
    clearance = _positive(sec.take("clearance", "float"), sec.path("clearance"))
    margin = _positive(sec.take("margin", "float"), sec.path("margin"))
    influence = _positive(sec.take("influence", "float"), sec.path("influence"))
    sec.finish()

    if not influence > margin:
        raise ConfigError(
            f"must exceed world.margin ({influence:g} <= {margin:g})", path="world.influence"
        )
    if not clearance >= influence:
        raise ConfigError(
            f"must be at least world.influence ({clearance:g} < {influence:g})",
            path="world.clearance",
        )

    obs = []
    for i, entry in enumerate(obstacles):
        if not isinstance(entry, dict):
            raise ConfigError("expected a table with center and radius", path=f"obstacle[{i}]")
        osec = _Section(f"obstacle[{i}]", entry)
        c = osec.take("center", "vec2")
        r = _positive(osec.take("radius", "float"), osec.path("radius"))
        osec.finish()
        obs.append(Obstacle(center=c, radius=r))

    return World(
        workspace=workspace,
        obstacles=tuple(obs),
        robot_radius=robot_radius,
        clearance=clearance,
        margin=margin,
        influence=influence,
    )


def _resolve_world(top: _Section, base_dir: Path | None) -> World:
    raw = top.take("world", "raw", None)
    if raw is None:
        raise ConfigError("missing required section", path="world")
    if not isinstance(raw, dict):
        raise ConfigError("expected a [world] table", path="world")
    obstacles = top.data.pop("obstacle", [])
    if not isinstance(obstacles, list):
        raise ConfigError("expected repeated [[obstacle]] tables", path="obstacle")

    if "file" in raw:
        if len(raw) != 1:
            raise ConfigError(
                "a world file reference must be the only key in [world]", path="world.file"
            )
        if obstacles:
            raise ConfigError(
                "obstacles must live in the referenced world file", path="world.file"
            )
        ref = _coerce(raw["file"], "str", "world.file")
        path = Path(ref)
        if not path.is_absolute():
            path = (base_dir or Path.cwd()) / path
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read world file: {exc}", path="world.file")
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in world file: {exc}", path="world.file")
        inner = _Section("", doc)
        raw = inner.take("world", "raw", None)
        if not isinstance(raw, dict) or "file" in raw:
            raise ConfigError(
                "referenced file must hold an inline [world] section", path="world.file"
            )
        obstacles = inner.data.pop("obstacle", [])
        inner.finish()

    return _build_world(_Section("world", raw), obstacles)


def parse_config(text: str, base_dir: str | Path | None = None) -> ScenarioConfig:
    """Parse and fully validate one scenario document.

    base_dir anchors relative world-file references (defaults to the working
    directory). Raises ConfigError with a field path on any defect.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}")

    top = _Section("", doc)
    out_dir = top.take("out_dir", "str", None)
    base = Path(base_dir) if base_dir is not None else None
    world = _resolve_world(top, base)

    planner_raw = top.take("planner", "raw", None)
    if not isinstance(planner_raw, dict):
        raise ConfigError("missing required section", path="planner")
    psec = _Section("planner", planner_raw)
    max_speed = _positive(psec.take("max_speed", "float"), "planner.max_speed")
    softening = _positive(psec.take("softening", "float"), "planner.softening")
    goal = psec.take("goal", "vec2")
    mode = psec.take("mode", "str", "continuous")
    psec.finish()
    if mode not in MODES:
        raise ConfigError(f"must be one of {MODES}, got {mode!r}", path="planner.mode")
    planner = PlannerParams(max_speed=max_speed, softening=softening, goal=goal, mode=mode)

    pf_raw = top.take("pf", "raw", None)
    pfsec = _Section("pf", pf_raw if isinstance(pf_raw, dict) else {})
    if pf_raw is not None and not isinstance(pf_raw, dict):
        raise ConfigError("expected a [pf] table", path="pf")
    # wall proximity scales default to the eroded margin contour of the
    # workspace so the baseline stays meaningful in any arena
    ws = world.workspace
    shrink = world.robot_radius + world.margin
    if isinstance(ws, RectangleWorkspace):
        default_scales = [float(ws.half_extents[0]) - shrink, float(ws.half_extents[1]) - shrink]
    else:
        default_scales = [float(ws.radius) - shrink, float(ws.radius) - shrink]
    attract = _nonnegative(pfsec.take("attract_gain", "float", 0.05), "pf.attract_gain")
    repulse = _nonnegative(pfsec.take("repulse_gain", "float", 0.0001), "pf.repulse_gain")
    scales = pfsec.take("wall_scales", "vec2", default_scales)
    exponent = pfsec.take("wall_exponent", "int", 20)
    pfsec.finish()
    _positive(scales[0], "pf.wall_scales")
    _positive(scales[1], "pf.wall_scales")
    if exponent <= 0 or exponent % 2 != 0:
        raise ConfigError(
            f"must be a positive even integer, got {exponent}", path="pf.wall_exponent"
        )
    pf = PfParams(
        attract_gain=attract,
        repulse_gain=repulse,
        goal=goal,
        wall_scales=(scales[0], scales[1]),
        wall_exponent=exponent,
    )

    ctrl_raw = top.take("controller", "raw", None)
    if not isinstance(ctrl_raw, dict):
        raise ConfigError("missing required section", path="controller")
    csec = _Section("controller", ctrl_raw)
    controller = ControllerParams(
        tube_radius=_positive(csec.take("tube_radius", "float"), "controller.tube_radius"),
        gain=_positive(csec.take("gain", "float"), "controller.gain"),
        smoothing=_positive(csec.take("smoothing", "float"), "controller.smoothing"),
        adapt_rate=_positive(csec.take("adapt_rate", "float"), "controller.adapt_rate"),
        leak_rate=_nonnegative(csec.take("leak_rate", "float"), "controller.leak_rate"),
        disturbance_cap=_nonnegative(
            csec.take("disturbance_cap", "float"), "controller.disturbance_cap"
        ),
        projection_band=_positive(
            csec.take("projection_band", "float"), "controller.projection_band"
        ),
        initial_estimate=_nonnegative(
            csec.take("initial_estimate", "float"), "controller.initial_estimate"
        ),
    )
    csec.finish()
    if controller.tube_radius > world.margin:
        raise ConfigError(
            f"tube must fit inside the safety margin "
            f"({controller.tube_radius:g} > {world.margin:g})",
            path="controller.tube_radius",
        )
    band_top = controller.disturbance_cap + controller.projection_band
    if controller.initial_estimate > band_top:
        raise ConfigError(
            f"must lie in the admissible band [0, {band_top:g}]",
            path="controller.initial_estimate",
        )

    robot_raw = top.take("robot", "raw", None)
    if not isinstance(robot_raw, dict):
        raise ConfigError("missing required section", path="robot")
    rsec = _Section("robot", robot_raw)
    point_offset = rsec.take("point_offset", "float")
    input_limit = _positive(rsec.take("input_limit", "float"), "robot.input_limit")
    rsec.finish()
    if point_offset == 0.0:
        raise ConfigError("must be nonzero", path="robot.point_offset")
    robot = RobotParams(
        point_offset=point_offset, body_radius=world.robot_radius, input_limit=input_limit
    )

    dist_raw = top.take("disturbance", "raw", None)
    if dist_raw is None:
        model = DisturbanceModel()
    elif not isinstance(dist_raw, dict):
        raise ConfigError("expected a [disturbance] table", path="disturbance")
    else:
        dsec = _Section("disturbance", dist_raw)
        kind = dsec.take("kind", "str", "none")
        if kind == "none":
            dsec.finish()
            model = DisturbanceModel()
        elif kind == "sinusoidal":
            amplitudes = dsec.take("amplitudes", "vec2")
            frequencies = dsec.take("frequencies", "vec2")
            phases = dsec.take("phases", "vec2", [0.0, 0.0])
            offsets = dsec.take("offsets", "vec2", [0.0, 0.0])
            # component-extremes envelope; a tighter hand-computed sup may be
            # passed explicitly
            default_bound = math.hypot(
                abs(amplitudes[0]) + abs(offsets[0]), abs(amplitudes[1]) + abs(offsets[1])
            )
            bound = _nonnegative(
                dsec.take("bound", "float", default_bound), "disturbance.bound"
            )
            dsec.finish()
            model = DisturbanceModel(
                kind="sinusoidal",
                amplitudes=amplitudes,
                frequencies=frequencies,
                phases=phases,
                offsets=offsets,
                bound=bound,
            )
        else:
            raise ConfigError(
                f"must be 'none' or 'sinusoidal', got {kind!r}", path="disturbance.kind"
            )

    sim_raw = top.take("sim", "raw", None)
    ssec = _Section("sim", sim_raw if isinstance(sim_raw, dict) else {})
    if sim_raw is not None and not isinstance(sim_raw, dict):
        raise ConfigError("expected a [sim] table", path="sim")
    dt = ssec.take("dt", "float", 0.01)
    duration = ssec.take("duration", "float", 500.0)
    goal_tol = _positive(ssec.take("goal_tol", "float", 0.01), "sim.goal_tol")
    integrator = ssec.take("integrator", "str", "rk4")
    clamp_input = ssec.take("clamp_input", "bool", False)
    seed = ssec.take("seed", "int", 0)
    pose_list = ssec.take("start_pose", "pose3", None)
    ssec.finish()
    if integrator not in INTEGRATORS:
        raise ConfigError(
            f"must be one of {INTEGRATORS}, got {integrator!r}", path="sim.integrator"
        )
    try:
        sim = SimConfig(
            dt=dt,
            duration=duration,
            goal_tol=goal_tol,
            integrator=integrator,
            clamp_input=clamp_input,
            seed=seed,
            start_pose=None if pose_list is None else Pose(*pose_list),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), path="sim")

    top.finish()
    return ScenarioConfig(
        world=world,
        planner=planner,
        pf=pf,
        controller=controller,
        robot=robot,
        disturbance=model,
        sim=sim,
        out_dir=out_dir,
    )


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse a scenario file, anchoring world references at its directory."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    return parse_config(text, base_dir=p.parent)


# ---------------------------------------------------------------------------
# emission

def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def emit_config(cfg: ScenarioConfig) -> str:
    """Write a scenario back out with every value explicit.

    parse_config(emit_config(cfg)) reproduces cfg exactly.
    """
    lines: list[str] = []

    def put(key, value):
        lines.append(f"{key} = {_fmt_value(value)}")

    if cfg.out_dir is not None:
        put("out_dir", cfg.out_dir)
        lines.append("")

    w = cfg.world
    lines.append("[world]")
    if isinstance(w.workspace, RectangleWorkspace):
        put("shape", "rectangle")
        put("center", w.workspace.center)
        put("half_extents", w.workspace.half_extents)
    else:
        put("shape", "disk")
        put("center", w.workspace.center)
        put("radius", w.workspace.radius)
    put("robot_radius", w.robot_radius)
    put("clearance", w.clearance)
    put("margin", w.margin)
    put("influence", w.influence)

    for ob in w.obstacles:
        lines.append("")
        lines.append("[[obstacle]]")
        put("center", ob.center)
        put("radius", ob.radius)

    lines.append("")
    lines.append("[planner]")
    put("max_speed", cfg.planner.max_speed)
    put("softening", cfg.planner.softening)
    put("goal", cfg.planner.goal)
    put("mode", cfg.planner.mode)

    lines.append("")
    lines.append("[pf]")
    put("attract_gain", cfg.pf.attract_gain)
    put("repulse_gain", cfg.pf.repulse_gain)
    put("wall_scales", list(cfg.pf.wall_scales))
    put("wall_exponent", cfg.pf.wall_exponent)

    lines.append("")
    lines.append("[controller]")
    c = cfg.controller
    put("tube_radius", c.tube_radius)
    put("gain", c.gain)
    put("smoothing", c.smoothing)
    put("adapt_rate", c.adapt_rate)
    put("leak_rate", c.leak_rate)
    put("disturbance_cap", c.disturbance_cap)
    put("projection_band", c.projection_band)
    put("initial_estimate", c.initial_estimate)

    lines.append("")
    lines.append("[robot]")
    put("point_offset", cfg.robot.point_offset)
    put("input_limit", cfg.robot.input_limit)

    lines.append("")
    lines.append("[disturbance]")
    put("kind", cfg.disturbance.kind)
    if cfg.disturbance.kind == "sinusoidal":
        put("amplitudes", cfg.disturbance.amplitudes)
        put("frequencies", cfg.disturbance.frequencies)
        put("phases", cfg.disturbance.phases)
        put("offsets", cfg.disturbance.offsets)
        put("bound", cfg.disturbance.bound)

    lines.append("")
    lines.append("[sim]")
    s = cfg.sim
    put("dt", s.dt)
    put("duration", s.duration)
    put("goal_tol", s.goal_tol)
    put("integrator", s.integrator)
    put("clamp_input", s.clamp_input)
    put("seed", s.seed)
    if s.start_pose is not None:
        put("start_pose", [s.start_pose.x, s.start_pose.y, s.start_pose.heading])

    return "\n".join(lines) + "\n"
