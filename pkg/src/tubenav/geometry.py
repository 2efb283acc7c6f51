"""Planar world model: convex workspace, circular obstacles, clearance margins.

Distances are phrased for the robot's controlled point with the body radius
already subtracted, so a value of zero means the body circle touches the
obstacle surface or the workspace wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import DomainError

# Clearance checks are strict; a pass thinner than this is flagged as marginal.
MARGINAL_SLACK = 1e-9


def _vec2(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (2,):
        raise ValueError(f"expected a 2-vector, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class Obstacle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec2(self.center))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True, eq=False)
class RectangleWorkspace:
    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _vec2(self.center))
        object.__setattr__(self, "half_extents", _vec2(self.half_extents))

    def boundary_depth(self, x) -> float:
        """Signed distance from x to the wall, positive inside (exact per edge/corner)."""
        q = np.abs(np.asarray(x, dtype=float) - self.center) - self.half_extents
        outside = math.hypot(max(q[0], 0.0), max(q[1], 0.0))
        inside = min(max(q[0], q[1]), 0.0)
        return -(outside + inside)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.half_extents, self.center + self.half_extents


@dataclass(frozen=True, eq=False)
class DiskWorkspace:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec2(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def boundary_depth(self, x) -> float:
        """Signed distance from x to the wall, positive inside."""
        return self.radius - float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.array([self.radius, self.radius])
        return self.center - r, self.center + r


Workspace = Union[RectangleWorkspace, DiskWorkspace]


@dataclass(frozen=True, eq=False)
class World:
    """Workspace plus obstacles and the clearance parameters they must honor.

    margin < influence: the field reshaping band around each inflated obstacle
    starts at distance `influence` and bottoms out at `margin`; `clearance` is
    the spacing budget the world layout must leave around every obstacle.
    """

    workspace: Workspace
    obstacles: tuple[Obstacle, ...]
    robot_radius: float
    clearance: float
    margin: float
    influence: float

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for name in ("robot_radius", "clearance", "margin", "influence"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @cached_property
    def centers(self) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, 2))
        return np.array([o.center for o in self.obstacles])

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([o.radius for o in self.obstacles])

    @cached_property
    def scan(self) -> tuple[tuple[float, float, float], ...]:
        # flat (cx, cy, radius) triples so the nearest-obstacle sweep can run
        # without array temporaries; it sits on the integration hot path
        return tuple((float(o.center[0]), float(o.center[1]), o.radius) for o in self.obstacles)


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str]
    warnings: list[str]


def validate_world(world: World) -> ValidationReport:
    """Check margin ordering and the clearance inequalities every layout must satisfy.

    All violations are collected rather than raised so a caller can show them
    at once. Strict inequalities with zero slack; a check that passes by less
    than MARGINAL_SLACK is accepted with a warning.
    """
    violations: list[str] = []
    warnings: list[str] = []

    ws = world.workspace
    if isinstance(ws, RectangleWorkspace):
        if not (ws.half_extents[0] > 0 and ws.half_extents[1] > 0):
            violations.append("workspace.half_extents: must be positive")
    else:
        if not ws.radius > 0:
            violations.append("workspace.radius: must be positive")

    if not world.robot_radius > 0:
        violations.append("robot_radius: must be positive")
    if not world.margin > 0:
        violations.append("margin: must be positive")
    if not world.influence > world.margin:
        violations.append(
            f"influence: must exceed margin ({world.influence:g} <= {world.margin:g})"
        )
    if not world.clearance >= world.influence:
        violations.append(
            f"clearance: must be at least influence ({world.clearance:g} < {world.influence:g})"
        )

    for i, ob in enumerate(world.obstacles):
        if not ob.radius > 0:
            violations.append(f"obstacle[{i}].radius: must be positive")

    def check_gap(gap: float, bound: float, label: str):
        if gap <= bound:
            violations.append(f"{label}: gap {gap:.6g} <= required {bound:.6g}")
        elif gap - bound < MARGINAL_SLACK:
            warnings.append(f"{label}: marginal, exceeds required {bound:.6g} by {gap - bound:.3g}")

    pair_bound = 2.0 * (world.robot_radius + world.clearance)
    for i in range(len(world.obstacles)):
        for j in range(i + 1, len(world.obstacles)):
            a, b = world.obstacles[i], world.obstacles[j]
            gap = float(np.linalg.norm(a.center - b.center)) - a.radius - b.radius
            check_gap(gap, pair_bound, f"obstacle[{i}]/obstacle[{j}] surface gap")

    wall_bound = 2.0 * world.robot_radius + world.clearance
    for i, ob in enumerate(world.obstacles):
        gap = ws.boundary_depth(ob.center) - ob.radius
        check_gap(gap, wall_bound, f"obstacle[{i}] wall gap")

    return ValidationReport(ok=not violations, violations=violations, warnings=warnings)


def obstacle_distance(world: World, x) -> tuple[float, int | None]:
    """Distance from the body circle at x to the nearest inflated obstacle.

    Returns (distance, obstacle index); ties resolve to the lowest index, and
    a world with no obstacles reports (inf, None).
    """
    if not world.obstacles:
        return math.inf, None
    px, py = float(x[0]), float(x[1])
    r = world.robot_radius
    best, best_i = math.inf, 0
    for i, (cx, cy, rad) in enumerate(world.scan):
        d = math.hypot(cx - px, cy - py) - rad - r
        if d < best:
            best, best_i = d, i
    return best, best_i


def workspace_erosion_distance(world: World, x) -> float:
    """Depth of the controlled point inside the wall-eroded workspace.

    Positive inside, zero when the body circle touches the wall, negative
    outside; at least `margin` everywhere on the retained free set.
    """
    return float(world.workspace.boundary_depth(x) - world.robot_radius)


def in_free_space(world: World, x, margin: float = 0.0) -> bool:
    """True if x keeps at least `margin` clearance from every obstacle and wall."""
    if workspace_erosion_distance(world, x) < margin:
        return False
    d, _ = obstacle_distance(world, x)
    return d >= margin


def bearing(world: World, x) -> np.ndarray:
    """Unit vector from x toward the nearest obstacle's center.

    Only queried inside the influence region; raises DomainError beyond it or
    at the obstacle center, where no direction exists.
    """
    d, i = obstacle_distance(world, x)
    if i is None or d > world.influence:
        raise DomainError(f"bearing undefined: nearest obstacle at {d:g} > influence {world.influence:g}")
    # |c_i - x| equals the inflated distance plus the inflation, no second sweep needed
    dist_to_center = d + world.robot_radius + world.obstacles[i].radius
    if dist_to_center <= 0.0:
        raise DomainError(f"bearing undefined at the center of obstacle[{i}]")
    return (world.obstacles[i].center - np.asarray(x, dtype=float)) / dist_to_center


def bump(world: World, d: float) -> float:
    """Obstacle-proximity weight: 1 at the margin, easing to 0 at the influence edge.

    Cosine ramp, continuously differentiable at both ends.
    """
    if d <= world.margin:
        return 1.0
    if d >= world.influence:
        return 0.0
    return 0.5 * (1.0 - math.cos(math.pi * (world.influence - d) / (world.influence - world.margin)))
