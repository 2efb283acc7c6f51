"""Goal-seeking velocity fields with tangent-cone obstacle handling.

The main field caps its own magnitude, steers around inflated obstacles by
removing only the obstacle-bound velocity component, and leaves a single
zero-velocity rest point behind each obstacle whose attracting set is one
radial ray. A classical potential-field planner is included as a baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PotentialSingularityError
from .geometry import World, bearing, bump, obstacle_distance, workspace_erosion_distance, _vec2

# The field stays evaluable this far below the margin so a fixed-step
# integrator can graze the boundary mid-step without faulting.
DOMAIN_SLACK = 1e-6

# The switching variant activates its projection on the margin ring itself;
# numerically, within this band of it.
SWITCH_BAND = 1e-9

MODES = ("continuous", "discontinuous")


@dataclass(frozen=True, eq=False)
class PlannerParams:
    """Tuning for the goal field.

    max_speed caps the field magnitude everywhere; softening sets the length
    scale over which the magnitude rolls off to zero at the goal. mode picks
    between the smooth influence-band field and the switching variant that
    projects only on the margin ring.
    """

    max_speed: float
    softening: float
    goal: np.ndarray
    mode: str = "continuous"

    def __post_init__(self):
        object.__setattr__(self, "max_speed", float(self.max_speed))
        object.__setattr__(self, "softening", float(self.softening))
        object.__setattr__(self, "goal", _vec2(self.goal))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def require_valid_goal(params: PlannerParams, world: World) -> None:
    """Raise unless the goal sits strictly inside the retained free space."""
    if workspace_erosion_distance(world, params.goal) <= world.margin:
        raise DomainError("goal too close to the workspace wall")
    d, _ = obstacle_distance(world, params.goal)
    if d <= world.margin:
        raise DomainError("goal inside an obstacle margin")


def nominal_field(params: PlannerParams, x) -> np.ndarray:
    """Goal-seeking velocity, saturating at max_speed away from the goal."""
    dx = float(x[0]) - params.goal[0]
    dy = float(x[1]) - params.goal[1]
    root = math.sqrt(dx * dx + dy * dy + params.softening**2)
    return np.array([-params.max_speed * dx / root, -params.max_speed * dy / root])


def projection_matrix(weight: float, b) -> np.ndarray:
    """I - weight*b*bᵀ for unit b: scales the b-component by (1 - weight)."""
    b = np.asarray(b, dtype=float)
    n2 = float(b @ b)
    if abs(n2 - 1.0) > 1e-9:
        raise ValueError(f"b must be a unit vector, |b|^2 = {n2:g}")
    return np.eye(2) - weight * np.outer(b, b)


def field(params: PlannerParams, world: World, x) -> np.ndarray:
    """Obstacle-aware goal velocity at x.

    Continuous mode fades out the obstacle-bound velocity component across the
    influence band, removing it fully at the margin. Discontinuous mode keeps
    the plain goal field everywhere except on the margin ring itself, where an
    approaching velocity is projected onto the tangent.

    Branch ties are fixed: at distance exactly `influence` the plain field is
    returned, and a velocity exactly tangent to the bearing takes the projected
    branch; both choices are value-identical at the tie.
    """
    x = np.asarray(x, dtype=float)
    k0 = nominal_field(params, x)
    d, i = obstacle_distance(world, x)
    if d < world.margin - DOMAIN_SLACK:
        raise DomainError(
            f"field queried at obstacle distance {d:g}, below margin {world.margin:g}"
        )

    if params.mode == "discontinuous":
        if d <= world.margin + SWITCH_BAND:
            b = _bearing_from(world, x, d, i)
            if k0 @ b > 0.0:
                return k0 - (k0 @ b) * b
        return k0

    if d >= world.influence:
        return k0
    b = _bearing_from(world, x, d, i)
    align = k0 @ b
    if align < 0.0:
        return k0
    return k0 - bump(world, d) * align * b


def _bearing_from(world: World, x, d: float, i: int) -> np.ndarray:
    """Bearing reusing an already-computed obstacle distance."""
    ob = world.obstacles[i]
    return (ob.center - x) / (d + world.robot_radius + ob.radius)


def stationary_point(params: PlannerParams, world: World, index: int) -> np.ndarray:
    """The rest point of the field behind obstacle `index`.

    Sits on the margin ring, radially opposite the goal; the flow converges to
    it only along that single radial ray, and small lateral perturbations
    escape around the obstacle.
    """
    ob = world.obstacles[index]
    ring = world.robot_radius + ob.radius + world.margin
    a = ring / float(np.linalg.norm(params.goal - ob.center))
    return (1.0 + a) * ob.center - a * params.goal


@dataclass(frozen=True, eq=False)
class PfParams:
    """Potential-field baseline: quadratic attraction, summed inverse-clearance repulsion.

    wall_scales/wall_exponent shape the super-ellipse wall proximity term
    rho_0 = 1 - (x/sx)^p - (y/sy)^p.
    """

    attract_gain: float
    repulse_gain: float
    goal: np.ndarray
    wall_scales: tuple[float, float] = (2.9, 1.4)
    wall_exponent: int = 20

    def __post_init__(self):
        object.__setattr__(self, "attract_gain", float(self.attract_gain))
        object.__setattr__(self, "repulse_gain", float(self.repulse_gain))
        object.__setattr__(self, "goal", _vec2(self.goal))
        object.__setattr__(self, "wall_scales", (float(self.wall_scales[0]), float(self.wall_scales[1])))
        object.__setattr__(self, "wall_exponent", int(self.wall_exponent))


def _pf_clearances(params: PfParams, world: World, x) -> tuple[list[float], list[float], list[float]]:
    """All proximity terms and their gradient components; raises where any hits zero.

    Scalar lists (term values, d/dx, d/dy) with the wall term first, then the
    obstacles in index order; kept allocation-free since this sits under the
    baseline integration loop.
    """
    p = params.wall_exponent
    sx, sy = params.wall_scales
    x0, x1 = float(x[0]), float(x[1])
    # superellipse barrier sits on the workspace center, not the origin
    wc = world.workspace.center
    dx0 = x0 - float(wc[0])
    dx1 = x1 - float(wc[1])
    rho = [1.0 - (dx0 / sx) ** p - (dx1 / sy) ** p]
    gx = [-p * dx0 ** (p - 1) / sx**p]
    gy = [-p * dx1 ** (p - 1) / sy**p]
    for cx, cy, rad in world.scan:
        ring = world.robot_radius + rad + world.margin
        dx = x0 - cx
        dy = x1 - cy
        rho.append(dx * dx + dy * dy - ring**2)
        gx.append(2.0 * dx)
        gy.append(2.0 * dy)
    for i, r in enumerate(rho):
        if r <= 0.0:
            raise PotentialSingularityError(
                f"repulsive clearance term {i} is {r:g} at ({x0:g}, {x1:g})"
            )
    return rho, gx, gy


def pf_potential(params: PfParams, world: World, x) -> float:
    """Total potential: 0.5*ka*|x-g|^2 + 0.5*kr*(sum 1/rho_i)*|x-g|^2."""
    rho, _, _ = _pf_clearances(params, world, x)
    ox = float(x[0]) - params.goal[0]
    oy = float(x[1]) - params.goal[1]
    sq = ox * ox + oy * oy
    s = sum(1.0 / r for r in rho)
    return 0.5 * params.attract_gain * sq + 0.5 * params.repulse_gain * s * sq


def pf_field(params: PfParams, world: World, x) -> np.ndarray:
    """Negative analytic gradient of the total potential."""
    rho, gx, gy = _pf_clearances(params, world, x)
    ox = float(x[0]) - params.goal[0]
    oy = float(x[1]) - params.goal[1]
    sq = ox * ox + oy * oy
    s = sum(1.0 / r for r in rho)
    grad_sx = -sum(g / r**2 for g, r in zip(gx, rho))
    grad_sy = -sum(g / r**2 for g, r in zip(gy, rho))
    ka, kr = params.attract_gain, params.repulse_gain
    return np.array(
        [
            -(ka * ox + kr * (0.5 * sq * grad_sx + s * ox)),
            -(ka * oy + kr * (0.5 * sq * grad_sy + s * oy)),
        ]
    )
