"""Differential-drive kinematics steered through an offset control point.

The controlled point sits a signed distance `point_offset` ahead of the wheel
axle along the heading; steering that point gives a square, invertible map
from (forward speed, turn rate) to point velocity. Input disturbances are
modeled as bounded additive signals on the velocity commands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import _vec2


@dataclass(frozen=True, eq=False)
class RobotParams:
    point_offset: float
    body_radius: float
    input_limit: float

    def __post_init__(self):
        object.__setattr__(self, "point_offset", float(self.point_offset))
        object.__setattr__(self, "body_radius", float(self.body_radius))
        object.__setattr__(self, "input_limit", float(self.input_limit))
        if self.point_offset == 0.0:
            raise ValueError("point_offset must be nonzero; the steering map degenerates at 0")


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float  # radians, unwrapped: integrates without modular reduction

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


def rotation_matrix(offset: float, heading: float) -> np.ndarray:
    """Maps (forward speed, turn rate) to the controlled point's velocity."""
    c, s = math.cos(heading), math.sin(heading)
    return np.array([[c, -offset * s], [s, offset * c]])


def rotation_matrix_inverse(offset: float, heading: float) -> np.ndarray:
    """Closed-form inverse; determinant of the forward map is `offset`."""
    c, s = math.cos(heading), math.sin(heading)
    return np.array([[c, s], [-s / offset, c / offset]])


def virtual_point(params: RobotParams, pose: Pose) -> np.ndarray:
    """Position of the controlled point for a given axle pose."""
    return np.array(
        [
            pose.x + params.point_offset * math.cos(pose.heading),
            pose.y + params.point_offset * math.sin(pose.heading),
        ]
    )


def pose_derivative(pose: Pose, u, u_d) -> np.ndarray:
    """Axle-frame kinematics under command u plus input disturbance u_d."""
    v = u[0] + u_d[0]
    w = u[1] + u_d[1]
    return np.array([v * math.cos(pose.heading), v * math.sin(pose.heading), w])


@dataclass(frozen=True, eq=False)
class DisturbanceModel:
    """Bounded additive input disturbance.

    kind "none" is identically zero; "sinusoidal" evaluates
    amplitude*sin(frequency*t + phase) + offset per component; "custom" wraps
    an arbitrary callable. `bound` is the declared sup of the signal norm and
    must dominate the actual signal.
    """

    kind: str = "none"
    amplitudes: np.ndarray = (0.0, 0.0)
    frequencies: np.ndarray = (0.0, 0.0)
    phases: np.ndarray = (0.0, 0.0)
    offsets: np.ndarray = (0.0, 0.0)
    bound: float = 0.0
    signal: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("none", "sinusoidal", "custom"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.kind == "custom" and self.signal is None:
            raise ValueError("custom disturbance needs a signal callable")
        for name in ("amplitudes", "frequencies", "phases", "offsets"):
            object.__setattr__(self, name, _vec2(getattr(self, name)))
        object.__setattr__(self, "bound", float(self.bound))


def bench_disturbance() -> DisturbanceModel:
    """The benchmark signal 0.01*[sin(0.2 t) + 1, cos(0.3 t) - 2].

    The declared bound is the component-extremes envelope 0.01*sqrt(13); the
    actual sup is slightly lower because the two phases never align.
    """
    return DisturbanceModel(
        kind="sinusoidal",
        amplitudes=(0.01, 0.01),
        frequencies=(0.2, 0.3),
        phases=(0.0, math.pi / 2),
        offsets=(0.01, -0.02),
        bound=0.01 * math.sqrt(13.0),
    )


def disturbance(model: DisturbanceModel, t: float) -> np.ndarray:
    """Evaluate the disturbance at time t."""
    if model.kind == "none":
        return np.zeros(2)
    if model.kind == "custom":
        return np.asarray(model.signal(t), dtype=float)
    return model.amplitudes * np.sin(model.frequencies * t + model.phases) + model.offsets
