"""Tube-following control: barrier-scaled feedback plus an adaptive robust term.

The tracking error is confined to a ball of radius `tube_radius` around the
reference point. A log barrier on the squared error ratio supplies a feedback
direction that stiffens without bound at the tube wall; a smoothed unit-vector
term sized by an online disturbance-bound estimate rejects bounded input
disturbances. The estimator's projection keeps it inside a fixed band no
matter what the error signal does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TubeViolationError
from .kinematics import rotation_matrix_inverse


@dataclass(frozen=True, eq=False)
class ControllerParams:
    tube_radius: float
    gain: float
    smoothing: float  # softens the robust term near zero error
    adapt_rate: float
    leak_rate: float
    disturbance_cap: float  # estimator level where the projection taper starts
    projection_band: float  # taper width; the estimate never exceeds cap + band
    initial_estimate: float

    def __post_init__(self):
        for f in (
            "tube_radius",
            "gain",
            "smoothing",
            "adapt_rate",
            "leak_rate",
            "disturbance_cap",
            "projection_band",
            "initial_estimate",
        ):
            object.__setattr__(self, f, float(getattr(self, f)))


@dataclass(frozen=True)
class AdaptiveState:
    estimate: float


def transformed_error(params: ControllerParams, x_e) -> float:
    """Squared error norm over squared tube radius; 1 means the wall."""
    x_e = np.asarray(x_e, dtype=float)
    return float(x_e @ x_e) / params.tube_radius**2


def z_vector(params: ControllerParams, x_e) -> np.ndarray:
    """Barrier-scaled error: gradient direction of the wall barrier.

    Grows without bound as the error approaches the tube radius; raises
    TubeViolationError at or beyond the wall, where the barrier is undefined.
    """
    x_e = np.asarray(x_e, dtype=float)
    xi = transformed_error(params, x_e)
    if xi >= 1.0:
        raise TubeViolationError(
            f"tracking error {math.sqrt(float(x_e @ x_e)):g} at or beyond tube radius "
            f"{params.tube_radius:g}"
        )
    return x_e / (params.tube_radius**2 * (1.0 - xi))


def barrier_value(params: ControllerParams, x_e) -> float:
    """Wall barrier 0.5*ln(1/(1-xi)); zero at zero error, infinite at the wall."""
    xi = transformed_error(params, x_e)
    if xi >= 1.0:
        raise TubeViolationError(f"barrier undefined at or beyond the tube wall (ratio {xi:g})")
    return 0.5 * math.log(1.0 / (1.0 - xi))


def robust_term(params: ControllerParams, state: AdaptiveState, z) -> np.ndarray:
    """Smoothed disturbance-rejection vector; its norm never exceeds the estimate."""
    z = np.asarray(z, dtype=float)
    d2 = state.estimate**2
    return d2 * z / math.sqrt(d2 * float(z @ z) + params.smoothing**2)


def control_law(
    params: ControllerParams,
    state: AdaptiveState,
    heading: float,
    x_e,
    feedforward,
    point_offset: float,
) -> np.ndarray:
    """Velocity commands (forward speed, turn rate) that track the reference flow.

    Inverts the point-steering map at the current heading; raises
    TubeViolationError if the error is already at the wall.
    """
    x_e = np.asarray(x_e, dtype=float)
    w = robust_term(params, state, z_vector(params, x_e))
    desired = -params.gain * x_e + np.asarray(feedforward, dtype=float) - w
    return rotation_matrix_inverse(point_offset, heading) @ desired


def estimate_rate(params: ControllerParams, state: AdaptiveState, z) -> float:
    """Projected growth rate of the disturbance-bound estimate.

    Plain leaky adaptation below the cap; above it, a positive rate is tapered
    linearly across the band, hitting zero at cap + band so the estimate can
    never escape [0, cap + band].
    """
    z = np.asarray(z, dtype=float)
    drive = float(np.linalg.norm(z)) - params.leak_rate * state.estimate
    if state.estimate >= params.disturbance_cap and drive > 0.0:
        drive *= 1.0 - (state.estimate - params.disturbance_cap) / params.projection_band
    return params.adapt_rate * drive


def adaptive_update(
    params: ControllerParams, state: AdaptiveState, z, dt: float
) -> AdaptiveState:
    """One explicit-Euler estimator step, clamped to [0, cap + band]."""
    est = state.estimate + dt * estimate_rate(params, state, z)
    est = min(max(est, 0.0), params.disturbance_cap + params.projection_band)
    return AdaptiveState(est)


def input_norm_bound(params: ControllerParams, max_speed: float, point_offset: float) -> float:
    """Worst-case command norm inside the tube with the estimator saturated."""
    return (
        params.gain * params.tube_radius
        + max_speed
        + params.disturbance_cap
        + params.projection_band
    ) / abs(point_offset)
