"""Self-contained SVG rendering: arena maps and velocity traces.

No plotting dependency; the emitted files are plain SVG 1.1 with inline
styling, suitable for review diffs and report embedding.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import RectangleWorkspace, World
from .simulation import Trajectory

PALETTE = ("#1b6ac9", "#c0392b", "#2d8f4e", "#8a5cc9")

_BAND = "#dde5ee"  # keep-out margin bands
_INFLATED = "#e8b0ac"  # obstacle grown by the body radius
_CORE = "#b1453c"  # physical obstacle
_REF = "#1b6ac9"
_ACT = "#1d1d1d"
_TUBE_OPACITY = 0.18


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


class _Canvas:
    """World-to-pixel mapping with the y axis flipped."""

    def __init__(self, lo, hi, width=900.0, pad=24.0):
        span_x = hi[0] - lo[0]
        span_y = hi[1] - lo[1]
        self.scale = (width - 2 * pad) / span_x
        self.pad = pad
        self.lo = lo
        self.width = width
        self.height = span_y * self.scale + 2 * pad

    def x(self, wx: float) -> float:
        return self.pad + (wx - self.lo[0]) * self.scale

    def y(self, wy: float) -> float:
        return self.height - self.pad - (wy - self.lo[1]) * self.scale

    def points(self, arr: np.ndarray) -> str:
        return " ".join(f"{_fmt(self.x(p[0]))},{_fmt(self.y(p[1]))}" for p in arr)


def _circle(cv: _Canvas, center, radius: float, style: str) -> str:
    return (
        f'<circle cx="{_fmt(cv.x(center[0]))}" cy="{_fmt(cv.y(center[1]))}" '
        f'r="{_fmt(radius * cv.scale)}" {style}/>'
    )


def _workspace_shapes(cv: _Canvas, world: World) -> list[str]:
    ws = world.workspace
    keep_out = world.robot_radius + world.margin
    parts = []
    if isinstance(ws, RectangleWorkspace):
        for inset, fill in ((0.0, _BAND), (keep_out, "#ffffff")):
            w = (ws.half_extents[0] - inset) * 2 * cv.scale
            h = (ws.half_extents[1] - inset) * 2 * cv.scale
            x = cv.x(ws.center[0] - ws.half_extents[0] + inset)
            y = cv.y(ws.center[1] + ws.half_extents[1] - inset)
            style = f'fill="{fill}"' if inset else f'fill="{fill}" stroke="#3a3f45" stroke-width="2"'
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" {style}/>'
            )
    else:
        parts.append(
            _circle(cv, ws.center, ws.radius, f'fill="{_BAND}" stroke="#3a3f45" stroke-width="2"')
        )
        parts.append(_circle(cv, ws.center, ws.radius - keep_out, 'fill="#ffffff"'))
    return parts


def _obstacle_shapes(cv: _Canvas, world: World) -> list[str]:
    r = world.robot_radius
    parts = []
    for ob in world.obstacles:
        parts.append(_circle(cv, ob.center, ob.radius + r + world.margin, f'fill="{_BAND}"'))
        parts.append(_circle(cv, ob.center, ob.radius + r, f'fill="{_INFLATED}"'))
        parts.append(_circle(cv, ob.center, ob.radius, f'fill="{_CORE}"'))
        parts.append(
            _circle(
                cv,
                ob.center,
                ob.radius + r + world.influence,
                'fill="none" stroke="#7a838d" stroke-width="1.5" stroke-dasharray="6 5"',
            )
        )
    return parts


def scene_svg(world: World, traj: Trajectory, tube_radius: float | None = None) -> str:
    """Arena map of one run: margins, obstacles, reference and actual paths.

    tube_radius draws the safe envelope around the reference path; pass the
    controller's value for closed-loop runs.
    """
    lo, hi = world.workspace.bounding_box()
    cv = _Canvas(lo, hi)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(cv.width)} {_fmt(cv.height)}" '
        f'font-family="sans-serif">',
        f'<rect width="{_fmt(cv.width)}" height="{_fmt(cv.height)}" fill="#ffffff"/>',
    ]
    parts += _workspace_shapes(cv, world)
    parts += _obstacle_shapes(cv, world)

    if tube_radius is not None and len(traj.reference) > 1:
        parts.append(
            f'<polyline points="{cv.points(traj.reference)}" fill="none" stroke="{_REF}" '
            f'stroke-opacity="{_TUBE_OPACITY}" stroke-width="{_fmt(2 * tube_radius * cv.scale)}" '
            f'stroke-linecap="round" stroke-linejoin="round"/>'
        )
    if len(traj.reference) > 1:
        parts.append(
            f'<polyline points="{cv.points(traj.reference)}" fill="none" stroke="{_REF}" '
            f'stroke-width="2"/>'
        )
    if traj.closed_loop and len(traj.point) > 1:
        parts.append(
            f'<polyline points="{cv.points(traj.point)}" fill="none" stroke="{_ACT}" '
            f'stroke-width="1.4"/>'
        )

    start = traj.point[0] if traj.closed_loop else traj.reference[0]
    parts.append(_circle(cv, start, 3.5 / cv.scale, 'fill="#2d8f4e"'))
    if traj.goal is not None:
        parts.append(_circle(cv, traj.goal, 3.5 / cv.scale, 'fill="#c0392b"'))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def paths_svg(
    world: World,
    runs: list[tuple[str, Trajectory]],
    goal=None,
) -> str:
    """Arena map overlaying the reference paths of several runs.

    Runs sharing a label (one planner, many starts) share a color; the legend
    lists each label once.
    """
    lo, hi = world.workspace.bounding_box()
    cv = _Canvas(lo, hi)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(cv.width)} {_fmt(cv.height)}" '
        f'font-family="sans-serif" font-size="13">',
        f'<rect width="{_fmt(cv.width)}" height="{_fmt(cv.height)}" fill="#ffffff"/>',
    ]
    parts += _workspace_shapes(cv, world)
    parts += _obstacle_shapes(cv, world)

    labels: list[str] = []
    for label, _ in runs:
        if label not in labels:
            labels.append(label)
    colors = {label: PALETTE[j % len(PALETTE)] for j, label in enumerate(labels)}

    for label, traj in runs:
        if len(traj.reference) < 2:
            continue
        parts.append(
            f'<polyline points="{cv.points(traj.reference)}" fill="none" '
            f'stroke="{colors[label]}" stroke-width="1.5" stroke-opacity="0.8"/>'
        )
    for _, traj in runs:
        parts.append(_circle(cv, traj.reference[0], 2.5 / cv.scale, 'fill="#2d8f4e"'))
    if goal is not None:
        parts.append(_circle(cv, goal, 3.5 / cv.scale, 'fill="#c0392b"'))

    for j, label in enumerate(labels):
        y = 16 + 18 * j
        parts.append(
            f'<rect x="10" y="{_fmt(y - 9)}" width="12" height="12" fill="{colors[label]}"/>'
        )
        parts.append(f'<text x="28" y="{_fmt(y + 1)}" fill="#1d1d1d">{label}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / target
    power = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * power
        if raw <= step:
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _tick_label(v: float) -> str:
    return f"{v:.10g}"


def velocity_svg(
    traces: list[tuple[str, np.ndarray, np.ndarray]],
    guide: float | None = None,
    title: str = "commanded speed over time",
) -> str:
    """Line chart of velocity norms: one (label, t, norm) trace per run."""
    width, height = 900.0, 420.0
    ml, mr, mt, mb = 64.0, 16.0, 40.0, 44.0
    iw, ih = width - ml - mr, height - mt - mb

    tmax = max((float(t[-1]) for _, t, _ in traces if len(t)), default=1.0)
    vmax = max((float(np.max(v)) for _, _, v in traces if len(v)), default=1.0)
    if guide is not None:
        vmax = max(vmax, guide)
    vmax *= 1.08
    tmax = tmax if tmax > 0 else 1.0
    vmax = vmax if vmax > 0 else 1.0

    def px(t):
        return ml + t / tmax * iw

    def py(v):
        return mt + ih - v / vmax * ih

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(width)} {_fmt(height)}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
        f'<text x="{_fmt(ml)}" y="22" font-size="14" fill="#1d1d1d">{title}</text>',
    ]

    for tv in _ticks(0.0, tmax):
        x = px(tv)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(mt)}" x2="{_fmt(x)}" y2="{_fmt(mt + ih)}" '
            f'stroke="#e3e7ec" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(mt + ih + 18)}" text-anchor="middle" '
            f'fill="#555">{_tick_label(tv)}</text>'
        )
    for vv in _ticks(0.0, vmax):
        y = py(vv)
        parts.append(
            f'<line x1="{_fmt(ml)}" y1="{_fmt(y)}" x2="{_fmt(ml + iw)}" y2="{_fmt(y)}" '
            f'stroke="#e3e7ec" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(ml - 8)}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'fill="#555">{_tick_label(vv)}</text>'
        )
    parts.append(
        f'<rect x="{_fmt(ml)}" y="{_fmt(mt)}" width="{_fmt(iw)}" height="{_fmt(ih)}" '
        f'fill="none" stroke="#3a3f45" stroke-width="1.5"/>'
    )
    parts.append(
        f'<text x="{_fmt(ml + iw / 2)}" y="{_fmt(height - 8)}" text-anchor="middle" '
        f'fill="#1d1d1d">time [s]</text>'
    )

    if guide is not None:
        y = py(guide)
        parts.append(
            f'<line x1="{_fmt(ml)}" y1="{_fmt(y)}" x2="{_fmt(ml + iw)}" y2="{_fmt(y)}" '
            f'stroke="#7a838d" stroke-width="1.5" stroke-dasharray="8 6"/>'
        )

    seen_labels: list[str] = []
    for label, _, _ in traces:
        if label not in seen_labels:
            seen_labels.append(label)
    colors = {label: PALETTE[j % len(PALETTE)] for j, label in enumerate(seen_labels)}

    for label, t, v in traces:
        color = colors[label]
        if len(t) < 2:
            continue
        pts = " ".join(f"{_fmt(px(float(a)))},{_fmt(py(float(b)))}" for a, b in zip(t, v))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6" '
            f'stroke-opacity="0.85"/>'
        )

    for j, label in enumerate(seen_labels):
        color = colors[label]
        y = mt + 14 + 18 * j
        parts.append(
            f'<rect x="{_fmt(ml + iw - 150)}" y="{_fmt(y - 9)}" width="12" height="12" '
            f'fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_fmt(ml + iw - 132)}" y="{_fmt(y + 1)}" fill="#1d1d1d">{label}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
