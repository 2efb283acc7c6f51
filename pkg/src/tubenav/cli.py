"""Command-line front end: validate, run, compare, and sweep scenarios.

Exit codes are the behavioral contract:
  0  success (goal reached / validation clean / report written)
  1  validation failure or run that did not reach the goal
  2  tube violation during a closed-loop run
  3  configuration or usage error
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, load_config, parse_config
from .controller import input_norm_bound
from .errors import ConfigError, DomainError, PotentialSingularityError
from .geometry import validate_world
from .plots import paths_svg, scene_svg, velocity_svg
from .simulation import (
    SimConfig,
    Trajectory,
    _planner_field,
    batch_run,
    compute_metrics,
    integrate_closed_loop,
    integrate_reference,
    metrics_to_json,
    pf_closed_loop,
    sample_free_points,
    trajectory_to_csv,
)
from .kinematics import virtual_point

OUT_ENV = "TUBENAV_OUT"
PLANNER_CHOICES = ("tc", "tc-disc", "pf")
_MODE_BY_LABEL = {"tc": "continuous", "tc-disc": "discontinuous"}

# each velocity trace is thinned to at most this many samples before it is
# written; the full-rate data lives in the run CSVs
MAX_TRACE_POINTS = 2000


class _Parser(argparse.ArgumentParser):
    # argparse exits usage errors with status 2, which scripts would read as
    # a tube violation; remap them to the config/usage code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tubenav",
        description="Plan, track, and compare tube-following navigation scenarios.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument(
            "config",
            help="scenario file path, or the name of a bundled scenario "
            "(benchmark, lab_arena)",
        )
        sp.add_argument("--out", help=f"output directory (default: config out_dir, then ${OUT_ENV}, then '.')")
        sp.add_argument("--dt", type=float, help="override sim dt [s]")
        sp.add_argument("--duration", type=float, help="override sim duration [s]")
        sp.add_argument("--seed", type=int, help="override the sweep seed")
        sp.add_argument(
            "--clamp-input", action="store_true", help="saturate commands at the actuator limit"
        )

    val = sub.add_parser("validate", help="check the scenario and print the input-norm bound")
    val.add_argument("config", help="scenario file path or bundled name")

    run = sub.add_parser("run", help="simulate one scenario and write CSV, metrics, and a map")
    common(run)
    run.add_argument(
        "--reference-only", action="store_true", help="integrate the planner flow without the robot"
    )
    run.add_argument("--planner", choices=PLANNER_CHOICES, help="override the planner")

    cmp_ = sub.add_parser("compare", help="run several planners from shared random starts")
    common(cmp_)
    cmp_.add_argument(
        "--planner",
        dest="planners",
        choices=PLANNER_CHOICES,
        action="append",
        help="planner to include; give at least two",
    )
    cmp_.add_argument("--count", type=int, default=20, help="number of random starts")

    sweep = sub.add_parser("sweep", help="reference runs from many random starts")
    common(sweep)
    sweep.add_argument("--planner", choices=PLANNER_CHOICES, help="override the planner")
    sweep.add_argument("--count", type=int, default=20, help="number of random starts")

    return parser


def resolve_config(name: str) -> ScenarioConfig:
    """Load a scenario by filesystem path, falling back to the bundled set."""
    path = Path(name)
    if path.exists():
        return load_config(path)
    stem = name if name.endswith(".toml") else name + ".toml"
    res = resources.files("tubenav") / "configs" / stem
    if res.is_file():
        return parse_config(res.read_text(encoding="utf-8"))
    raise ConfigError(f"no such config file or bundled scenario: {name!r}")


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    for key in ("dt", "duration", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "clamp_input", False):
        changes["clamp_input"] = True
    sim = dataclasses.replace(cfg.sim, **changes) if changes else cfg.sim

    planner = cfg.planner
    label = getattr(args, "planner", None)
    if label in _MODE_BY_LABEL:
        planner = dataclasses.replace(planner, mode=_MODE_BY_LABEL[label])
    return dataclasses.replace(cfg, sim=sim, planner=planner)


def _out_dir(args, cfg: ScenarioConfig) -> Path:
    out = getattr(args, "out", None) or cfg.out_dir or os.environ.get(OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _planner_params(cfg: ScenarioConfig, label: str):
    if label == "pf":
        return cfg.pf
    return dataclasses.replace(cfg.planner, mode=_MODE_BY_LABEL[label])


def _field_norms(params, world, points: np.ndarray) -> np.ndarray:
    f = _planner_field(params, world)
    return np.array([math.hypot(*f(0.0, p)) for p in points])


def _stride(n: int) -> int:
    return max(1, -(-n // MAX_TRACE_POINTS))


def cmd_validate(cfg: ScenarioConfig) -> int:
    report = validate_world(cfg.world)
    bound = input_norm_bound(cfg.controller, cfg.planner.max_speed, cfg.robot.point_offset)
    limit = cfg.robot.input_limit
    print(f"input norm bound: {bound:.4g} (actuator limit {limit:g})")
    for warning in report.warnings:
        print(f"warning: {warning}")
    problems = list(report.violations)
    if bound > limit:
        problems.append(
            f"worst-case command norm {bound:.4g} exceeds the actuator limit {limit:g}; "
            "lower the gain or tube radius, or raise the limit"
        )
    if problems:
        for p in problems:
            print(f"violation: {p}", file=sys.stderr)
        return 1
    print("world: ok")
    return 0


def _write_run_artifacts(out: Path, stem: str, cfg, traj: Trajectory, tube) -> dict:
    metrics = compute_metrics(traj)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}_metrics.json"
    svg_path = out / f"{stem}.svg"
    csv_path.write_text(trajectory_to_csv(traj), encoding="utf-8")
    json_path.write_text(metrics_to_json(metrics), encoding="utf-8")
    svg_path.write_text(scene_svg(cfg.world, traj, tube_radius=tube), encoding="utf-8")
    for p in (csv_path, json_path, svg_path):
        print(f"wrote {p}")
    return metrics.to_dict()


def cmd_run(cfg: ScenarioConfig, args, out: Path, stem: str) -> int:
    report = validate_world(cfg.world)
    if not report.ok:
        for v in report.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1

    label = args.planner or {"continuous": "tc", "discontinuous": "tc-disc"}[cfg.planner.mode]
    params = _planner_params(cfg, label)

    try:
        if args.reference_only:
            if cfg.sim.start_pose is None:
                print("config error: [sim] start_pose is required to run", file=sys.stderr)
                return 3
            start = virtual_point(cfg.robot, cfg.sim.start_pose)
            traj = integrate_reference(params, cfg.world, start, cfg.sim)
            tube = None
        elif label == "pf":
            traj = pf_closed_loop(
                cfg.pf, cfg.robot, cfg.disturbance, cfg.world, cfg.sim, cfg.controller.tube_radius
            )
            tube = cfg.controller.tube_radius
        else:
            traj = integrate_closed_loop(
                params, cfg.controller, cfg.robot, cfg.disturbance, cfg.world, cfg.sim
            )
            tube = cfg.controller.tube_radius
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except (DomainError, PotentialSingularityError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1

    metrics = _write_run_artifacts(out, stem, cfg, traj, tube)
    reached = metrics["reached_goal"]
    print(
        f"planner={label} reached_goal={reached} "
        f"settling_time={metrics['settling_time']} tube_violated={traj.tube_violated}"
    )
    if traj.aborted:
        print(f"aborted: {traj.aborted}", file=sys.stderr)
        return 1
    if traj.tube_violated:
        print("tube violation: tracking error reached the tube wall", file=sys.stderr)
        return 2
    return 0 if reached else 1


def cmd_compare(cfg: ScenarioConfig, args, out: Path, stem: str) -> int:
    labels = list(dict.fromkeys(args.planners or []))
    if len(labels) < 2:
        print("usage error: compare needs at least two distinct --planner values", file=sys.stderr)
        return 3
    report = validate_world(cfg.world)
    if not report.ok:
        for v in report.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1

    starts = sample_free_points(cfg.world, args.count, seed=cfg.sim.seed)
    by_label: dict[str, list] = {}
    traces: list[tuple[str, np.ndarray, np.ndarray]] = []
    overlay: list[tuple[str, Trajectory]] = []
    csv_rows = ["planner,start,t,speed"]

    for label in labels:
        params = _planner_params(cfg, label)
        outcomes = batch_run(params, cfg.world, starts, cfg.sim)
        rows = []
        for oc in outcomes:
            if oc.error is not None:
                rows.append({"error": oc.error})
                continue
            k = _stride(len(oc.trajectory.t))
            t = oc.trajectory.t[::k]
            speed = _field_norms(params, cfg.world, oc.trajectory.reference[::k])
            traces.append((label, t, speed))
            overlay.append((label, oc.trajectory))
            csv_rows.extend(
                f"{label},{oc.index},{ti!r},{si!r}" for ti, si in zip(t, speed)
            )
            full_norms = _field_norms(params, cfg.world, oc.trajectory.reference)
            m = oc.metrics
            rows.append(
                {
                    "reached_goal": m.reached_goal,
                    "settling_time": m.settling_time,
                    "path_length": m.ref_path_length,
                    "min_clearance": m.min_ref_clearance,
                    "max_input_norm": float(np.max(full_norms)),
                }
            )
        by_label[label] = rows

    aggregate = {}
    for label in labels:
        rows = by_label[label]
        ok_rows = [r for r in rows if "error" not in r and r["reached_goal"]]
        aggregate[label] = {
            "success_rate": len(ok_rows) / len(rows) if rows else 0.0,
            "mean_path_length": (
                float(np.mean([r["path_length"] for r in ok_rows])) if ok_rows else None
            ),
            "max_input_norm": max(
                (r["max_input_norm"] for r in rows if "error" not in r), default=None
            ),
        }

    report_doc = {
        "planners": labels,
        "starts": [[float(s[0]), float(s[1])] for s in starts],
        "rows": [
            {"start": i, **{label: by_label[label][i] for label in labels}}
            for i in range(len(starts))
        ],
        "aggregate": aggregate,
    }
    json_path = out / f"{stem}_compare.json"
    csv_path = out / f"{stem}_velocity.csv"
    vel_path = out / f"{stem}_velocity.svg"
    map_path = out / f"{stem}_paths.svg"
    json_path.write_text(json.dumps(report_doc, indent=2) + "\n", encoding="utf-8")
    csv_path.write_text("\n".join(csv_rows) + "\n", encoding="utf-8")
    vel_path.write_text(
        velocity_svg(traces, guide=cfg.planner.max_speed, title="reference speed over time"),
        encoding="utf-8",
    )
    map_path.write_text(paths_svg(cfg.world, overlay, goal=cfg.planner.goal), encoding="utf-8")
    for p in (json_path, csv_path, vel_path, map_path):
        print(f"wrote {p}")
    for label in labels:
        agg = aggregate[label]
        mean = agg["mean_path_length"]
        maxn = agg["max_input_norm"]
        print(
            f"{label}: success {agg['success_rate']:.0%}, "
            f"mean path {'n/a' if mean is None else f'{mean:.3f} m'}, "
            f"max speed {'n/a' if maxn is None else f'{maxn:.4g}'}"
        )
    return 0


def cmd_sweep(cfg: ScenarioConfig, args, out: Path, stem: str) -> int:
    report = validate_world(cfg.world)
    if not report.ok:
        for v in report.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1

    label = args.planner or {"continuous": "tc", "discontinuous": "tc-disc"}[cfg.planner.mode]
    params = _planner_params(cfg, label)
    starts = sample_free_points(cfg.world, args.count, seed=cfg.sim.seed)
    outcomes = batch_run(params, cfg.world, starts, cfg.sim)

    rows = []
    overlay = []
    for oc in outcomes:
        if oc.error is not None:
            rows.append({"start": [float(oc.start[0]), float(oc.start[1])], "error": oc.error})
            continue
        overlay.append((label, oc.trajectory))
        m = oc.metrics
        rows.append(
            {
                "start": [float(oc.start[0]), float(oc.start[1])],
                "reached_goal": m.reached_goal,
                "settling_time": m.settling_time,
                "path_length": m.ref_path_length,
                "min_clearance": m.min_ref_clearance,
            }
        )
    reached = [r for r in rows if r.get("reached_goal")]
    doc = {
        "planner": label,
        "count": len(rows),
        "reached": len(reached),
        "min_clearance": min((r["min_clearance"] for r in rows if "error" not in r), default=None),
        "runs": rows,
    }
    json_path = out / f"{stem}_sweep.json"
    svg_path = out / f"{stem}_sweep.svg"
    json_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    svg_path.write_text(paths_svg(cfg.world, overlay, goal=cfg.planner.goal), encoding="utf-8")
    for p in (json_path, svg_path):
        print(f"wrote {p}")
    print(f"{label}: {len(reached)}/{len(rows)} starts reached the goal")
    return 0 if len(reached) == len(rows) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(resolve_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # bad override values surface through the dataclass checks
        print(f"config error: {exc}", file=sys.stderr)
        return 3

    if args.verb == "validate":
        return cmd_validate(cfg)

    out = _out_dir(args, cfg)
    stem = Path(args.config).stem
    if args.verb == "run":
        return cmd_run(cfg, args, out, stem)
    if args.verb == "compare":
        return cmd_compare(cfg, args, out, stem)
    return cmd_sweep(cfg, args, out, stem)


if __name__ == "__main__":
    raise SystemExit(main())
