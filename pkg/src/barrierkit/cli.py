"""Command-line front end.

Exit codes: 0 success, 1 pipeline incomplete (diagnostics are still
written), 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import output
from .barrier import ultimate_tangency_points
from .model import DomainError, RegionError, ValidationError, classify_region, forward_simulate
from .mrpi import analyze_mrpi
from .pipeline import TangencySummary, run_pipeline
from .region import OutsideWindowError, contains
from .scenario import load_scenario, resolve_scenario_path, scenario_to_dict
from .viability import default_seed, verify_point_viability

log = logging.getLogger("barrierkit")

EXIT_OK, EXIT_INCOMPLETE, EXIT_INVALID = 0, 1, 2


def _out_dir(args, scenario_path) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path("barrierkit-out") / Path(scenario_path).stem


def cmd_tangency(args) -> int:
    points = run_tangency(args.scenario)
    for tp in points:
        verdict = "exists" if tp["exists"] else "absent"
        where = "" if tp["in_box"] else " (outside box)"
        print(f"{tp['label']}: z = ({tp['z'][0]:.10g}, {tp['z'][1]:.10g}) "
              f"lambda = ({tp['lambda_final'][0]:g}, {tp['lambda_final'][1]:g}) "
              f"existence value = {tp['existence_value']:.10g} -> {verdict}{where}")
    if args.out is not None:
        path = output.atomic_write(Path(args.out) / "tangency.json",
                                   json.dumps(points, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")
    return EXIT_OK


def run_tangency(scenario_path) -> list[dict]:
    """Tangency points of a scenario file as plain dictionaries."""
    scenario = load_scenario(scenario_path)
    return [TangencySummary.of(tp).__dict__ for tp in ultimate_tangency_points(scenario)]


def cmd_boundary(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args, args.scenario)
    result = run_pipeline(scenario)
    summary = result.summary
    artifacts = {}
    for c in result.curves:
        name = f"curve_{c.label}.csv"
        output.atomic_write(out / name, output.curve_csv(c))
        artifacts[f"curve_{c.label}"] = name
    if result.region is not None:
        output.atomic_write(out / "boundary.csv", output.boundary_csv(result.region))
        artifacts["boundary"] = "boundary.csv"
    if result.curves:
        output.atomic_write(out / "figure.svg",
                            output.boundary_svg(scenario, result.points, result.curves,
                                                result.region))
        artifacts["figure"] = "figure.svg"
    artifacts["summary"] = "summary.json"
    summary.artifacts = artifacts
    output.atomic_write(out / "summary.json", summary.to_json())

    for c in summary.curves:
        verdict = "kept" if c.kept else "discarded"
        print(f"{c.origin}: {c.termination} at ({c.start_point[0]:.6g}, {c.start_point[1]:.6g}), "
              f"{c.switch_count} switch(es), {verdict}: {c.reason}")
    a = summary.assembly
    if a.status == "failed":
        print(f"assembly failed: {a.message}", file=sys.stderr)
        print(f"outputs in {out}")
        return EXIT_INCOMPLETE
    print(f"boundary: {a.status} loop, {' -> '.join(a.arcs)}")
    for note in a.notes:
        print(f"note: {note}")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_check_point(args) -> int:
    scenario = load_scenario(args.scenario)
    x = (args.x1, args.x2)
    if classify_region(x, scenario.box) == "outside_G":
        print("outside_G")
        if args.verify:
            print("verification refused: the point violates the state constraints", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK
    result = run_pipeline(scenario)
    if result.region is None:
        print(f"assembly failed: {result.summary.assembly.message}", file=sys.stderr)
        return EXIT_INCOMPLETE
    try:
        print(contains(result.region, x))
    except OutsideWindowError as exc:
        print(f"undetermined: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    if args.verify:
        seed = default_seed() if args.seed is None else args.seed
        report = verify_point_viability(x, scenario, horizon=args.horizon,
                                        n_samples=args.samples, seed=seed)
        print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_mrpi(args) -> int:
    scenario = load_scenario(args.scenario)
    result = analyze_mrpi(scenario)
    print(f"nontrivial: {str(result.nontrivial).lower()}")
    print(f"reason: {result.reason}")
    for note in result.notes:
        print(f"note: {note}")
    if result.region is not None:
        out = _out_dir(args, args.scenario)
        r = result.region
        output.atomic_write(out / "mrpi_region.csv", output.polyline_csv(r.boundary))
        output.atomic_write(out / "mrpi_region.svg",
                            output.mrpi_svg(scenario, r.boundary, r.equilibrium))
        output.atomic_write(out / "mrpi.json",
                            json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
        print(f"outputs in {out}")
    return EXIT_OK


def _load_schedule(path):
    p = Path(path)
    if not p.exists():
        bundled = resources.files("barrierkit.data") / "schedules" / p.name
        if not bundled.is_file():
            raise ValidationError(f"schedule file not found: {path}")
        p = Path(str(bundled))
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p.name}: invalid JSON ({exc.msg})") from exc
    rows = doc.get("schedule") if isinstance(doc, dict) else doc
    if isinstance(doc, dict) and "constant" in doc:
        rows = doc["constant"]
    if not isinstance(rows, list) or not rows:
        raise ValidationError("schedule must be a non-empty list of [t_start, u1, u2] rows "
                              "or {\"constant\": [u1, u2]}")
    return rows


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    schedule = _load_schedule(args.schedule)
    try:
        traj = forward_simulate(tuple(args.x0), schedule, args.T, scenario)
    except (TypeError, IndexError) as exc:
        raise ValidationError(f"malformed schedule: {exc}") from exc
    if args.out is not None:
        output.atomic_write(args.out, output.trajectory_csv(traj))
    else:
        sys.stdout.write(output.trajectory_csv(traj))
    if traj.violated:
        print(f"violation: g{traj.violated_constraint} at t = {traj.violation_time:.10g}",
              file=sys.stderr)
    else:
        print(f"no violation up to t = {args.T:g}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    print(f"{resolve_scenario_path(args.scenario)}: valid")
    print(json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barrierkit",
                                     description="Admissible sets of the controlled "
                                                 "predator-prey model.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_arg(p):
        p.add_argument("scenario", help="scenario JSON file (or the name of a bundled one)")

    p = sub.add_parser("tangency", help="tangency points and existence verdicts")
    scenario_arg(p)
    p.add_argument("--out", help="directory for tangency.json")
    p.set_defaults(func=cmd_tangency)

    p = sub.add_parser("boundary", help="compute curves and the admissible-set boundary")
    scenario_arg(p)
    p.add_argument("--out", help="output directory (default barrierkit-out/<scenario>)")
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("check-point", help="classify a state against the admissible set")
    scenario_arg(p)
    p.add_argument("x1", type=float)
    p.add_argument("x2", type=float)
    p.add_argument("--verify", action="store_true", help="run the sampled-control check")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (default: $BARRIERKIT_SEED or 42)")
    p.set_defaults(func=cmd_check_point)

    p = sub.add_parser("mrpi", help="robust invariance verdict")
    scenario_arg(p)
    p.add_argument("--out", help="output directory for the fixed-input region")
    p.set_defaults(func=cmd_mrpi)

    p = sub.add_parser("simulate", help="simulate a piecewise-constant input schedule")
    scenario_arg(p)
    p.add_argument("--x0", type=float, nargs=2, required=True, metavar=("X1", "X2"))
    p.add_argument("--schedule", required=True, help="schedule JSON file")
    p.add_argument("--T", type=float, required=True, help="horizon in hours")
    p.add_argument("--out", help="trajectory CSV path (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="parse and validate a scenario file")
    scenario_arg(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, RegionError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
