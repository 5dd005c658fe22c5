"""``blockfree`` command line: simulate | montecarlo | bifurcation | schema.

Exit codes: 0 success, 1 usage/IO/parse error, 2 safety violation (and, for
``montecarlo``, any blocking event).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, svg
from .encounter import SimulationError, run_scenario
from .runspec import RunSpecError, load_run_spec, schema_text

EXIT_OK, EXIT_ERROR, EXIT_UNSAFE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _summary(metrics) -> str:
    lines = [
        f"min_separation: {metrics.min_separation:.6g}",
        f"violation_count: {metrics.violation_count}",
        f"infeasible_count: {metrics.infeasible_count}",
        f"t_end: {metrics.t_end:.6g}",
    ]
    for a in metrics.airplanes:
        ft = "nan" if a.flight_time is None else f"{a.flight_time:.6g}"
        lines.append(
            f"airplane {a.id}: reached_goal={a.reached_goal} flight_time={ft} "
            f"path_length={a.path_length:.6g} blocking_dwell={a.blocking_dwell:.6g}"
        )
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    try:
        scenario, output = load_run_spec(args.spec)
    except OSError as exc:
        print(f"error: cannot read {args.spec}: {exc.strerror}", file=sys.stderr)
        return EXIT_ERROR
    except RunSpecError as exc:
        print(f"error: {args.spec}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    changes = {}
    if args.baseline:
        changes["opinion_enabled"] = False
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        scenario = scenario.with_(**changes)
    out_dir = Path(args.out or output.out_dir)
    try:
        log, metrics = run_scenario(scenario)
    except SimulationError as exc:
        print(f"error: simulation aborted: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        if output.emit_csv or output.emit_svg:
            out_dir.mkdir(parents=True, exist_ok=True)
        if output.emit_csv:
            with open(out_dir / f"{scenario.name}.csv", "w", encoding="utf-8", newline="") as fh:
                log.write_csv(fh)
        if output.emit_svg:
            svg.write_run_svgs(out_dir, scenario.name, log, scenario)
        (out_dir / f"{scenario.name}_metrics.json").write_text(json.dumps(metrics.to_dict(), indent=2))
    except OSError as exc:
        print(f"error: writing outputs: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(_summary(metrics))
    return EXIT_UNSAFE if metrics.violation_count else EXIT_OK


def cmd_montecarlo(args) -> int:
    if args.n < 1:
        print("error: n must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    if args.workers < 1:
        print("error: workers must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    seed = args.seed if args.seed is not None else args.base_seed
    report = analysis.monte_carlo(args.n, seed, workers=args.workers)
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "montecarlo.txt").write_text(report.to_text(), encoding="utf-8")
        (out_dir / "montecarlo.json").write_text(report.to_json(), encoding="utf-8")
    except OSError as exc:
        print(f"error: writing outputs: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(report.to_text().split("\n\n")[0])
    return EXIT_UNSAFE if (report.violations or report.blocking_events) else EXIT_OK


def cmd_bifurcation(args) -> int:
    try:
        sweep = analysis.bifurcation_sweep((args.u_min, args.u_max), args.steps, args.d, args.kappa)
    except (ValueError, analysis.EquilibriumSearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "bifurcation.csv").write_text(sweep.to_csv(), encoding="utf-8")
        svg.write_bifurcation_svg(out_dir, "bifurcation", sweep)
    except OSError as exc:
        print(f"error: writing outputs: {exc}", file=sys.stderr)
        return EXIT_ERROR
    crit = "none" if sweep.detected_critical is None else f"{sweep.detected_critical:.6g}"
    print(f"predicted_critical: {sweep.predicted_critical:.6g}")
    print(f"detected_critical: {crit}")
    if sweep.bracket:
        print(f"bracket: [{sweep.bracket[0]:.6g}, {sweep.bracket[1]:.6g}]")
    return EXIT_OK


def cmd_schema(args) -> int:
    sys.stdout.write(schema_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blockfree", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one scenario from a JSON spec")
    s.add_argument("spec")
    s.add_argument("--baseline", action="store_true", help="disable opinion dynamics")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory (overrides the run spec)")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("montecarlo", help="baseline vs opinion over generated encounters")
    m.add_argument("n", type=int)
    m.add_argument("base_seed", type=int, nargs="?", default=0)
    m.add_argument("--seed", type=int, help="same as base_seed")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", default="out")
    m.set_defaults(func=cmd_montecarlo)

    b = sub.add_parser("bifurcation", help="equilibria of the reduced two-agent system")
    b.add_argument("d", type=float)
    b.add_argument("kappa", type=float)
    b.add_argument("u_min", type=float)
    b.add_argument("u_max", type=float)
    b.add_argument("steps", type=int)
    b.add_argument("--out", default="out")
    b.set_defaults(func=cmd_bifurcation)

    sc = sub.add_parser("schema", help="print the run-spec JSON schema")
    sc.set_defaults(func=cmd_schema)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
