"""Command-line entry point.

    rumorsim simulate --config FILE [--set key=value]... --out DIR
    rumorsim scenario NAME [--set key=value]... [--out DIR]
    rumorsim predict --protocol P --n N --fin F --fout F
    rumorsim sweep --param n --values 1024,4096 [--config FILE] [--set ...] --out DIR

Invalid input exits with status 2 and a one-line reason on stderr. A
scenario exits 0 iff all its assertions pass, 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys

from .. import analytics
from ..core import ConfigError
from .config import ExperimentSpec, parse_assignments, read_config_file, spec_from_mapping
from .experiment import run_experiment, run_trials, summary_row, trajectory_rows, write_outputs
from .scenarios import PRESETS, run_scenario
from ..metrics import aggregate


def _layered_spec(args) -> ExperimentSpec:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    values.update(parse_assignments(args.set or [], "--set"))
    return spec_from_mapping(values)


def cmd_simulate(args) -> int:
    spec = _layered_spec(args)
    result = run_experiment(spec, args.out, workers=args.workers)
    print(json.dumps(result.summary, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    base_values = read_config_file(args.config) if args.config else {}
    base_values.update(parse_assignments(args.set or [], "--set"))
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty")
    specs = [spec_from_mapping({**base_values, args.param: v}) for v in values]
    rows, trajectories = [], {}
    for raw, spec in zip(values, specs):
        agg = aggregate(run_trials(spec, args.workers))
        rows.append(summary_row(spec, agg))
        trajectories[f"trajectory_{args.param}_{raw}.csv"] = trajectory_rows(agg)
        print(json.dumps(rows[-1], sort_keys=True))
    write_outputs(args.out, rows, trajectories, {"summary": rows, "assertions": []})
    return 0


def cmd_scenario(args) -> int:
    overrides = parse_assignments(args.set or [], "--set")
    result = run_scenario(args.name, overrides, workers=args.workers)
    for a in result.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'}  {a.name}  [{a.detail}]")
    if args.out:
        doc = {
            "scenario": result.name,
            "passed": result.passed,
            "summary": result.rows,
            "assertions": [{"name": a.name, "passed": a.passed, "detail": a.detail} for a in result.assertions],
        }
        write_outputs(args.out, result.rows, result.trajectories, doc, result.tables)
    return 0 if result.passed else 1


def cmd_predict(args) -> int:
    rows = [
        analytics.predicted_rounds(args.protocol, args.n, args.fin, args.fout),
        analytics.predicted_messages(args.protocol, args.n, args.fin, args.fout),
    ]
    for p in rows:
        band = f" band=[{p.low:.3f}, {p.high:.3f}]" if p.low is not None else ""
        print(f"{p.quantity}: {p.value:.6g}{band}  ({p.validity})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rumorsim", description=__doc__.splitlines()[0])
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: RUMORSIM_WORKERS or CPU count)")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one experiment")
    sim.add_argument("--config")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    sc = sub.add_parser("scenario", help=f"run a preset: {', '.join(PRESETS)}")
    sc.add_argument("name")
    sc.add_argument("--set", action="append", metavar="KEY=VALUE")
    sc.add_argument("--out")
    sc.set_defaults(func=cmd_scenario)

    pr = sub.add_parser("predict", help="print analytic predictions")
    pr.add_argument("--protocol", required=True)
    pr.add_argument("--n", type=int, required=True)
    pr.add_argument("--fin", type=int, default=1)
    pr.add_argument("--fout", type=int, default=1)
    pr.set_defaults(func=cmd_predict)

    sw = sub.add_parser("sweep", help="run one experiment per parameter value")
    sw.add_argument("--param", required=True)
    sw.add_argument("--values", required=True)
    sw.add_argument("--config")
    sw.add_argument("--set", action="append", metavar="KEY=VALUE")
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:  # ConfigError, PlanError, ScheduleError are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
