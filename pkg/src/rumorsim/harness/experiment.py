"""Monte Carlo orchestration and CSV / JSON emission.

Trial ``i`` of an experiment with master seed ``m`` runs with seed
``m XOR splitmix64(i)``. Results are collected by trial index, so the
worker count never changes the outputs.
"""

from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ..core import trial_seed
from ..metrics import AggregateReport, TrialReport, aggregate
from ..protocols import run_trial
from .config import ExperimentSpec

WORKERS_ENV = "RUMORSIM_WORKERS"

SUMMARY_COLUMNS = (
    "scenario", "protocol", "n", "f_in", "f_out", "sampling", "eps", "delta", "gamma",
    "trials", "success_rate", "rounds_mean", "rounds_median", "rounds_p99",
    "msgs_mean", "msgs_median", "bits_mean", "seed",
)
TRAJECTORY_COLUMNS = ("round", "u_mean", "u_p10", "u_p90")


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _one_trial(args) -> TrialReport:
    spec, plan, index = args
    cfg = spec.protocol_config(seed=trial_seed(spec.seed, index))
    return run_trial(cfg, plan, spec.stop, initial_informed=spec.initial_informed)


def parallel_map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """``map`` over a process pool; results keep the input order."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def run_trials(spec: ExperimentSpec, workers: int | None = None) -> list[TrialReport]:
    plan = spec.failure_plan()
    return parallel_map(_one_trial, [(spec, plan, i) for i in range(spec.trials)], workers)


def summary_row(spec: ExperimentSpec, agg: AggregateReport) -> dict:
    return {
        "scenario": spec.scenario,
        "protocol": spec.protocol.value,
        "n": spec.n,
        "f_in": spec.f_in,
        "f_out": spec.f_out,
        "sampling": spec.sampling.value,
        "eps": spec.eps,
        "delta": spec.delta,
        "gamma": spec.gamma,
        "trials": agg.trials,
        "success_rate": agg.success_rate,
        "rounds_mean": agg.rounds_mean,
        "rounds_median": agg.rounds_median,
        "rounds_p99": agg.rounds_p99,
        "msgs_mean": agg.msgs_mean,
        "msgs_median": agg.msgs_median,
        "bits_mean": agg.bits_mean,
        "seed": spec.seed,
    }


def trajectory_rows(agg: AggregateReport) -> list[dict]:
    return [
        {"round": r, "u_mean": m, "u_p10": lo, "u_p90": hi}
        for r, (m, lo, hi) in enumerate(zip(agg.trajectory_mean, agg.trajectory_p10, agg.trajectory_p90))
    ]


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    reports: list[TrialReport]
    aggregate: AggregateReport
    summary: dict = field(default_factory=dict)


def run_experiment(spec: ExperimentSpec, out_dir: str | Path | None = None, workers: int | None = None) -> ExperimentResult:
    """Run ``spec.trials`` trials and optionally write summary and trajectory files."""
    reports = run_trials(spec, workers)
    agg = aggregate(reports)
    result = ExperimentResult(spec, reports, agg, summary_row(spec, agg))
    if out_dir is not None:
        write_outputs(
            out_dir,
            [result.summary],
            {"trajectory.csv": trajectory_rows(agg)},
            {"summary": [result.summary], "assertions": []},
        )
    return result


# -- emission -------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_outputs(
    out_dir: str | Path,
    summary_rows: Sequence[dict],
    trajectories: dict[str, list[dict]],
    json_doc: dict,
    extra_csv: dict[str, tuple[Sequence[str], list[dict]]] | None = None,
) -> Path:
    """Write all files into ``out_dir`` atomically; nothing is left behind on failure."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out.parent))
    try:
        (staging / "summary.csv").write_text(csv_text(summary_rows, SUMMARY_COLUMNS), encoding="utf-8")
        for name, rows in trajectories.items():
            (staging / name).write_text(csv_text(rows, TRAJECTORY_COLUMNS), encoding="utf-8")
        for name, (columns, rows) in (extra_csv or {}).items():
            (staging / name).write_text(csv_text(rows, columns), encoding="utf-8")
        (staging / "summary.json").write_text(
            json.dumps(json_doc, indent=2, sort_keys=True, default=_fmt) + "\n", encoding="utf-8"
        )
        out.mkdir(parents=True, exist_ok=True)
        for item in sorted(staging.iterdir()):
            os.replace(item, out / item.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return out
