"""Per-trial reports and their aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class TrialReport:
    completed: bool
    rounds: int
    rumor_messages: int
    rumor_bits: int
    control_bits: int
    trajectory: tuple[int, ...]
    seed: int

    @property
    def final_uninformed(self) -> int:
        return self.trajectory[-1]


def lower_median(values: Sequence[float]) -> float:
    """Median; even-length inputs take the lower-middle element."""
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def nearest_rank(values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile (``pct`` in (0, 100])."""
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class AggregateReport:
    trials: int
    success_rate: float
    rounds_mean: float
    rounds_median: int
    rounds_p99: int
    rounds_max: int
    msgs_mean: float
    msgs_median: int
    msgs_max: int
    bits_mean: float
    control_bits_mean: float
    trajectory_mean: tuple[float, ...]
    trajectory_p10: tuple[int, ...]
    trajectory_p90: tuple[int, ...]


def _padded_trajectories(reports: Sequence[TrialReport]) -> np.ndarray:
    # A stopped trial keeps its last u_r for the remaining rounds.
    width = max(len(r.trajectory) for r in reports)
    out = np.empty((len(reports), width), dtype=np.int64)
    for row, rep in enumerate(reports):
        traj = rep.trajectory
        out[row, : len(traj)] = traj
        out[row, len(traj):] = traj[-1]
    return out


def aggregate(reports: Sequence[TrialReport]) -> AggregateReport:
    """Order-independent summary statistics over a set of trials."""
    if not reports:
        raise ValueError("aggregate needs at least one trial report")
    # canonical order so float sums do not depend on the input order
    reports = sorted(reports, key=lambda r: (r.seed, r.rounds, r.rumor_messages, r.trajectory))
    rounds = [r.rounds for r in reports]
    msgs = [r.rumor_messages for r in reports]
    traj = _padded_trajectories(reports)
    traj_sorted = np.sort(traj, axis=0)
    t = len(reports)
    p10 = traj_sorted[max(1, math.ceil(0.10 * t)) - 1]
    p90 = traj_sorted[max(1, math.ceil(0.90 * t)) - 1]
    return AggregateReport(
        trials=t,
        success_rate=sum(r.completed for r in reports) / t,
        rounds_mean=math.fsum(rounds) / t,
        rounds_median=lower_median(rounds),
        rounds_p99=nearest_rank(rounds, 99),
        rounds_max=max(rounds),
        msgs_mean=math.fsum(msgs) / t,
        msgs_median=lower_median(msgs),
        msgs_max=max(msgs),
        bits_mean=math.fsum(r.rumor_bits for r in reports) / t,
        control_bits_mean=math.fsum(r.control_bits for r in reports) / t,
        trajectory_mean=tuple(float(x) for x in traj.sum(axis=0) / t),
        trajectory_p10=tuple(int(x) for x in p10),
        trajectory_p90=tuple(int(x) for x in p90),
    )


def overhead(report: TrialReport, n: int) -> int:
    """Redundant rumor transmissions beyond the ``n - 1`` any dissemination needs."""
    if not report.completed:
        raise ValueError("overhead is defined for completed trials only")
    return report.rumor_messages - (n - 1)
