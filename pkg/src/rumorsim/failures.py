"""Crash schedules and stochastic call / message failures.

The adversary is oblivious: a :class:`FailurePlan` is fixed before round 0
and never looks at the execution. Call failures (``delta``) and message
drops (``gamma``) are independent coin flips drawn from the trial's own
streams, and no coin is drawn at all when the probability is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import NetworkState


class PlanError(ValueError):
    """A failure plan violates its invariants."""


@dataclass(frozen=True)
class FailurePlan:
    """``crash_schedule`` maps a process id to the round at whose start it stops."""

    epsilon: float = 0.0
    crash_schedule: Mapping[int, int] = field(default_factory=dict)
    delta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon < 1.0:
            raise PlanError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise PlanError(f"delta must lie in [0, 1), got {self.delta}")
        if not 0.0 <= self.gamma < 1.0:
            raise PlanError(f"gamma must lie in [0, 1), got {self.gamma}")
        for pid, rnd in self.crash_schedule.items():
            if pid < 0 or rnd < 0:
                raise PlanError(f"bad crash entry {pid} -> {rnd}")
        object.__setattr__(self, "crash_schedule", dict(sorted(self.crash_schedule.items())))
        object.__setattr__(self, "_ids", np.fromiter(self.crash_schedule.keys(), dtype=np.int64))
        object.__setattr__(self, "_rounds", np.fromiter(self.crash_schedule.values(), dtype=np.int64))

    def validate_for(self, n: int, origin: int) -> None:
        """Check the plan against a concrete network size and origin."""
        if origin in self.crash_schedule:
            raise PlanError(f"origin {origin} cannot be scheduled to crash")
        limit = math.floor(self.epsilon * n)
        if len(self.crash_schedule) > limit:
            raise PlanError(f"{len(self.crash_schedule)} crashes exceed floor(epsilon*n) = {limit}")
        bad = [pid for pid in self.crash_schedule if pid >= n]
        if bad:
            raise PlanError(f"crash schedule names ids outside [0, {n}): {bad[:5]}")

    @property
    def is_failure_free(self) -> bool:
        return not self.crash_schedule and self.delta == 0.0 and self.gamma == 0.0

    def scheduled_mask(self, n: int) -> np.ndarray:
        """Processes the adversary will eventually fail (the non-good ones)."""
        mask = np.zeros(n, dtype=bool)
        mask[self._ids] = True
        return mask


NO_FAILURES = FailurePlan()


def make_adversarial_plan(
    n: int,
    epsilon: float,
    origin: int = 0,
    rng: np.random.Generator | None = None,
    schedule: Mapping[int, int] | None = None,
    delta: float = 0.0,
    gamma: float = 0.0,
) -> FailurePlan:
    """Build a crash plan.

    Without ``schedule`` this is the worst case: ``floor(epsilon * n)``
    uniformly chosen non-origin processes crash at round 0. With
    ``schedule`` the explicit mapping is validated and loaded as is.
    """
    if not 0.0 <= epsilon < 1.0:
        raise PlanError(f"epsilon must lie in [0, 1), got {epsilon}")
    if not 0 <= origin < n:
        raise PlanError(f"origin {origin} out of range [0, {n})")
    if schedule is None:
        count = math.floor(epsilon * n)
        if count == 0:
            schedule = {}
        else:
            if rng is None:
                raise PlanError("worst-case plan needs a random generator")
            others = np.delete(np.arange(n), origin)
            chosen = rng.choice(others, size=count, replace=False)
            schedule = {int(pid): 0 for pid in chosen}
    plan = FailurePlan(epsilon=epsilon, crash_schedule=dict(schedule), delta=delta, gamma=gamma)
    plan.validate_for(n, origin)
    return plan


def load_crash_schedule(path: str | Path) -> dict[int, int]:
    """Read ``process_id fail_round`` pairs, one per line; ``#`` starts a comment."""
    schedule: dict[int, int] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise PlanError(f"{path}:{lineno}: expected 'process_id fail_round', got {raw!r}")
        try:
            pid, rnd = int(parts[0]), int(parts[1])
        except ValueError:
            raise PlanError(f"{path}:{lineno}: non-integer entry {raw!r}") from None
        if pid in schedule:
            raise PlanError(f"{path}:{lineno}: process {pid} listed twice")
        schedule[pid] = rnd
    return schedule


def apply_crashes(state: NetworkState, plan: FailurePlan) -> None:
    """Mark every process whose fail-round has been reached as failed."""
    if plan.crash_schedule:
        state.failed[plan._ids[plan._rounds <= state.round]] = True


def call_succeeds(rng: np.random.Generator, delta: float, size: int | tuple | None = None):
    """Coin(s) that are true with probability ``1 - delta``."""
    if delta == 0.0:
        return True if size is None else np.ones(size, dtype=bool)
    return rng.random(size) >= delta


def message_delivered(rng: np.random.Generator, gamma: float, size: int | tuple | None = None):
    """Coin(s) that are true with probability ``1 - gamma``."""
    return call_succeeds(rng, gamma, size)
