"""Concurrent rumors with age stamps and known-rumor lists in pull requests.

Each rumor is pushed while it is young (``age < push_phase_len``) and
pulled afterwards until it retires at ``age >= lifetime``. A pull request
lists the active rumors the requester already knows, so a reply only
carries rumors the requester lacks.

Modeling simplification: processes read rumor activity from the global
schedule rather than inferring it from the ages they have seen. That
suppresses useless pull requests when nothing the process lacks is in its
pull phase.

Bit accounting per rumor-bearing message: ``size_b`` payload bits plus
``ceil(log2 n)`` bits of origin id plus ``ceil(log2 lifetime)`` bits of
age. A pull request costs the same id and age bits for every active rumor
it lists; those control bits are attributed to the listed rumors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ProtocolConfig, Purpose, RumorId, TrialRng, sample_peer_matrix
from .failures import NO_FAILURES, FailurePlan, apply_crashes
from .protocols import RoundOutcome, StopRule, _coins, switch_round_for_overhead


class ScheduleError(ValueError):
    """Malformed rumor creation schedule."""


def ceil_log2(x: int) -> int:
    return (x - 1).bit_length() if x > 1 else 0


@dataclass(frozen=True)
class Rumor:
    id: RumorId
    size_b: int
    push_phase_len: int
    lifetime: int

    def __post_init__(self) -> None:
        if self.size_b < 1:
            raise ScheduleError(f"rumor {self.id}: size_b must be >= 1")
        if not 0 <= self.push_phase_len <= self.lifetime:
            raise ScheduleError(f"rumor {self.id}: need 0 <= push_phase_len <= lifetime")

    def age(self, round_: int) -> int:
        return round_ - self.id.creation_round

    def is_active(self, round_: int) -> bool:
        return 0 <= self.age(round_) < self.lifetime

    def is_pushing(self, round_: int) -> bool:
        return 0 <= self.age(round_) < self.push_phase_len

    def is_pulling(self, round_: int) -> bool:
        return self.push_phase_len <= self.age(round_) < self.lifetime


def default_push_phase_len(n: int, f_out: int) -> int:
    return switch_round_for_overhead(n, f_out) if n >= 3 else 0


def default_lifetime(n: int, f_in: int, push_phase_len: int) -> int:
    return push_phase_len + math.ceil(8 * math.log(n) / math.log(f_in + 1)) + 20


def make_rumors(
    schedule: Iterable[tuple[int, int, int]],
    n: int,
    f_in: int = 1,
    f_out: int = 1,
    push_phase_len: int | None = None,
    lifetime: int | None = None,
) -> list[Rumor]:
    """Turn ``(origin, creation_round, size_b)`` triples into rumors with default phases."""
    push_len = default_push_phase_len(n, f_out) if push_phase_len is None else push_phase_len
    life = default_lifetime(n, f_in, push_len) if lifetime is None else lifetime
    rumors = []
    seen: set[RumorId] = set()
    for origin, created, size_b in schedule:
        if not 0 <= origin < n:
            raise ScheduleError(f"rumor origin {origin} out of range [0, {n})")
        if created < 0:
            raise ScheduleError(f"creation round must be >= 0, got {created}")
        rid = RumorId(int(origin), int(created))
        if rid in seen:
            raise ScheduleError(f"duplicate rumor id {rid}")
        seen.add(rid)
        rumors.append(Rumor(rid, int(size_b), push_len, life))
    return rumors


def load_rumor_schedule(path: str | Path) -> list[tuple[int, int, int]]:
    """Read ``origin creation_round size_b`` triples, one per line."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ScheduleError(f"{path}:{lineno}: expected 'origin creation_round size_b', got {raw!r}")
        try:
            out.append(tuple(int(p) for p in parts))
        except ValueError:
            raise ScheduleError(f"{path}:{lineno}: non-integer entry {raw!r}") from None
    return out


@dataclass
class ProcessKnowledge:
    """Which rumors each process holds; ``learned[k, p]`` is -1 until ``p`` learns rumor ``k``."""

    round: int
    knows: np.ndarray
    learned: np.ndarray
    failed: np.ndarray

    @classmethod
    def empty(cls, n_rumors: int, n: int) -> "ProcessKnowledge":
        return cls(
            round=0,
            knows=np.zeros((n_rumors, n), dtype=bool),
            learned=np.full((n_rumors, n), -1, dtype=np.int64),
            failed=np.zeros(n, dtype=bool),
        )


@dataclass
class RumorLedger:
    """Running per-rumor accounting for one trial."""

    messages: np.ndarray
    rumor_bits: np.ndarray
    control_bits: np.ndarray
    pull_receipts: np.ndarray
    max_age_sent: np.ndarray
    duplicate_pull_receipts: int = 0

    @classmethod
    def empty(cls, n_rumors: int, n: int) -> "RumorLedger":
        def zeros() -> np.ndarray:
            return np.zeros(n_rumors, dtype=np.int64)

        return cls(
            zeros(), zeros(), zeros(),
            pull_receipts=np.zeros((n_rumors, n), dtype=np.int64),
            max_age_sent=np.full(n_rumors, -1, dtype=np.int64),
        )


def multirumor_round(
    state: ProcessKnowledge,
    rumors: Sequence[Rumor],
    cfg: ProtocolConfig,
    plan: FailurePlan,
    rng: TrialRng,
    ledger: RumorLedger,
) -> RoundOutcome:
    """One round of push-then-pull for every active rumor at once.

    A live process holding rumors in their push phase sends one push per
    sampled peer carrying all of them. A live process lacking a rumor in its
    pull phase sends ``f_in`` requests; the reply carries the pull-phase
    rumors the responder holds and the requester does not list. With one
    rumor this consumes randomness exactly like the single-rumor engines.
    """
    apply_crashes(state, plan)
    r = state.round
    n = state.knows.shape[1]
    for k, rumor in enumerate(rumors):
        if rumor.id.creation_round == r and not state.knows[k, rumor.id.origin]:
            state.knows[k, rumor.id.origin] = True
            state.learned[k, rumor.id.origin] = r

    snapshot = state.knows.copy()
    alive = ~state.failed
    pushing = np.array([ru.is_pushing(r) for ru in rumors], dtype=bool)
    pulling = np.array([ru.is_pulling(r) for ru in rumors], dtype=bool)
    active = np.array([ru.is_active(r) for ru in rumors], dtype=bool)
    id_bits = ceil_log2(n)
    new_msgs = 0
    requests = 0
    learned = np.zeros_like(snapshot)

    if pushing.any():
        holds_push = snapshot[pushing]
        senders = np.flatnonzero(holds_push.any(axis=0) & alive)
        if senders.size:
            targets = sample_peer_matrix(
                rng.stream(r, Purpose.PUSH_TARGETS), n, cfg.f_out, cfg.sampling_mode, senders
            )
            call_ok = _coins(rng, r, Purpose.PUSH_CALLS, plan.delta, targets.shape)
            carried = holds_push[:, senders]
            delivered = _coins(rng, r, Purpose.PUSH_DROPS, plan.gamma, (*targets.shape, int(pushing.sum())))
            for j, k in enumerate(np.flatnonzero(pushing)):
                rumor = rumors[k]
                sent = np.broadcast_to(carried[j][:, None], targets.shape)
                count = int(np.count_nonzero(sent))
                ledger.messages[k] += count
                ledger.rumor_bits[k] += count * (rumor.size_b + id_bits + ceil_log2(rumor.lifetime))
                new_msgs += count
                if count:
                    ledger.max_age_sent[k] = max(ledger.max_age_sent[k], rumor.age(r))
                ok = sent & call_ok & delivered[:, :, j]
                hit = np.zeros(n, dtype=bool)
                hit[targets[ok]] = True
                learned[k] |= hit & alive

    if pulling.any():
        lacking = (~snapshot[pulling]).any(axis=0)
        requesters = np.flatnonzero(lacking & alive)
        if requesters.size:
            targets = sample_peer_matrix(
                rng.stream(r, Purpose.PULL_TARGETS), n, cfg.f_in, cfg.sampling_mode, requesters
            )
            requests = int(targets.size)
            call_ok = _coins(rng, r, Purpose.PULL_CALLS, plan.delta, targets.shape)
            delivered = _coins(rng, r, Purpose.PULL_DROPS, plan.gamma, (*targets.shape, int(pulling.sum())))
            serving = alive[targets] & call_ok
            for k in np.flatnonzero(active):
                # control bits: every request lists each active rumor its sender knows
                listed = int(np.count_nonzero(snapshot[k, requesters])) * cfg.f_in
                ledger.control_bits[k] += listed * (id_bits + ceil_log2(rumors[k].lifetime))
            for j, k in enumerate(np.flatnonzero(pulling)):
                rumor = rumors[k]
                reply = serving & snapshot[k][targets] & ~snapshot[k, requesters][:, None]
                count = int(np.count_nonzero(reply))
                ledger.messages[k] += count
                ledger.rumor_bits[k] += count * (rumor.size_b + id_bits + ceil_log2(rumor.lifetime))
                new_msgs += count
                if count:
                    ledger.max_age_sent[k] = max(ledger.max_age_sent[k], rumor.age(r))
                received = (reply & delivered[:, :, j]).sum(axis=1)
                ledger.pull_receipts[k, requesters] += received
                learned[k, requesters[received > 0]] = True

    fresh = learned & ~state.knows
    state.knows |= fresh
    state.learned[fresh] = r
    ledger.duplicate_pull_receipts = int(np.count_nonzero(ledger.pull_receipts > 1))
    state.round += 1
    return RoundOutcome(int(np.count_nonzero(fresh)), new_msgs, requests)


@dataclass(frozen=True)
class RumorStats:
    messages: int
    rumor_bits: int
    control_bits: int
    informed: int
    completed: bool
    max_age_sent: int

    @property
    def total_bits(self) -> int:
        return self.rumor_bits + self.control_bits


@dataclass(frozen=True)
class MultiRumorReport:
    completed: bool
    rounds: int
    per_rumor: dict = field(default_factory=dict)
    duplicate_pull_receipts: int = 0
    seed: int = 0


def run_multirumor_trial(
    cfg: ProtocolConfig,
    rumors: Sequence[Rumor],
    plan: FailurePlan = NO_FAILURES,
    stop: StopRule | str = StopRule.UNTIL_COMPLETE,
    rng: TrialRng | None = None,
    round_budget: int | None = None,
) -> MultiRumorReport:
    """Run until every good process knows every rumor, or until all rumors retire."""
    stop = StopRule.parse(stop)
    ids = [ru.id for ru in rumors]
    if len(set(ids)) != len(ids):
        raise ScheduleError("duplicate rumor ids in schedule")
    for ru in rumors:
        if not 0 <= ru.id.origin < cfg.n:
            raise ScheduleError(f"rumor origin {ru.id.origin} out of range")
        if ru.id.origin in plan.crash_schedule:
            raise ScheduleError(f"rumor origin {ru.id.origin} is scheduled to crash")
    rng = rng or TrialRng(cfg.seed)
    state = ProcessKnowledge.empty(len(rumors), cfg.n)
    ledger = RumorLedger.empty(len(rumors), cfg.n)
    good = ~plan.scheduled_mask(cfg.n)
    last = max((ru.id.creation_round + ru.lifetime for ru in rumors), default=0)
    budget = last if round_budget is None else round_budget

    def all_known() -> np.ndarray:
        return (state.knows | ~good).all(axis=1)

    def done() -> bool:
        created = all(ru.id.creation_round < state.round for ru in rumors)
        return created and bool(all_known().all())

    while state.round < budget:
        if stop is StopRule.UNTIL_COMPLETE and done():
            break
        multirumor_round(state, rumors, cfg, plan, rng, ledger)

    known = all_known()
    per_rumor = {
        ru.id: RumorStats(
            messages=int(ledger.messages[k]),
            rumor_bits=int(ledger.rumor_bits[k]),
            control_bits=int(ledger.control_bits[k]),
            informed=int(np.count_nonzero(state.knows[k])),
            completed=bool(known[k]),
            max_age_sent=int(ledger.max_age_sent[k]),
        )
        for k, ru in enumerate(rumors)
    }
    return MultiRumorReport(
        completed=bool(known.all()) if rumors else True,
        rounds=state.round,
        per_rumor=per_rumor,
        duplicate_pull_receipts=ledger.duplicate_pull_receipts,
        seed=rng.seed,
    )


def per_rumor_bit_report(report: MultiRumorReport) -> dict[RumorId, dict[str, int]]:
    """Bits and messages attributed to each rumor of a trial."""
    return {
        rid: {"rumor_bits": s.rumor_bits, "control_bits": s.control_bits, "messages": s.messages}
        for rid, s in sorted(report.per_rumor.items())
    }
