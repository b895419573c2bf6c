"""Round engines for regular pull, regular push, push-then-pull and polite push-pull.

All engines follow snapshot semantics: every decision in round ``r`` reads
the state as it was at the start of ``r``; newly informed processes are
written back only once the whole round has been resolved. Engines mutate
the :class:`~rumorsim.core.NetworkState` they are given and advance its
round counter.

The per-round logic lives in the ``*_transition`` kernels, which are pure
functions of the sampled targets and coin flips. The engines only do the
sampling around them; :func:`one_round_samples` reuses the same kernels to
simulate many independent copies of one round at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .core import (
    ConfigError,
    NetworkState,
    Protocol,
    ProtocolConfig,
    Purpose,
    TrialRng,
    init_state,
    log_base,
    sample_peer_matrix,
)
from .failures import NO_FAILURES, FailurePlan, apply_crashes, call_succeeds, message_delivered
from .metrics import TrialReport


class StopRule(str, Enum):
    FIXED_BUDGET = "fixed-budget"
    UNTIL_COMPLETE = "until-complete"

    @classmethod
    def parse(cls, value: "str | StopRule") -> "StopRule":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ConfigError(f"unknown stop rule {value!r} (fixed-budget or until-complete)") from None


@dataclass(frozen=True)
class RoundOutcome:
    new_informed: int
    rumor_messages: int
    requests_sent: int


# -- kernels -----------------------------------------------------------------


def pull_transition(
    serving: np.ndarray,
    targets: np.ndarray,
    call_ok: np.ndarray,
    delivered: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Resolve one round of pull requests.

    ``serving[p]`` says whether ``p`` answers pulls (informed at round start
    and not failed). ``targets`` has one row per requester. Coin arrays may
    be ``None``, meaning every call succeeds or every reply arrives. Returns
    which requesters received at least one reply and how many replies were
    sent.
    """
    replies = serving[targets]
    if call_ok is not None:
        replies &= call_ok
    landed = replies if delivered is None else replies & delivered
    # column-wise OR is much faster than any(axis=1) for the short fanout axis
    got = landed[:, 0].copy()
    for j in range(1, landed.shape[1]):
        got |= landed[:, j]
    return got, int(np.count_nonzero(replies))


def push_transition(size: int, targets: np.ndarray, call_ok: np.ndarray, delivered: np.ndarray) -> np.ndarray:
    """Mask over ``size`` processes that received at least one delivered push.

    ``None`` coin arrays mean no call fails or no message is dropped.
    """
    hit = np.zeros(size, dtype=bool)
    coins = [c for c in (call_ok, delivered) if c is not None]
    if coins:
        ok = coins[0] if len(coins) == 1 else coins[0] & coins[1]
        targets = targets[ok]
    hit[targets] = True
    return hit


def polite_transition(
    holds: np.ndarray,
    serving: np.ndarray,
    callers: np.ndarray,
    callees: np.ndarray,
    call_ok: np.ndarray,
    delivered: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Resolve one polite round where ``callers[j]`` phones ``callees[j]``.

    On every established call the caller sends the rumor if it holds it and
    the callee sends it back if it is serving. ``delivered`` has one column
    per direction. Returns the mask of processes that received the rumor and
    the number of transmissions.
    """
    forward = call_ok & holds[callers]
    backward = call_ok & serving[callees]
    received = np.zeros(holds.size, dtype=bool)
    received[callees[forward & delivered[:, 0]]] = True
    received[callers[backward & delivered[:, 1]]] = True
    return received, int(np.count_nonzero(forward) + np.count_nonzero(backward))


# -- round engines -------------------------------------------------------------


def _coins(rng: TrialRng, round_: int, purpose: Purpose, prob: float, shape: tuple) -> np.ndarray:
    # zero-probability failures draw nothing, so failure-free runs stay bit-identical
    if prob == 0.0:
        return np.ones(shape, dtype=bool)
    return call_succeeds(rng.stream(round_, purpose), prob, shape)


def pull_round(state: NetworkState, cfg: ProtocolConfig, plan: FailurePlan, rng: TrialRng) -> RoundOutcome:
    """Every live uninformed process sends ``f_in`` pull requests."""
    apply_crashes(state, plan)
    r = state.round
    alive = ~state.failed
    requesters = np.flatnonzero(~state.informed & alive)
    state.round += 1
    if requesters.size == 0:
        return RoundOutcome(0, 0, 0)
    targets = sample_peer_matrix(
        rng.stream(r, Purpose.PULL_TARGETS), state.n, cfg.f_in, cfg.sampling_mode, requesters
    )
    call_ok = _coins(rng, r, Purpose.PULL_CALLS, plan.delta, targets.shape)
    delivered = _coins(rng, r, Purpose.PULL_DROPS, plan.gamma, targets.shape)
    got, replies = pull_transition(state.informed & alive, targets, call_ok, delivered)
    state.informed[requesters[got]] = True
    return RoundOutcome(int(np.count_nonzero(got)), replies, int(targets.size))


def push_round(state: NetworkState, cfg: ProtocolConfig, plan: FailurePlan, rng: TrialRng) -> RoundOutcome:
    """Every live informed process pushes to ``f_out`` peers; every push counts."""
    apply_crashes(state, plan)
    r = state.round
    alive = ~state.failed
    senders = np.flatnonzero(state.informed & alive)
    state.round += 1
    if senders.size == 0:
        return RoundOutcome(0, 0, 0)
    targets = sample_peer_matrix(
        rng.stream(r, Purpose.PUSH_TARGETS), state.n, cfg.f_out, cfg.sampling_mode, senders
    )
    call_ok = _coins(rng, r, Purpose.PUSH_CALLS, plan.delta, targets.shape)
    delivered = _coins(rng, r, Purpose.PUSH_DROPS, plan.gamma, targets.shape)
    new = push_transition(state.n, targets, call_ok, delivered) & alive & ~state.informed
    state.informed |= new
    return RoundOutcome(int(np.count_nonzero(new)), int(targets.size), 0)


def polite_pushpull_round(
    state: NetworkState, cfg: ProtocolConfig, plan: FailurePlan, rng: TrialRng
) -> RoundOutcome:
    """Every live process makes one call and both ends share the rumor if held."""
    apply_crashes(state, plan)
    r = state.round
    alive = ~state.failed
    callers = np.flatnonzero(alive)
    state.round += 1
    if callers.size == 0:
        return RoundOutcome(0, 0, 0)
    callees = sample_peer_matrix(
        rng.stream(r, Purpose.POLITE_TARGETS), state.n, 1, cfg.sampling_mode, callers
    )[:, 0]
    call_ok = _coins(rng, r, Purpose.POLITE_CALLS, plan.delta, callees.shape)
    delivered = _coins(rng, r, Purpose.POLITE_DROPS, plan.gamma, (callees.size, 2))
    received, msgs = polite_transition(state.informed, state.informed & alive, callers, callees, call_ok, delivered)
    new = received & alive & ~state.informed
    state.informed |= new
    return RoundOutcome(int(np.count_nonzero(new)), msgs, int(callers.size))


Engine = Callable[[NetworkState, ProtocolConfig, FailurePlan, TrialRng], RoundOutcome]


def engine_for(cfg: ProtocolConfig, round_: int) -> Engine:
    """Round engine that ``cfg.protocol`` runs in round ``round_``."""
    if cfg.protocol is Protocol.REGULAR_PULL:
        return pull_round
    if cfg.protocol is Protocol.REGULAR_PUSH:
        return push_round
    if cfg.protocol is Protocol.PUSH_THEN_PULL:
        return push_round if round_ < cfg.switch_round else pull_round
    return polite_pushpull_round


# -- trial driver ----------------------------------------------------------------


def run_trial(
    cfg: ProtocolConfig,
    plan: FailurePlan = NO_FAILURES,
    stop: StopRule | str = StopRule.UNTIL_COMPLETE,
    rng: TrialRng | None = None,
    initial_informed: int = 1,
) -> TrialReport:
    """Run one dissemination and report rounds, messages and the ``u_r`` trajectory.

    Completion means every good process (one the adversary never schedules
    to crash) is informed. Exhausting the budget is not an error; the report
    then has ``completed=False``.
    """
    stop = StopRule.parse(stop)
    plan.validate_for(cfg.n, cfg.origin)
    rng = rng or TrialRng(cfg.seed)
    state = init_state(cfg.n, cfg.origin, initial_informed)
    good = ~plan.scheduled_mask(cfg.n)
    n_good = int(np.count_nonzero(good))

    def complete() -> bool:
        return int(np.count_nonzero(state.informed & good)) == n_good

    trajectory = [state.uninformed_count]
    messages = 0
    budget = cfg.budget
    while state.round < budget:
        if stop is StopRule.UNTIL_COMPLETE and complete():
            break
        outcome = engine_for(cfg, state.round)(state, cfg, plan, rng)
        messages += outcome.rumor_messages
        trajectory.append(state.uninformed_count)

    return TrialReport(
        completed=complete(),
        rounds=state.round,
        rumor_messages=messages,
        rumor_bits=messages * cfg.rumor_bits,
        control_bits=0,
        trajectory=tuple(trajectory),
        seed=rng.seed,
    )


def switch_round_for_overhead(n: int, f_out: int = 1) -> int:
    """Push-phase length ``floor(log_{f+1} n - log_{f+1} ln n)``, clamped at 0."""
    if n < 3:
        raise ConfigError(f"switch point needs n >= 3, got {n}")
    if f_out < 1:
        raise ConfigError(f"f_out must be >= 1, got {f_out}")
    value = log_base(n, f_out + 1) - log_base(math.log(n), f_out + 1)
    return max(0, math.floor(value))


# -- batched single-round sampling ---------------------------------------------


def _maybe_coins(rng: np.random.Generator, prob: float, shape: tuple) -> np.ndarray | None:
    return None if prob == 0.0 else call_succeeds(rng, prob, shape)


def _row_counts(mask: np.ndarray) -> np.ndarray:
    # count_nonzero without an axis is several times faster per element, so
    # loop over long rows and only fall back to the axis form for short ones
    if mask.shape[1] < 1024:
        return np.count_nonzero(mask, axis=1)
    return np.array([np.count_nonzero(row) for row in mask], dtype=np.int64)


def one_round_samples(
    state: NetworkState,
    cfg: ProtocolConfig,
    plan: FailurePlan,
    trials: int,
    rng: np.random.Generator,
    chunk_elems: int = 1 << 16,
) -> np.ndarray:
    """Uninformed counts after one round, from ``trials`` independent copies of ``state``.

    Copies are simulated together as a disjoint union of networks: copy
    ``b`` owns ids ``[b*n, (b+1)*n)`` and its peers are sampled inside that
    block. The round kernels are the same ones the engines use.
    """
    n = state.n
    alive = ~state.failed
    if plan.crash_schedule:
        state = state.copy()
        apply_crashes(state, plan)
        alive = ~state.failed
    informed = state.informed
    serving = informed & alive
    u0 = n - int(np.count_nonzero(informed))
    protocol = cfg.protocol
    if protocol is Protocol.PUSH_THEN_PULL:
        protocol = Protocol.REGULAR_PUSH if state.round < cfg.switch_round else Protocol.REGULAR_PULL

    if protocol is Protocol.REGULAR_PULL:
        actors, f = np.flatnonzero(~informed & alive), cfg.f_in
    elif protocol is Protocol.REGULAR_PUSH:
        actors, f = np.flatnonzero(serving), cfg.f_out
    else:
        actors, f = np.flatnonzero(alive), 1
    if actors.size == 0:
        return np.full(trials, u0, dtype=np.int64)

    per_copy = max(actors.size * f * (2 if protocol is Protocol.POLITE_PUSH_PULL else 1), n)
    batch = max(1, chunk_elems // per_copy)
    out = np.empty(trials, dtype=np.int64)
    # every full chunk reuses the same id layout; the last one takes a prefix
    batch = min(batch, trials)
    all_ids = np.tile(actors, batch)
    all_offsets = np.repeat(np.arange(batch, dtype=np.intp) * n, actors.size)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        self_ids = all_ids[: b * actors.size]
        offsets = all_offsets[: b * actors.size]
        targets = sample_peer_matrix(rng, n, f, cfg.sampling_mode, self_ids)
        call_ok = _maybe_coins(rng, plan.delta, targets.shape)
        if protocol is Protocol.REGULAR_PULL:
            delivered = _maybe_coins(rng, plan.gamma, targets.shape)
            got, _ = pull_transition(serving, targets, call_ok, delivered)
            learned = _row_counts(got.reshape(b, actors.size))
        elif protocol is Protocol.REGULAR_PUSH:
            # work on the contiguous (f, k) layout; coins are iid so their layout is free
            cols = targets.T
            cols += offsets
            call_ok = None if call_ok is None else call_ok.T
            delivered = _maybe_coins(rng, plan.gamma, cols.shape)
            hit = push_transition(b * n, cols, call_ok, delivered)
            learned = _row_counts(hit.reshape(b, n) & (alive & ~informed))
        else:
            call_ok = call_succeeds(rng, plan.delta, targets.shape[0])
            delivered = message_delivered(rng, plan.gamma, (targets.shape[0], 2))
            received, _ = polite_transition(
                np.tile(informed, b), np.tile(serving, b),
                self_ids + offsets, targets[:, 0] + offsets, call_ok, delivered,
            )
            fresh = np.tile(alive & ~informed, b)
            learned = _row_counts((received & fresh).reshape(b, n))
        out[done:done + b] = u0 - learned
        done += b
    return out
