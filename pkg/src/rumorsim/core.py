"""Network state, configuration and random peer sampling.

Every protocol in the package runs on a complete graph of ``n`` processes
with dense integer ids ``0..n-1``. Randomness comes from :class:`TrialRng`,
which hands out an independent Philox stream for each (round, purpose) pair
of a trial so that runs replay exactly from the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid protocol configuration or call arguments."""


class SamplingMode(str, Enum):
    WITH_REPLACEMENT = "with-replacement"
    WITHOUT_REPLACEMENT = "without-replacement-excluding-self"

    @classmethod
    def parse(cls, value: "str | SamplingMode") -> "SamplingMode":
        if isinstance(value, cls):
            return value
        aliases = {"wr": cls.WITH_REPLACEMENT, "wor": cls.WITHOUT_REPLACEMENT}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown sampling mode {value!r} (choose from {choices})") from None


class Protocol(str, Enum):
    REGULAR_PULL = "regular-pull"
    REGULAR_PUSH = "regular-push"
    PUSH_THEN_PULL = "regular-push-then-pull"
    POLITE_PUSH_PULL = "polite-push-pull"

    @classmethod
    def parse(cls, value: "str | Protocol") -> "Protocol":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            choices = ", ".join(p.value for p in cls)
            raise ConfigError(f"unknown protocol {value!r} (choose from {choices})") from None


def log_base(x: float, base: float) -> float:
    return math.log(x) / math.log(base)


def default_round_budget(protocol: Protocol, n: int, f_in: int, f_out: int, switch_round: int = 0) -> int:
    """Round budget guarding until-complete runs against non-termination."""
    pull_budget = math.ceil(8 * log_base(n, f_in + 1)) + 20
    if protocol is Protocol.REGULAR_PULL:
        return pull_budget
    if protocol is Protocol.PUSH_THEN_PULL:
        return switch_round + pull_budget
    if protocol is Protocol.REGULAR_PUSH:
        return math.ceil(8 * (log_base(n, f_out + 1) + math.log(n) / f_out)) + 20
    return math.ceil(8 * math.log2(n)) + 20


@dataclass(frozen=True)
class ProtocolConfig:
    """Parameters of one simulated dissemination.

    ``round_budget=None`` resolves to :func:`default_round_budget`.
    ``rumor_bits`` is the payload size charged per rumor-bearing message.
    """

    n: int
    f_in: int = 1
    f_out: int = 1
    sampling_mode: SamplingMode = SamplingMode.WITHOUT_REPLACEMENT
    protocol: Protocol = Protocol.REGULAR_PULL
    round_budget: int | None = None
    switch_round: int = 0
    seed: int = 0
    origin: int = 0
    rumor_bits: int = 64

    def __post_init__(self) -> None:
        object.__setattr__(self, "sampling_mode", SamplingMode.parse(self.sampling_mode))
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.f_in < 1 or self.f_out < 1:
            raise ConfigError(f"fanouts must be >= 1, got f_in={self.f_in}, f_out={self.f_out}")
        if self.sampling_mode is SamplingMode.WITHOUT_REPLACEMENT and max(self.f_in, self.f_out) > self.n - 1:
            raise ConfigError(
                f"without-replacement sampling needs fanouts <= n-1={self.n - 1}, "
                f"got f_in={self.f_in}, f_out={self.f_out}"
            )
        if self.round_budget is not None and self.round_budget < 0:
            raise ConfigError(f"round_budget must be >= 0, got {self.round_budget}")
        if self.switch_round < 0:
            raise ConfigError(f"switch_round must be >= 0, got {self.switch_round}")
        if self.switch_round > self.budget:
            raise ConfigError(f"switch_round {self.switch_round} exceeds round budget {self.budget}")
        if not 0 <= self.seed <= MASK64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= self.origin < self.n:
            raise ConfigError(f"origin {self.origin} out of range [0, {self.n})")
        if self.rumor_bits < 1:
            raise ConfigError(f"rumor_bits must be >= 1, got {self.rumor_bits}")

    @property
    def budget(self) -> int:
        if self.round_budget is not None:
            return self.round_budget
        return default_round_budget(self.protocol, self.n, self.f_in, self.f_out, self.switch_round)


@dataclass
class NetworkState:
    """Per-process informed/failed flags plus the round counter.

    The only mutable object in a trial; round engines update it in place.
    """

    round: int
    informed: np.ndarray
    failed: np.ndarray

    @property
    def n(self) -> int:
        return int(self.informed.size)

    @property
    def informed_count(self) -> int:
        return int(np.count_nonzero(self.informed))

    @property
    def uninformed_count(self) -> int:
        return self.n - self.informed_count

    def copy(self) -> "NetworkState":
        return NetworkState(self.round, self.informed.copy(), self.failed.copy())


@dataclass(frozen=True, order=True)
class RumorId:
    origin: int
    creation_round: int


def init_state(n: int, origin: int = 0, informed: int = 1) -> NetworkState:
    """Fresh state at round 0 where ``origin`` holds the rumor.

    ``informed > 1`` additionally informs the next ``informed - 1`` ids after
    the origin (cyclically), which is how endgame runs are seeded.
    """
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    if not 0 <= origin < n:
        raise ConfigError(f"origin {origin} out of range [0, {n})")
    if not 1 <= informed <= n:
        raise ConfigError(f"initially informed count must lie in [1, {n}], got {informed}")
    flags = np.zeros(n, dtype=bool)
    flags[(origin + np.arange(informed)) % n] = True
    return NetworkState(round=0, informed=flags, failed=np.zeros(n, dtype=bool))


# -- random streams ---------------------------------------------------------


class Purpose(IntEnum):
    """Independent random stream per use within a round."""

    PULL_TARGETS = 1
    PUSH_TARGETS = 2
    POLITE_TARGETS = 3
    PULL_CALLS = 4
    PULL_DROPS = 5
    PUSH_CALLS = 6
    PUSH_DROPS = 7
    POLITE_CALLS = 8
    POLITE_DROPS = 9
    CRASH_PLAN = 10


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(master: int, index: int) -> int:
    """Seed of trial ``index``: ``master XOR splitmix64(index)``."""
    return (master ^ splitmix64(index)) & MASK64


@dataclass(frozen=True)
class TrialRng:
    """Counter-based random streams for one trial.

    ``stream(round, purpose)`` is a fresh Philox generator keyed by the
    trial seed, the round and the purpose; asking twice gives the same stream.
    """

    seed: int

    def stream(self, round_: int, purpose: Purpose) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(round_), int(purpose)))
        return np.random.Generator(np.random.Philox(ss))


# -- peer sampling ----------------------------------------------------------


def _check_fanout(n: int, f: int, mode: SamplingMode) -> None:
    if f < 1:
        raise ConfigError(f"fanout must be >= 1, got {f}")
    if mode is SamplingMode.WITHOUT_REPLACEMENT and f > n - 1:
        raise ConfigError(f"without-replacement fanout {f} exceeds n-1={n - 1}")


def _id_dtype(n: int):
    # native index width: fancy indexing with narrower ids pays a conversion
    return np.intp


def sample_peer_matrix(
    rng: np.random.Generator,
    n: int,
    f: int,
    mode: SamplingMode | str,
    self_ids: np.ndarray,
) -> np.ndarray:
    """Sample ``f`` peers for each process in ``self_ids``; returns shape (k, f).

    Ids come back as ``intp``, stored column-major so the per-column passes
    below and in the round kernels touch contiguous memory. Without
    replacement, row ``j`` is a uniform ordered sample of ``f`` distinct ids
    from ``[0, n)`` minus ``self_ids[j]``. When collisions are rare the whole
    row is drawn at once and rows that hit their own id or repeat one are
    redrawn (rejection keeps the distribution exact); otherwise ids are drawn
    one column at a time by skipping over the already excluded ids in
    sorted order.
    """
    mode = SamplingMode.parse(mode)
    _check_fanout(n, f, mode)
    dtype = _id_dtype(n)
    self_ids = np.asarray(self_ids, dtype=dtype).reshape(-1)
    k = self_ids.size
    if mode is SamplingMode.WITH_REPLACEMENT:
        return rng.integers(0, n, size=(f, k), dtype=dtype).T
    if f * (f + 1) <= n // 2:
        return _wor_by_rejection(rng, n, f, self_ids)

    out = np.empty((f, k), dtype=dtype).T
    excluded = self_ids.reshape(k, 1)
    for j in range(f):
        x = rng.integers(0, n - 1 - j, size=k, dtype=dtype)
        # excluded is sorted per row; shifting past each one in turn maps x
        # onto the x-th id of the complement
        for col in range(excluded.shape[1]):
            x += x >= excluded[:, col]
        out[:, j] = x
        if j + 1 < f:
            excluded = np.sort(np.concatenate([excluded, x[:, None]], axis=1), axis=1)
    return out


def _bad_rows(cols: np.ndarray, ids: np.ndarray) -> np.ndarray:
    # cols is (f, k): one row per fanout slot; a sample is bad if it hits
    # its own id or repeats an id
    bad = np.zeros(cols.shape[1], dtype=bool)
    same = np.empty_like(bad)
    for a in range(cols.shape[0]):
        bad |= np.equal(cols[a], ids, out=same)
        for b in range(a + 1, cols.shape[0]):
            bad |= np.equal(cols[a], cols[b], out=same)
    return bad


def _wor_by_rejection(rng: np.random.Generator, n: int, f: int, self_ids: np.ndarray) -> np.ndarray:
    # iid uniform rows conditioned on "distinct and not self" are uniform
    # over the admissible ordered samples, so redrawing bad rows is exact
    out = rng.integers(0, n, size=(f, self_ids.size), dtype=self_ids.dtype)
    bad = np.flatnonzero(_bad_rows(out, self_ids))
    while bad.size:
        out[:, bad] = rng.integers(0, n, size=(f, bad.size), dtype=self_ids.dtype)
        bad = bad[_bad_rows(out[:, bad], self_ids[bad])]
    return out.T


def sample_peers(
    rng: np.random.Generator,
    n: int,
    f: int,
    mode: SamplingMode | str,
    self_id: int,
) -> list[int]:
    """Sample ``f`` peers for a single process."""
    if not 0 <= self_id < n:
        raise ConfigError(f"self_id {self_id} out of range [0, {n})")
    return sample_peer_matrix(rng, n, f, mode, np.array([self_id]))[0].tolist()
