"""Experiment specs from flat ``key=value`` files plus command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from ..core import ConfigError, Protocol, ProtocolConfig, Purpose, SamplingMode, TrialRng
from ..failures import FailurePlan, load_crash_schedule, make_adversarial_plan
from ..protocols import StopRule, switch_round_for_overhead


@dataclass(frozen=True)
class ExperimentSpec:
    protocol: Protocol = Protocol.REGULAR_PULL
    n: int = 1000
    f_in: int = 1
    f_out: int = 1
    sampling: SamplingMode = SamplingMode.WITHOUT_REPLACEMENT
    round_budget: int | None = None
    switch_round: int | None = None  # None: overhead-bounded switch point
    seed: int = 0
    origin: int = 0
    bits: int = 64
    eps: float = 0.0
    delta: float = 0.0
    gamma: float = 0.0
    crash_schedule: str | None = None
    trials: int = 100
    stop: StopRule = StopRule.UNTIL_COMPLETE
    initial_informed: int = 1
    scenario: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        object.__setattr__(self, "sampling", SamplingMode.parse(self.sampling))
        object.__setattr__(self, "stop", StopRule.parse(self.stop))
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        self.protocol_config()  # validates the embedded protocol fields
        self.failure_plan()

    def resolved_switch_round(self) -> int:
        if self.protocol is not Protocol.PUSH_THEN_PULL:
            return 0
        if self.switch_round is not None:
            return self.switch_round
        return switch_round_for_overhead(self.n, self.f_out) if self.n >= 3 else 0

    def protocol_config(self, seed: int | None = None) -> ProtocolConfig:
        return ProtocolConfig(
            n=self.n,
            f_in=self.f_in,
            f_out=self.f_out,
            sampling_mode=self.sampling,
            protocol=self.protocol,
            round_budget=self.round_budget,
            switch_round=self.resolved_switch_round(),
            seed=self.seed if seed is None else seed,
            origin=self.origin,
            rumor_bits=self.bits,
        )

    def failure_plan(self) -> FailurePlan:
        """The crash plan shared by every trial; worst case is drawn from the master seed."""
        schedule = load_crash_schedule(self.crash_schedule) if self.crash_schedule else None
        rng = TrialRng(self.seed).stream(0, Purpose.CRASH_PLAN)
        return make_adversarial_plan(
            self.n, self.eps, self.origin, rng, schedule=schedule, delta=self.delta, gamma=self.gamma
        )

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentSpec)}
_ALIASES = {"sampling_mode": "sampling", "fin": "f_in", "fout": "f_out", "epsilon": "eps", "master_seed": "seed"}


def _to_int(raw: str) -> int:
    raw = raw.strip()
    if raw.lower().startswith("0x"):
        return int(raw, 16)
    try:
        return int(raw)
    except ValueError:
        value = float(raw)  # accepts 1e4
        if not value.is_integer():
            raise
        return int(value)


def _convert(key: str, raw: str):
    if key in ("round_budget", "switch_round"):
        return None if raw.lower() in ("", "auto", "none", "default") else int(raw)
    if key == "crash_schedule":
        return raw or None
    if key in ("n", "f_in", "f_out", "seed", "origin", "bits", "trials", "initial_informed"):
        return _to_int(raw)
    if key in ("eps", "delta", "gamma"):
        return float(raw)
    return raw


def parse_assignments(lines: Iterable[str], source: str = "<args>") -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[_ALIASES.get(key, key)] = value
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    return parse_assignments(Path(path).read_text(encoding="utf-8").splitlines(), str(path))


def spec_from_mapping(values: Mapping[str, str], base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Build a spec from string values layered over ``base``; unknown keys are errors."""
    changes = {}
    for key, raw in values.items():
        key = _ALIASES.get(key, key)
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            changes[key] = _convert(key, raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    if base is None:
        return ExperimentSpec(**changes)
    return dataclasses.replace(base, **changes)
