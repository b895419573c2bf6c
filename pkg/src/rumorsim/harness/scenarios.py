"""Named experiment presets with machine-checkable assertions.

Every preset takes string overrides (the CLI's ``--set key=value``). Keys
that belong to :class:`ExperimentSpec` (``trials``, ``seed``, ``eps``...)
override the preset's base spec; ``n_values`` and ``fanouts`` take
comma-separated integers and replace the preset's sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .. import analytics
from ..core import ConfigError, Protocol, ProtocolConfig, trial_seed
from ..metrics import AggregateReport, lower_median, nearest_rank
from ..multirumor import make_rumors, run_multirumor_trial
from ..protocols import switch_round_for_overhead
from .config import ExperimentSpec, spec_from_mapping
from .experiment import ExperimentResult, parallel_map, run_experiment, summary_row, trajectory_rows


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    detail: str


@dataclass
class ScenarioResult:
    name: str
    rows: list[dict] = field(default_factory=list)
    trajectories: dict[str, list[dict]] = field(default_factory=dict)
    assertions: list[Assertion] = field(default_factory=list)
    tables: dict[str, tuple[tuple[str, ...], list[dict]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.assertions.append(Assertion(name, bool(passed), detail))

    def record(self, label: str, result: ExperimentResult) -> None:
        self.rows.append(result.summary)
        self.trajectories[f"trajectory_{label}.csv"] = trajectory_rows(result.aggregate)


class _Params:
    """Split overrides into spec fields and sweep lists."""

    LIST_KEYS = ("n_values", "fanouts")

    def __init__(self, name: str, overrides: Mapping[str, str], base: dict):
        self.lists = {k: [int(float(v)) for v in overrides[k].split(",") if v.strip()]
                      for k in self.LIST_KEYS if k in overrides}
        spec_keys = {k: v for k, v in overrides.items() if k not in self.LIST_KEYS}
        base = {**base, "scenario": name}
        self.spec = spec_from_mapping(spec_keys, ExperimentSpec(**base))

    def get(self, key: str, default: list[int]) -> list[int]:
        return self.lists.get(key, default)


def _run(params: _Params, workers: int | None, **changes) -> ExperimentResult:
    return run_experiment(params.spec.replace(**changes), workers=workers)


# -- presets ---------------------------------------------------------------------


def message_optimality(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    p = _Params("message-optimality", overrides, {"protocol": "regular-pull", "f_in": 1, "trials": 100})
    res = ScenarioResult(p.spec.scenario)
    for n in p.get("n_values", [1000, 10000]):
        r = _run(p, workers, n=n)
        res.record(f"n{n}", r)
        exact = all(t.rumor_messages == n - 1 for t in r.reports if t.completed)
        res.check(f"n={n} messages == n-1 on every completed trial", exact,
                  f"min={min(t.rumor_messages for t in r.reports)} max={r.aggregate.msgs_max}")
        res.check(f"n={n} success_rate == 1", r.aggregate.success_rate == 1.0,
                  f"success_rate={r.aggregate.success_rate}")
    return res


def pull_rounds_scaling(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    p = _Params("pull-rounds-scaling", overrides, {"protocol": "regular-pull", "trials": 200})
    res = ScenarioResult(p.spec.scenario)
    ns = p.get("n_values", [2 ** k for k in (8, 10, 12, 14, 16)])
    for f in p.get("fanouts", [1, 3]):
        ratios = []
        for n in ns:
            r = _run(p, workers, n=n, f_in=f)
            res.record(f"f{f}_n{n}", r)
            ratios.append(r.aggregate.rounds_median / analytics.log_base(n, f + 1))
        mid = (max(ratios) + min(ratios)) / 2
        shown = ", ".join(f"{x:.3f}" for x in ratios)
        res.check(f"f_in={f} median/log_(f+1) n within [1, 8]", all(1 <= x <= 8 for x in ratios), shown)
        res.check(f"f_in={f} ratio within +-50% of midpoint {mid:.3f}",
                  all(0.5 * mid <= x <= 1.5 * mid for x in ratios), shown)
    return res


def endgame(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    p = _Params("endgame", overrides, {"protocol": "regular-pull", "f_in": 1, "trials": 100})
    res = ScenarioResult(p.spec.scenario)
    for n in p.get("n_values", [2 ** 12, 2 ** 16]):
        start = math.ceil(n / math.log(n))
        end = _run(p, workers, n=n, initial_informed=start)
        full = _run(p, workers, n=n)
        res.record(f"endgame_n{n}", end)
        res.record(f"full_n{n}", full)
        limit = 8 * math.log2(math.log(n)) + 10
        res.check(f"n={n} endgame median <= 8 log2 ln n + 10", end.aggregate.rounds_median <= limit,
                  f"start={start} median={end.aggregate.rounds_median} limit={limit:.2f}")
        res.check(f"n={n} endgame median <= half the full-run median",
                  end.aggregate.rounds_median <= 0.5 * full.aggregate.rounds_median,
                  f"endgame={end.aggregate.rounds_median} full={full.aggregate.rounds_median}")
    return res


def failure_robustness(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    base = {"protocol": "regular-pull", "f_in": 1, "n": 10000, "eps": 0.5, "delta": 0.5, "trials": 200}
    p = _Params("failure-robustness", overrides, base)
    res = ScenarioResult(p.spec.scenario)
    for n in p.get("n_values", [p.spec.n]):
        budget = math.floor(8 * math.log2(n) + 40)
        r = _run(p, workers, n=n, round_budget=budget, stop="until-complete")
        res.record(f"n{n}", r)
        res.check(f"n={n} good processes informed within {budget} rounds in >= 99% of trials",
                  r.aggregate.success_rate >= 0.99, f"success_rate={r.aggregate.success_rate}")
        res.check(f"n={n} rumor messages <= n on every trial", r.aggregate.msgs_max <= n,
                  f"max={r.aggregate.msgs_max}")
    return res


def pushpull_overhead(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    p = _Params("pushpull-overhead", overrides,
                {"protocol": "regular-push-then-pull", "f_in": 1, "f_out": 1, "trials": 100})
    res = ScenarioResult(p.spec.scenario)
    for n in p.get("n_values", [2 ** 12, 2 ** 16]):
        switch = switch_round_for_overhead(n, p.spec.f_out)
        r = _run(p, workers, n=n, switch_round=switch)
        res.record(f"n{n}", r)
        overheads = [t.rumor_messages - (n - 1) for t in r.reports]
        mean_overhead = sum(overheads) / len(overheads)
        bound = 10 * n / math.log(n) ** 2
        res.check(f"n={n} all trials complete", r.aggregate.success_rate == 1.0,
                  f"success_rate={r.aggregate.success_rate}")
        res.check(f"n={n} mean overhead <= 10 n/(ln n)^2 (switch_round={switch})", mean_overhead <= bound,
                  f"mean={mean_overhead:.2f} bound={bound:.2f}")
        res.check(f"n={n} total messages <= 1.2 n", r.aggregate.msgs_max <= 1.2 * n,
                  f"max={r.aggregate.msgs_max} limit={1.2 * n:.1f}")
    return res


def _mean_overhead_ratio(r: ExperimentResult, n: int) -> float:
    return (r.aggregate.msgs_mean - (n - 1)) / n


def baseline_blowup(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    p = _Params("baseline-blowup", overrides, {"trials": 100})
    res = ScenarioResult(p.spec.scenario)
    ns = p.get("n_values", [2 ** 10, 2 ** 12, 2 ** 14])
    polite, pull_zero = [], True
    for n in ns:
        r = _run(p, workers, n=n, protocol="polite-push-pull")
        res.record(f"polite_n{n}", r)
        polite.append(_mean_overhead_ratio(r, n))
        q = _run(p, workers, n=n, protocol="regular-pull", f_in=1)
        res.record(f"pull_n{n}", q)
        pull_zero &= all(t.completed and t.rumor_messages == n - 1 for t in q.reports)
    res.check("polite overhead/n strictly increases with n",
              all(a < b for a, b in zip(polite, polite[1:])), ", ".join(f"{x:.4f}" for x in polite))
    res.check("regular pull overhead stays 0", pull_zero, f"n_values={ns}")
    return res


def push_messages(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    p = _Params("push-messages", overrides, {"protocol": "regular-push", "f_out": 1, "trials": 100})
    res = ScenarioResult(p.spec.scenario)
    ratios = []
    for n in p.get("n_values", [2 ** 10, 2 ** 12, 2 ** 14]):
        r = _run(p, workers, n=n)
        res.record(f"n{n}", r)
        ratios.append(r.aggregate.msgs_mean / (n * math.log(n)))
    shown = ", ".join(f"{x:.4f}" for x in ratios)
    mid = (max(ratios) + min(ratios)) / 2
    res.check("push messages/(n ln n) within [0.2, 3]", all(0.2 <= x <= 3 for x in ratios), shown)
    res.check(f"push messages/(n ln n) within +-50% of midpoint {mid:.4f}",
              all(0.5 * mid <= x <= 1.5 * mid for x in ratios), shown)
    return res


RUMOR_COLUMNS = (
    "origin", "creation_round", "size_b", "messages_mean", "messages_max",
    "rumor_bits_mean", "control_bits_mean", "total_bits_mean", "total_bits_max",
)


def _multirumor_trial(args):
    cfg, rumors = args
    return run_multirumor_trial(cfg, rumors)


def multirumor_bits(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    base = {"protocol": "regular-push-then-pull", "n": 10000, "f_in": 1, "f_out": 1, "bits": 512, "trials": 50}
    p = _Params("multirumor-bits", overrides, base)
    res = ScenarioResult(p.spec.scenario)
    spec = p.spec
    n, b = spec.n, spec.bits
    origins = [k * n // 3 for k in range(3)]
    rumors = make_rumors([(o, 0, b) for o in origins], n, spec.f_in, spec.f_out)
    cfgs = [
        (ProtocolConfig(n=n, f_in=spec.f_in, f_out=spec.f_out, sampling_mode=spec.sampling,
                        protocol=Protocol.PUSH_THEN_PULL, switch_round=rumors[0].push_phase_len,
                        seed=trial_seed(spec.seed, i), rumor_bits=b), rumors)
        for i in range(spec.trials)
    ]
    reports = parallel_map(_multirumor_trial, cfgs, workers)
    rows = []
    for ru in rumors:
        stats = [rep.per_rumor[ru.id] for rep in reports]
        msgs = [s.messages for s in stats]
        total = [s.total_bits for s in stats]
        rows.append({
            "origin": ru.id.origin, "creation_round": ru.id.creation_round, "size_b": ru.size_b,
            "messages_mean": float(np.mean(msgs)), "messages_max": max(msgs),
            "rumor_bits_mean": float(np.mean([s.rumor_bits for s in stats])),
            "control_bits_mean": float(np.mean([s.control_bits for s in stats])),
            "total_bits_mean": float(np.mean(total)), "total_bits_max": max(total),
        })
    res.tables["rumors.csv"] = (RUMOR_COLUMNS, rows)
    res.check("every rumor reaches every process", all(rep.completed for rep in reports),
              f"completed={sum(rep.completed for rep in reports)}/{len(reports)}")
    worst_msgs = max(r["messages_max"] for r in rows)
    worst_bits = max(r["total_bits_max"] for r in rows)
    res.check("per-rumor messages <= 1.1 n on every trial", worst_msgs <= 1.1 * n,
              f"max={worst_msgs} limit={1.1 * n:.0f}")
    res.check("per-rumor total bits <= 1.2 n b on every trial", worst_bits <= 1.2 * n * b,
              f"max={worst_bits} limit={1.2 * n * b:.0f}")
    dup = sum(rep.duplicate_pull_receipts for rep in reports)
    res.check("no process receives a rumor twice via pull", dup == 0, f"duplicates={dup}")
    rounds = [rep.rounds for rep in reports]
    msgs_total = [sum(s.messages for s in rep.per_rumor.values()) for rep in reports]
    res.rows.append({
        **summary_row(spec, _aggregate_multirumor(reports, rounds, msgs_total)),
        "protocol": "multirumor-push-then-pull",
    })
    return res


def _aggregate_multirumor(reports, rounds, msgs_total) -> AggregateReport:
    t = len(reports)
    bits = [sum(s.total_bits for s in rep.per_rumor.values()) for rep in reports]
    return AggregateReport(
        trials=t,
        success_rate=sum(r.completed for r in reports) / t,
        rounds_mean=math.fsum(rounds) / t,
        rounds_median=lower_median(rounds),
        rounds_p99=nearest_rank(rounds, 99),
        rounds_max=max(rounds),
        msgs_mean=math.fsum(msgs_total) / t,
        msgs_median=lower_median(msgs_total),
        msgs_max=max(msgs_total),
        bits_mean=math.fsum(bits) / t,
        control_bits_mean=math.fsum(sum(s.control_bits for s in r.per_rumor.values()) for r in reports) / t,
        trajectory_mean=(), trajectory_p10=(), trajectory_p90=(),
    )


LEMMA_COLUMNS = ("check", "n_max", "f_max", "cases", "passed", "witness")


def lemma_sweeps(overrides: Mapping[str, str], workers: int | None = None) -> ScenarioResult:
    n_max = int(overrides.get("n_max", 200))
    f_max = int(overrides.get("f_max", 5))
    res = ScenarioResult("lemma-sweeps")
    rows = []

    cases, witness = 0, ""
    for n in range(2, n_max + 1):
        for f in range(1, f_max + 1):
            v = analytics.check_pull_le_push(n, f)
            cases += n + 1
            if not v.passed and not witness:
                witness = f"n={n} f={f} u={v.u} pull={v.pull!r} push={v.push!r}"
    rows.append({"check": "pull<=push", "n_max": n_max, "f_max": f_max, "cases": cases,
                 "passed": not witness, "witness": witness})
    res.check("pull expectation <= push expectation for all u", not witness, witness or f"{cases} cases")

    worst = 0.0
    for n in range(2, n_max + 1):
        pull = analytics.expected_uninformed_pull_wr(n - 1, n, 1)
        push = analytics.expected_uninformed_push(n - 1, n, 1)
        worst = max(worst, abs(pull - push) / push)
    rows.append({"check": "equality at u=n-1, f=1", "n_max": n_max, "f_max": 1, "cases": n_max - 1,
                 "passed": worst <= 1e-12, "witness": f"max_rel_diff={worst!r}"})
    res.check("equality at u = n-1 for f = 1 (rel 1e-12)", worst <= 1e-12, f"max_rel_diff={worst:.3e}")

    cases, witness = 0, ""
    for n in range(2, n_max + 1):
        for f in range(1, min(f_max, n - 1) + 1):
            for i in range(0, n + 1):
                cases += 1
                got = analytics.expected_informed_after_pull_wor(i, n, f)
                bound = analytics.informed_growth_bound(i, f)
                if got > bound * (1 + 1e-12) + 1e-12 and not witness:
                    witness = f"n={n} f={f} i={i} expected={got!r} bound={bound!r}"
    rows.append({"check": "growth<=i(f+1)", "n_max": n_max, "f_max": f_max, "cases": cases,
                 "passed": not witness, "witness": witness})
    res.check("one-round expected informed <= i (f_in + 1)", not witness, witness or f"{cases} cases")
    res.tables["lemmas.csv"] = (LEMMA_COLUMNS, rows)
    return res


PRESETS: dict[str, Callable[..., ScenarioResult]] = {
    "pull-rounds-scaling": pull_rounds_scaling,
    "message-optimality": message_optimality,
    "endgame": endgame,
    "failure-robustness": failure_robustness,
    "pushpull-overhead": pushpull_overhead,
    "baseline-blowup": baseline_blowup,
    "push-messages": push_messages,
    "multirumor-bits": multirumor_bits,
    "lemma-sweeps": lemma_sweeps,
}


def scenario_presets() -> dict[str, Callable[..., ScenarioResult]]:
    return dict(PRESETS)


def run_scenario(name: str, overrides: Mapping[str, str] | None = None, workers: int | None = None) -> ScenarioResult:
    try:
        preset = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; presets: {', '.join(PRESETS)}") from None
    return preset(dict(overrides or {}), workers)
