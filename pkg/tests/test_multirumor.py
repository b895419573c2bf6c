import numpy as np
import pytest

from rumorsim.core import ProtocolConfig, RumorId, TrialRng
from rumorsim.failures import FailurePlan, make_adversarial_plan
from rumorsim.multirumor import (
    ProcessKnowledge,
    Rumor,
    RumorLedger,
    ScheduleError,
    ceil_log2,
    load_rumor_schedule,
    make_rumors,
    multirumor_round,
    per_rumor_bit_report,
    run_multirumor_trial,
)
from rumorsim.protocols import run_trial, switch_round_for_overhead


def ptp_config(n, seed, switch, **kw):
    return ProtocolConfig(n=n, protocol="regular-push-then-pull", switch_round=switch, seed=seed, **kw)


def test_bits_per_message_example():
    rumors = make_rumors([(0, 0, 8)], n=4, push_phase_len=1, lifetime=16)
    rep = run_multirumor_trial(ptp_config(4, 0, 1), rumors)
    stats = rep.per_rumor[RumorId(0, 0)]
    assert stats.messages > 0
    assert stats.rumor_bits == stats.messages * 14  # 8 + ceil(log2 4) + ceil(log2 16)


def test_ceil_log2():
    assert [ceil_log2(x) for x in (1, 2, 3, 4, 5, 16, 17, 10_000)] == [0, 1, 2, 2, 3, 4, 5, 14]


@pytest.mark.parametrize("plan", [FailurePlan(), FailurePlan(delta=0.3, gamma=0.2)])
@pytest.mark.parametrize("n,seed", [(50, 0), (500, 1), (3000, 2), (3000, 3)])
def test_single_rumor_matches_push_then_pull(n, seed, plan):
    switch = switch_round_for_overhead(n)
    rumors = make_rumors([(0, 0, 64)], n)
    cfg = ptp_config(n, seed, switch, round_budget=rumors[0].lifetime)
    single = run_trial(cfg, plan)
    multi = run_multirumor_trial(cfg, rumors, plan)
    stats = multi.per_rumor[rumors[0].id]
    assert stats.messages == single.rumor_messages
    assert multi.rounds == single.rounds
    assert multi.completed == single.completed


def test_single_rumor_matches_with_crashes():
    n = 2000
    plan = make_adversarial_plan(n, 0.3, rng=np.random.Generator(np.random.Philox(4)))
    rumors = make_rumors([(0, 0, 64)], n)
    cfg = ptp_config(n, 9, rumors[0].push_phase_len, round_budget=rumors[0].lifetime)
    assert run_multirumor_trial(cfg, rumors, plan).per_rumor[rumors[0].id].messages == run_trial(cfg, plan).rumor_messages


def test_identical_payloads_from_different_origins_stay_distinct():
    n = 300
    rumors = make_rumors([(0, 0, 32), (150, 0, 32), (0, 4, 32)], n)
    rep = run_multirumor_trial(ptp_config(n, 1, rumors[0].push_phase_len), rumors)
    assert set(rep.per_rumor) == {RumorId(0, 0), RumorId(150, 0), RumorId(0, 4)}
    assert rep.completed
    assert all(s.informed == n and s.completed for s in rep.per_rumor.values())


def test_duplicate_rumor_ids_are_rejected():
    with pytest.raises(ScheduleError):
        make_rumors([(3, 0, 8), (3, 0, 16)], 10)
    r = Rumor(RumorId(3, 0), 8, 2, 20)
    with pytest.raises(ScheduleError):
        run_multirumor_trial(ptp_config(10, 0, 2), [r, r])


@pytest.mark.parametrize(
    "args",
    [dict(id=RumorId(0, 0), size_b=0, push_phase_len=1, lifetime=5),
     dict(id=RumorId(0, 0), size_b=8, push_phase_len=6, lifetime=5)],
)
def test_rumor_invariants(args):
    with pytest.raises(ScheduleError):
        Rumor(**args)


def test_zero_rumor_schedule_gives_empty_report():
    rep = run_multirumor_trial(ptp_config(10, 0, 2), [])
    assert rep.per_rumor == {} and rep.completed and rep.rounds == 0
    assert per_rumor_bit_report(rep) == {}


def test_bit_report_and_accounting_identity():
    n = 1000
    rumors = make_rumors([(0, 0, 100), (500, 2, 40)], n)
    rep = run_multirumor_trial(ptp_config(n, 3, rumors[0].push_phase_len), rumors)
    table = per_rumor_bit_report(rep)
    assert list(table) == [RumorId(0, 0), RumorId(500, 2)]
    for ru in rumors:
        row = table[ru.id]
        assert row["rumor_bits"] == row["messages"] * (ru.size_b + ceil_log2(n) + ceil_log2(ru.lifetime))
        assert row["control_bits"] > 0


def test_no_duplicate_pull_receipts_and_retirement():
    n = 2000
    schedule = [(0, 0, 64), (700, 3, 64), (1400, 9, 64)]
    for seed in range(5):
        rumors = make_rumors(schedule, n)
        rep = run_multirumor_trial(ptp_config(n, seed, rumors[0].push_phase_len), rumors)
        assert rep.duplicate_pull_receipts == 0
        for ru in rumors:
            assert 0 <= rep.per_rumor[ru.id].max_age_sent < ru.lifetime


def test_retired_rumors_stop_spreading():
    n = 400
    rumors = make_rumors([(0, 0, 16)], n, push_phase_len=1, lifetime=2)
    rep = run_multirumor_trial(ptp_config(n, 0, 1), rumors, stop="fixed-budget", round_budget=30)
    stats = rep.per_rumor[rumors[0].id]
    assert 0 <= stats.max_age_sent <= 1
    assert not stats.completed and stats.informed < n


def test_knowledge_is_monotone_and_learned_rounds_recorded():
    n = 200
    rumors = make_rumors([(0, 0, 8), (5, 1, 8)], n)
    cfg = ptp_config(n, 4, rumors[0].push_phase_len)
    state = ProcessKnowledge.empty(2, n)
    ledger = RumorLedger.empty(2, n)
    rng = TrialRng(4)
    prev = state.knows.copy()
    for _ in range(15):
        multirumor_round(state, rumors, cfg, FailurePlan(), rng, ledger)
        assert (state.knows | ~prev).all()
        prev = state.knows.copy()
    assert ((state.learned >= 0) == state.knows).all()
    assert state.learned[1, 5] == 1


def test_no_pull_requests_while_nothing_is_in_pull_phase():
    n = 100
    rumors = make_rumors([(0, 0, 8)], n, push_phase_len=4, lifetime=30)
    state = ProcessKnowledge.empty(1, n)
    ledger = RumorLedger.empty(1, n)
    cfg = ptp_config(n, 0, 4)
    for _ in range(4):
        out = multirumor_round(state, rumors, cfg, FailurePlan(), TrialRng(0), ledger)
        assert out.requests_sent == 0
    assert ledger.control_bits[0] == 0


def test_one_rumor_messages_stay_near_n():
    n = 10_000
    rumors = make_rumors([(0, 0, 64)], n)
    cfg_base = dict(switch=rumors[0].push_phase_len)
    msgs = [run_multirumor_trial(ptp_config(n, s, **cfg_base), rumors).per_rumor[rumors[0].id].messages
            for s in range(100)]
    assert np.mean(msgs) <= 1.1 * n


@pytest.mark.parametrize("b", [256, 512])
def test_bits_per_rumor_near_nb(b):
    n = 10_000
    rumors = make_rumors([(0, 0, b)], n)
    totals = [run_multirumor_trial(ptp_config(n, s, rumors[0].push_phase_len), rumors)
              .per_rumor[rumors[0].id].total_bits for s in range(100)]
    assert np.mean(totals) <= 1.2 * n * b


def test_bits_floor_at_b_100_exceeds_the_20_percent_margin():
    """With 14 id bits and 8 age bits every message costs 1.22 b at b = 100, so n messages already exceed 1.2 n b."""
    n, b = 10_000, 100
    ru = make_rumors([(0, 0, b)], n)[0]
    per_message = b + ceil_log2(n) + ceil_log2(ru.lifetime)
    assert per_message * (n - 1) > 1.2 * n * b


def test_schedule_file(tmp_path):
    path = tmp_path / "rumors.txt"
    path.write_text("# origin round bits\n0 0 64\n5 2 128\n", encoding="utf-8")
    assert load_rumor_schedule(path) == [(0, 0, 64), (5, 2, 128)]
    path.write_text("0 0\n", encoding="utf-8")
    with pytest.raises(ScheduleError):
        load_rumor_schedule(path)


def test_schedule_rejects_crashing_origin():
    plan = FailurePlan(epsilon=0.5, crash_schedule={3: 0})
    with pytest.raises(ScheduleError):
        run_multirumor_trial(ptp_config(10, 0, 2), make_rumors([(3, 0, 8)], 10), plan)
