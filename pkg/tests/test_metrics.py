import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rumorsim.metrics import TrialReport, aggregate, lower_median, nearest_rank, overhead


def report(rounds, msgs, completed=True, traj=None, seed=0, bits=64):
    traj = traj or (5, 0)
    return TrialReport(completed, rounds, msgs, msgs * bits, 0, tuple(traj), seed)


def test_median_and_percentiles():
    assert lower_median([3, 5, 7]) == 5
    assert lower_median([4, 1, 3, 2]) == 2
    assert nearest_rank(range(1, 101), 99) == 99
    assert nearest_rank([10, 20, 30], 99) == 30
    assert nearest_rank([10, 20, 30], 10) == 10


def test_aggregate_worked_example():
    reps = [report(3, 9, traj=(9, 4, 1, 0), seed=1), report(5, 11, traj=(9, 6, 3, 2, 1, 0), seed=2),
            report(7, 12, traj=(9, 8, 7, 5, 3, 1, 0), seed=3)]
    agg = aggregate(reps)
    assert agg.trials == 3 and agg.success_rate == 1.0
    assert agg.rounds_median == 5 and agg.rounds_mean == 5.0 and agg.rounds_p99 == 7
    assert agg.msgs_median == 11 and agg.msgs_max == 12
    assert agg.bits_mean == pytest.approx(64 * 32 / 3)
    # trajectories padded with their final value
    assert agg.trajectory_mean[0] == 9.0
    assert agg.trajectory_mean[-1] == 0.0
    assert agg.trajectory_mean[3] == pytest.approx((0 + 2 + 5) / 3)
    assert len(agg.trajectory_p10) == 7


def test_aggregate_success_rate_counts_failures():
    agg = aggregate([report(3, 9), report(40, 12, completed=False, traj=(5, 2))])
    assert agg.success_rate == 0.5


def test_aggregate_rejects_empty_input():
    with pytest.raises(ValueError):
        aggregate([])


@given(st.lists(st.tuples(st.integers(1, 50), st.integers(0, 10**6), st.integers(0, 2**64 - 1)),
                min_size=1, max_size=30), st.randoms())
def test_aggregate_is_order_independent(rows, rnd):
    reps = [report(r, m, seed=s, traj=(r, 0)) for r, m, s in rows]
    shuffled = reps[:]
    rnd.shuffle(shuffled)
    assert aggregate(reps) == aggregate(shuffled)


def test_float_means_are_order_independent_bitwise():
    rng = random.Random(0)
    reps = [report(rng.randint(1, 30), rng.randint(0, 10**9), seed=i) for i in range(500)]
    a = aggregate(reps)
    rng.shuffle(reps)
    assert aggregate(reps).msgs_mean == a.msgs_mean


def test_overhead():
    assert overhead(report(10, 999), 1000) == 0
    assert overhead(report(10, 1500), 1000) == 501
    with pytest.raises(ValueError):
        overhead(report(10, 5, completed=False), 1000)
