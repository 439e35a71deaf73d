import math

import numpy as np
import pytest

from trimgame.core import (
    Batch,
    DomainError,
    MixedStrategy,
    Move,
    PayoffMatrix,
    StrategySpace,
    decompose_point,
    mixed_strategy_point,
    nearest_rank,
    nearest_rank_percentile,
    sorted_percentile,
    stage_game_equilibrium,
    trim_above,
)


def rank_by_hand(values, q):
    # independent route: walk the sorted list until the cumulative share reaches q
    s = sorted(values)
    n = len(s)
    for i, v in enumerate(s, start=1):
        if i / n >= q - 1e-12:
            return v
    return s[-1]


def test_percentile_tens():
    assert nearest_rank_percentile(Batch.benign(range(10, 101, 10)), 0.9) == 90


def test_percentile_max_and_singleton():
    b = Batch.benign([3.0, -1.0, 8.5])
    assert nearest_rank_percentile(b, 1.0) == 8.5
    assert nearest_rank_percentile(Batch.benign([7]), 0.5) == 7


def test_percentile_q0_is_min():
    assert nearest_rank_percentile(Batch.benign([4, 2, 9]), 0.0) == 2


def test_percentile_float_product_slack():
    # 0.91 * 100 is 91.00000000000001 in floating point
    assert nearest_rank(100, 0.91) == 91


def test_percentile_empty_raises():
    with pytest.raises(DomainError):
        nearest_rank_percentile(Batch.benign([]), 0.5)


def test_percentile_out_of_range_q():
    with pytest.raises(DomainError):
        nearest_rank_percentile(Batch.benign([1, 2]), 1.5)


def test_percentile_matches_hand_walk(rng):
    values = rng.normal(size=57)
    for q in np.linspace(0, 1, 41):
        assert nearest_rank_percentile(values, q) == rank_by_hand(values, q)


def test_sorted_percentile_vectorized(rng):
    values = np.sort(rng.uniform(size=200))
    qs = np.array([0.0, 0.1, 0.5, 0.99, 1.0])
    out = sorted_percentile(values, qs)
    assert list(out) == [nearest_rank_percentile(values, q) for q in qs]


def test_batch_length_mismatch():
    with pytest.raises(DomainError):
        Batch(np.arange(3.0), np.zeros(2, bool))


def test_trim_simple():
    kept, removed = trim_above(Batch.benign([1, 2, 3, 100]), 3)
    assert list(kept.values) == [1, 2, 3]
    assert list(removed.values) == [100]


def test_trim_at_max_removes_nothing():
    b = Batch.benign([5, 1, 4])
    _, removed = trim_above(b, b.values.max())
    assert len(removed) == 0


def test_trim_seeded_batch_count():
    rng = np.random.default_rng(7)
    benign = rng.uniform(size=1000)
    batch = Batch(np.concatenate([benign, np.full(100, 0.99)]), np.r_[np.zeros(1000, bool), np.ones(100, bool)])
    cutoff = nearest_rank_percentile(benign, 0.95)
    kept, removed = trim_above(batch, cutoff)
    assert removed.n_poison == 100
    assert kept.n_poison == 0
    # exactly the benign values above the 950th order statistic
    assert removed.n_benign == 50


def test_trim_preserves_flags():
    b = Batch(np.array([1.0, 5.0, 2.0, 9.0]), np.array([True, False, False, True]))
    kept, removed = trim_above(b, 4.0)
    assert list(kept.is_poison) == [True, False]
    assert list(removed.is_poison) == [False, True]


@pytest.mark.parametrize(
    "lo,hi,p_lo,expected",
    [(0.9, 0.99, 1.0, 0.9), (0.0, 1.0, 0.3, 0.7), (0.9, 0.99, 0.5, 0.945)],
)
def test_mixed_point(lo, hi, p_lo, expected):
    assert mixed_strategy_point(StrategySpace(lo, hi), MixedStrategy.from_p_lo(p_lo)) == pytest.approx(expected, abs=1e-12)


def test_decompose_roundtrip():
    space = StrategySpace(0.9, 0.99)
    mix = decompose_point(space, 0.945)
    assert mix.p_lo == pytest.approx(0.5, abs=1e-12)


def test_decompose_outside_raises():
    with pytest.raises(DomainError):
        decompose_point(StrategySpace(0.0, 1.0), 1.2)


def test_invalid_mix_and_space():
    with pytest.raises(DomainError):
        MixedStrategy(0.5, 0.6)
    with pytest.raises(DomainError):
        StrategySpace(1.0, 0.0)


def test_stage_game_worked_example():
    m = PayoffMatrix(P_hi=10, T_hi=5, P_lo=2, T_lo=1)
    assert stage_game_equilibrium(m) == (Move.HARD, Move.HARD)
    assert m.payoffs(Move.SOFT, Move.HARD) == (-11, 10)


def test_stage_game_large_gap():
    assert stage_game_equilibrium(PayoffMatrix(100, 50, 2, 1)) == (Move.HARD, Move.HARD)


def test_stage_game_exhaustive_best_response():
    # independent oracle: no profitable unilateral deviation in the returned cell
    m = PayoffMatrix(100, 50, 2, 1)
    c, a = stage_game_equilibrium(m)
    other = {Move.SOFT: Move.HARD, Move.HARD: Move.SOFT}
    assert m.payoffs(c, a)[0] >= m.payoffs(other[c], a)[0]
    assert m.payoffs(c, a)[1] >= m.payoffs(c, other[a])[1]


def test_stage_game_table_cells():
    m = PayoffMatrix(10, 5, 2, 1)
    t = m.table()
    assert t[(Move.SOFT, Move.SOFT)] == (-3, 2)
    assert t[(Move.HARD, Move.SOFT)] == (-5, 0)
    assert t[(Move.HARD, Move.HARD)] == (-5, 0)


def test_payoff_ordering_violation():
    with pytest.raises(DomainError):
        PayoffMatrix(P_hi=5, T_hi=10, P_lo=2, T_lo=1)
    with pytest.raises(DomainError):
        PayoffMatrix(P_hi=10, T_hi=5, P_lo=2, T_lo=0)


def test_zero_sum_consistency():
    m = PayoffMatrix(9, 4, 3, 0.5)
    for a in Move:
        col, adv = m.payoffs(Move.SOFT, a)
        assert math.isclose(adv, -(col + m.T_lo))
