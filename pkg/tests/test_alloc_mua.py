import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppsauction.alloc_mua import (
    OracleCapExceeded,
    brute_force_mua,
    critical_position,
    emua_allocate,
    emua_payments,
    fill_threshold,
    knapsack_optimum,
    mua_allocate,
    mua_payments,
    per_unit_order,
    subgrid_greedy,
)
from ppsauction.model import Bidder, Scenario, ScenarioConfig, conflicts, generate_scenario


def mua(*bidders, m=4, side=10):
    return Scenario(tuple(bidders), channel_count=m, area=(side, side), model_kind="mua")


def test_critical_position():
    assert critical_position([1, 2, 3], 4) == 2
    assert critical_position([1, 2], 4) is None
    assert critical_position([5], 4) == 0


def test_per_unit_order_ties_to_lower_id():
    bs = [Bidder(3, 0, 0, 20, 2), Bidder(1, 0, 0, 10, 1), Bidder(2, 0, 0, 30, 1)]
    assert [b.id for b in per_unit_order(bs)] == [2, 1, 3]


def test_greedy_prefix_wins():
    # per-unit: 1 -> 20, 0 -> 15, 2 -> 8, 3 -> 5; demands 1, 2 fit, 3 overflows m = 4
    bs = [Bidder(0, 0, 0, 30, 2), Bidder(1, 0, 0, 20, 1), Bidder(2, 0, 0, 24, 3), Bidder(3, 0, 0, 10, 2)]
    sol = subgrid_greedy(bs, 4)
    assert sol.winners == [1, 0] and sol.weight == 50 and sol.critical_index == 3
    assert knapsack_optimum(bs, 4) == 50


def test_greedy_singleton_wins():
    bs = [Bidder(0, 0, 0, 10, 1), Bidder(1, 0, 0, 35, 4)]
    sol = subgrid_greedy(bs, 4)
    assert sol.winners == [1] and sol.weight == 35 and sol.critical_index == 2


def test_greedy_all_fit_and_oversized():
    bs = [Bidder(2, 0, 0, 1, 1), Bidder(0, 0, 0, 9, 2), Bidder(5, 0, 0, 99, 5)]
    sol = subgrid_greedy(bs, 4)
    assert sol.winners == [0, 2] and sol.critical_index is None and sol.weight == 10


def test_singleton_payment():
    sc = mua(Bidder(0, 0.25, 0.25, 10, 1), Bidder(1, 0.25, 0.25, 35, 4))
    res = mua_allocate(sc)
    assert res.allocation.winners == {1}
    assert res.allocation.channel_assignment == {1: frozenset({0, 1, 2, 3})}
    # at 10 the prefix {0} ties and wins; at 11 the singleton wins
    assert mua_payments(sc) == {1: 11}
    assert emua_payments(sc) == {1: 11}


def test_fill_changes_payment():
    # same cell and type, neighbouring subcells, so the two conflict
    sc = mua(Bidder(0, 0.25, 0.25, 10, 1), Bidder(1, 0.75, 0.25, 6, 1), m=2)
    assert mua_allocate(sc).allocation.winners == {0}
    assert mua_payments(sc) == {0: 6}
    fill = emua_allocate(sc)
    assert fill.admitted_losers == [1]
    assert fill.final.channel_assignment == {0: frozenset({0}), 1: frozenset({1})}
    # either bidder is admitted by the fill whatever it bids
    assert emua_payments(sc) == {0: 0, 1: 0}


def test_fill_winner_displaced_by_loser_bid_12():
    base = Bidder(0, 0.25, 0.25, 50, 1)
    a = Bidder(1, 1.6, 0.25, 20, 1)
    b = Bidder(2, 1.6, 0.9, 12, 1)
    sc = mua(base, a, b, m=1)
    fill = emua_allocate(sc)
    assert fill.base.winners == {0} and fill.admitted_losers == [1]
    assert fill_threshold(sc, fill.base, 1) == 12
    assert emua_payments(sc)[1] == 12


def test_oracle_cap():
    with pytest.raises(OracleCapExceeded):
        brute_force_mua(generate_scenario(ScenarioConfig(n=15, seed=0)))


mua_scenarios = st.builds(
    lambda n, side, m, seed: generate_scenario(ScenarioConfig(n=n, area=(side, side), m=m, seed=seed)),
    st.integers(1, 12), st.sampled_from([1, 2, 3, 6]), st.integers(1, 5), st.integers(0, 10**6),
)


def assert_feasible(sc, alloc):
    by_id = sc.by_id
    for i in alloc.winners:
        chans = alloc.channel_assignment[i]
        assert len(chans) == by_id[i].demand
        assert all(0 <= c < sc.channel_count for c in chans)
    ws = sorted(alloc.winners)
    for x in ws:
        for y in ws:
            if x < y and conflicts(by_id[x], by_id[y]):
                assert not alloc.channel_assignment[x] & alloc.channel_assignment[y]


@given(mua_scenarios)
def test_mua_feasible_and_bounded(sc):
    res = mua_allocate(sc)
    assert_feasible(sc, res.allocation)
    opt = brute_force_mua(sc)
    assert 32 * res.allocation.weight >= opt
    assert res.allocation.weight <= opt


@given(st.lists(st.tuples(st.integers(0, 100), st.integers(1, 6)), max_size=9), st.integers(1, 6))
def test_greedy_half_knapsack(items, m):
    bs = [Bidder(i, 0, 0, b, d) for i, (b, d) in enumerate(items)]
    assert 2 * subgrid_greedy(bs, m).weight >= knapsack_optimum([b for b in bs if b.demand <= m], m)


@given(mua_scenarios)
def test_emua_extends_mua(sc):
    fill = emua_allocate(sc)
    assert fill.base.winners <= fill.final.winners
    assert_feasible(sc, fill.final)
    assert fill.final.weight >= fill.base.weight


@given(mua_scenarios)
def test_payments_individually_rational(sc):
    for pay, alloc in ((mua_payments(sc), mua_allocate(sc).allocation), (emua_payments(sc), emua_allocate(sc).final)):
        assert set(pay) == set(alloc.winners)
        for i, p in pay.items():
            assert 0 <= p <= sc.bidder(i).bid
