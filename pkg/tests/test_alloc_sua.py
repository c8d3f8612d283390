import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppsauction.alloc_sua import (
    EnumerationCapExceeded,
    brute_force_mwis,
    critical_value_sua,
    enumerate_maximal_independent_sets,
    grid_optimum,
    ptas_allocate,
    sua_payments,
    sua_wins_at,
)
from ppsauction.model import Bidder, Scenario, ScenarioConfig, conflicts, generate_scenario


def path3():
    # 0 - 1 - 2 with 0 and 2 independent
    return [Bidder(0, 0.5, 0.5, 10), Bidder(1, 1.2, 0.5, 8), Bidder(2, 1.9, 0.5, 7)]


def test_mis_enumeration_path():
    assert enumerate_maximal_independent_sets(path3()) == [frozenset({0, 2}), frozenset({1})]
    assert enumerate_maximal_independent_sets([]) == []


def test_grid_optimum_path():
    g = grid_optimum(path3())
    assert g.candidates[0].members == frozenset({0, 2})
    assert g.candidates[0].weight == 17


def test_brute_force_path():
    sc = Scenario(tuple(path3()), area=(4, 4))
    alloc = brute_force_mwis(sc)
    assert alloc.winners == {0, 2} and alloc.weight == 17


def test_brute_force_cap():
    sc = generate_scenario(ScenarioConfig(n=23, model_kind="sua", seed=0))
    with pytest.raises(EnumerationCapExceeded):
        brute_force_mwis(sc)


def test_two_conflicting_bidders_tie_goes_to_lower_id():
    # bidder 0 sits on the x = 5 line of the r = 1 shiftings, bidder 1 does not
    sc = Scenario((Bidder(0, 5.0, 5.0, 10), Bidder(1, 5.5, 5.0, 7)), area=(10, 10))
    res = ptas_allocate(sc, 4)
    assert res.allocation.winners == {0}
    assert res.best_spec.index == 0
    # at a bid of 7 the (0,) candidate still beats (1,) in shifting (0, 0)
    assert sua_payments(sc, 4) == {0: 7}


def test_lone_bidder_pays_zero():
    sc = Scenario((Bidder(0, 1.0, 1.0, 40),), area=(10, 10))
    assert sua_payments(sc, 3) == {0: 0}


def test_k_must_be_at_least_two():
    with pytest.raises(ValueError):
        ptas_allocate(Scenario((Bidder(0, 1, 1, 1),)), 1)


sua_scenarios = st.builds(
    lambda n, side, seed: generate_scenario(ScenarioConfig(n=n, area=(side, side), model_kind="sua", seed=seed)),
    st.integers(1, 12), st.sampled_from([3, 5, 8]), st.integers(0, 10**6),
)


@given(sua_scenarios, st.sampled_from([2, 3, 4]))
def test_ptas_outputs_independent_set_within_bound(sc, k):
    res = ptas_allocate(sc, k)
    by_id = sc.by_id
    ws = sorted(res.allocation.winners)
    assert not any(conflicts(by_id[a], by_id[b]) for a in ws for b in ws if a < b)
    assert res.allocation.weight == sum(by_id[i].bid for i in ws)
    opt = brute_force_mwis(sc).weight
    assert res.allocation.weight * k * k >= (k - 1) ** 2 * opt
    assert res.allocation.weight <= opt


@given(sua_scenarios, st.sampled_from([2, 3, 4]))
def test_payments_individually_rational(sc, k):
    res = ptas_allocate(sc, k)
    pay = sua_payments(sc, k, res)
    assert set(pay) == set(res.allocation.winners)
    for i, p in pay.items():
        assert 0 <= p <= sc.bidder(i).bid


@given(sua_scenarios, st.sampled_from([2, 3]), st.data())
def test_cached_rescoring_matches_full_rerun(sc, k, data):
    res = ptas_allocate(sc, k)
    i = data.draw(st.sampled_from([b.id for b in sc.bidders]))
    bid = data.draw(st.integers(0, 150))
    assert sua_wins_at(res, i, sc.bidder(i).bid, bid) == (i in ptas_allocate(sc.with_bid(i, bid), k).allocation.winners)


def test_critical_value_is_threshold():
    rng = random.Random(4)
    for seed in range(30):
        sc = generate_scenario(ScenarioConfig(n=rng.randint(3, 10), area=(5, 5), model_kind="sua", seed=seed))
        res = ptas_allocate(sc, 3)
        for i in res.allocation.winners:
            p = critical_value_sua(sc, 3, i, res)
            assert i in ptas_allocate(sc.with_bid(i, p), 3).allocation.winners
            if p > 0:
                assert i not in ptas_allocate(sc.with_bid(i, p - 1), 3).allocation.winners
