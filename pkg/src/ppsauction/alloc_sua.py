"""Single-channel allocation: the shifting PTAS over unit disks, its
critical-value payments and an exact maximum-weight independent set oracle.

Ties are resolved deterministically everywhere: between candidate sets of a
grid the lexicographically smallest sorted id tuple wins, between shiftings
the lowest (r, s) index wins.  The encrypted protocol reproduces the same
order by placing candidates in a batch in exactly this canonical order and
letting the auctioneer sort stably.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import (
    Allocation,
    Bidder,
    Scenario,
    ShiftingSpec,
    conflict_graph,
    shifting_partition,
    sort_key_ids,
)

DEFAULT_SET_CAP = 50_000
DEFAULT_ORACLE_CAP = 22


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Candidate:
    members: frozenset[int]
    weight: int

    @property
    def key(self):
        return sort_key_ids(self.members)


@dataclass
class GridSolution:
    grid_id: tuple[int, int]
    candidates: list[Candidate]  # rank order: weight desc, then id tuple
    chosen_index: int = 0

    @property
    def chosen(self) -> Candidate | None:
        return self.candidates[self.chosen_index] if self.candidates else None

    @property
    def weight(self) -> int:
        return self.candidates[0].weight if self.candidates else 0

    @property
    def members(self) -> frozenset[int]:
        return frozenset(m for c in self.candidates for m in c.members)


@dataclass
class ShiftingSolution:
    spec: ShiftingSpec
    grid_solutions: list[GridSolution] = field(default_factory=list)

    @property
    def weight(self) -> int:
        return sum(g.weight for g in self.grid_solutions)

    @property
    def winners(self) -> frozenset[int]:
        return frozenset(m for g in self.grid_solutions if g.chosen for m in g.chosen.members)

    def grid_of(self, bidder_id: int) -> GridSolution | None:
        for g in self.grid_solutions:
            if bidder_id in g.members:
                return g
        return None


@dataclass
class SuaResult:
    allocation: Allocation
    best_spec: ShiftingSpec
    solutions: list[ShiftingSolution]  # indexed by ShiftingSpec.index

    @property
    def ranking(self) -> list[ShiftingSolution]:
        return sorted(self.solutions, key=lambda s: (-s.weight, s.spec.index))


def enumerate_maximal_independent_sets(
    bidders: Sequence[Bidder], cap: int = DEFAULT_SET_CAP
) -> list[frozenset[int]]:
    """All maximal independent sets of the conflict graph on ``bidders``.

    Bron-Kerbosch with pivoting, run on the complement graph (a maximal
    independent set is a maximal clique there).  Output is sorted by id tuple.
    """
    if not bidders:
        return []
    adj = conflict_graph(bidders)
    ids = set(adj)
    free = {v: ids - adj[v] - {v} for v in ids}
    out: list[frozenset[int]] = []

    def expand(chosen: frozenset[int], pool: set[int], excluded: set[int]):
        if not pool and not excluded:
            out.append(chosen)
            if len(out) > cap:
                raise EnumerationCapExceeded(f"more than {cap} maximal independent sets in one grid")
            return
        pivot = max(pool | excluded, key=lambda u: (len(pool & free[u]), -u))
        for v in sorted(pool - free[pivot]):
            expand(chosen | {v}, pool & free[v], excluded & free[v])
            pool = pool - {v}
            excluded = excluded | {v}

    expand(frozenset(), set(ids), set())
    return sorted(out, key=sort_key_ids)


def rank_candidates(candidates: Iterable[Candidate]) -> list[Candidate]:
    return sorted(candidates, key=lambda c: (-c.weight, c.key))


def grid_optimum(
    grid_bidders: Sequence[Bidder], grid_id=(0, 0), cap: int = DEFAULT_SET_CAP
) -> GridSolution:
    bids = {b.id: b.bid for b in grid_bidders}
    sets = enumerate_maximal_independent_sets(grid_bidders, cap)
    cands = [Candidate(s, sum(bids[i] for i in s)) for s in sets]
    return GridSolution(grid_id, rank_candidates(cands))


def shifting_solutions(scenario: Scenario, k: int, cap: int = DEFAULT_SET_CAP) -> list[ShiftingSolution]:
    by_id = scenario.by_id
    cache: dict[tuple[int, ...], GridSolution] = {}
    solutions = []
    for r in range(k):
        for s in range(k):
            spec = ShiftingSpec(k, r, s)
            grids, _ = shifting_partition(scenario, spec)
            sol = ShiftingSolution(spec)
            for gid, members in grids.items():
                key = tuple(sorted(members))
                if key not in cache:
                    cache[key] = grid_optimum([by_id[i] for i in key], gid, cap)
                g = cache[key]
                sol.grid_solutions.append(GridSolution(gid, g.candidates))
            solutions.append(sol)
    return solutions


def _single_channel(winners: Iterable[int]) -> dict[int, frozenset[int]]:
    return {i: frozenset({0}) for i in winners}


def ptas_allocate(scenario: Scenario, k: int, cap: int = DEFAULT_SET_CAP) -> SuaResult:
    if k < 2:
        raise ValueError("k must be at least 2")
    solutions = shifting_solutions(scenario, k, cap)
    best = min(solutions, key=lambda s: (-s.weight, s.spec.index))
    winners = best.winners
    alloc = Allocation(winners, _single_channel(winners), best.weight)
    return SuaResult(alloc, best.spec, solutions)


def brute_force_mwis(scenario: Scenario, cap: int = DEFAULT_ORACLE_CAP) -> Allocation:
    """Exact maximum-weight independent set by branch and bound."""
    n = len(scenario.bidders)
    if n > cap:
        raise EnumerationCapExceeded(f"oracle cap {cap} exceeded by n={n}")
    order = sorted(scenario.bidders, key=lambda b: (-b.bid, b.id))
    adj = conflict_graph(order)
    suffix = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + order[i].bid
    best_w, best_set = -1, frozenset()

    def search(i: int, chosen: frozenset[int], w: int, blocked: frozenset[int]):
        nonlocal best_w, best_set
        if w > best_w:
            best_w, best_set = w, chosen
        if i == n or w + suffix[i] <= best_w:
            return
        b = order[i]
        if b.id not in blocked:
            search(i + 1, chosen | {b.id}, w + b.bid, blocked | adj[b.id])
        search(i + 1, chosen, w, blocked)

    search(0, frozenset(), 0, frozenset())
    return Allocation(best_set, _single_channel(best_set), max(best_w, 0))


# -- payments ---------------------------------------------------------------


@dataclass
class SuaPaymentTerms:
    """Components of a winner's critical value at the reported bids.

    ``grid`` is the bid at which the best set without the winner ties the
    chosen set in its own grid; ``cross`` holds, for every shifting ranked
    above the first one that excludes the winner, the bid at which that
    shifting (with the winner dropped from its grid) ties the winning one;
    ``rival`` is the tie bid against the best shifting that excludes the
    winner outright.  Missing terms are None / empty.
    """

    grid: int | None
    cross: list[int]
    rival: int | None
    cross_specs: list[ShiftingSpec] = field(default_factory=list)

    def all(self) -> list[int]:
        return [t for t in (self.grid, *self.cross, self.rival) if t is not None]

    @property
    def candidate(self) -> int | None:
        terms = self.all()
        return max(terms) if terms else None


def _best_without(grid: GridSolution, bidder_id: int) -> Candidate | None:
    for c in grid.candidates:
        if bidder_id not in c.members:
            return c
    return None


def sua_payment_terms(result: SuaResult, winner: Bidder) -> SuaPaymentTerms:
    i, bid = winner.id, winner.bid
    if i not in result.allocation.winners:
        raise ValueError(f"bidder {i} is not a winner")
    ranking = result.ranking
    top = ranking[0]
    w_top = top.weight
    g = top.grid_of(i)
    rest = _best_without(g, i)
    grid_term = rest.weight - g.candidates[0].weight + bid if rest else None

    cross, cross_specs, rival = [], [], None
    for sol in ranking[1:]:
        if i not in sol.winners:
            rival = sol.weight - w_top + bid
            break
        gq = sol.grid_of(i)
        alt = _best_without(gq, i)
        if alt is not None:
            cross.append(sol.weight - gq.candidates[0].weight + alt.weight - w_top + bid)
            cross_specs.append(sol.spec)
    return SuaPaymentTerms(grid_term, cross, rival, cross_specs)


def sua_wins_at(result: SuaResult, bidder_id: int, original_bid: int, bid: int) -> bool:
    """Would ``bidder_id`` win if it reported ``bid``, everything else fixed?

    Re-scores the cached candidate lists instead of re-enumerating; only the
    bidder's own grid in each shifting changes.
    """
    delta = bid - original_bid
    best_key, best_has = None, False
    for sol in result.solutions:
        total, has = 0, False
        for g in sol.grid_solutions:
            if bidder_id in g.members:
                top = min(
                    g.candidates,
                    key=lambda c: (-(c.weight + (delta if bidder_id in c.members else 0)), c.key),
                )
                total += top.weight + (delta if bidder_id in top.members else 0)
                has = bidder_id in top.members
            else:
                total += g.weight
        key = (-total, sol.spec.index)
        if best_key is None or key < best_key:
            best_key, best_has = key, has
    return best_has


def critical_value_sua(scenario: Scenario, k: int, winner_id: int, cached: SuaResult | None = None) -> int:
    """Smallest integer bid with which ``winner_id`` still wins.

    The terms of :func:`sua_payment_terms` give the tie bid ``c``; strictly
    above it the winner wins and strictly below it loses, so the payment is
    ``c`` or ``c + 1`` depending on how the deterministic tie-break falls at
    exactly ``c``.
    """
    result = cached if cached is not None else ptas_allocate(scenario, k)
    winner = scenario.bidder(winner_id)
    terms = sua_payment_terms(result, winner)
    c = terms.candidate
    if c is None or c < 0:
        return 0
    if sua_wins_at(result, winner_id, winner.bid, c):
        return c
    return c + 1


def sua_payments(scenario: Scenario, k: int, cached: SuaResult | None = None) -> dict[int, int]:
    result = cached if cached is not None else ptas_allocate(scenario, k)
    return {
        i: critical_value_sua(scenario, k, i, result) for i in sorted(result.allocation.winners)
    }
