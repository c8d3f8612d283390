"""Multi-channel allocation: per-subcell greedy knapsack, the grid-typed
selection on top of it, the loser fill-in extension, and their payments.

Per-unit bids are compared by cross-multiplication (b_i * N_j vs b_j * N_i),
ties going to the lower bidder id.  Bidders asking for more channels than
exist can never be served and are left out of every subcell solution.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cmp_to_key
from typing import Iterable, Mapping, Protocol, Sequence

from .model import (
    Allocation,
    Bidder,
    Scenario,
    SubgridAddress,
    conflict_graph,
    conflicts,
    subgrid_address,
)

DEFAULT_ORACLE_CAP = 14
GRID_TYPES = (1, 2, 3, 4)
SUBCELLS = (1, 2, 3, 4)


class OracleCapExceeded(RuntimeError):
    pass


def per_unit_cmp(a: Bidder, b: Bidder) -> int:
    lhs, rhs = a.bid * b.demand, b.bid * a.demand
    if lhs != rhs:
        return -1 if lhs > rhs else 1
    return -1 if a.id < b.id else (1 if a.id > b.id else 0)


def per_unit_order(bidders: Iterable[Bidder]) -> list[Bidder]:
    return sorted(bidders, key=cmp_to_key(per_unit_cmp))


def critical_position(demands: Sequence[int], m: int) -> int | None:
    """0-based index of the first bidder whose cumulative demand exceeds m."""
    total = 0
    for pos, d in enumerate(demands):
        total += d
        if total > m:
            return pos
    return None


@dataclass
class SubgridSolution:
    address: SubgridAddress
    winners: list[int]
    weight: int
    sorted_order: list[int]
    critical_index: int | None = None  # 1-based, None when every demand fits


def subgrid_greedy(
    subgrid_bidders: Sequence[Bidder], m: int, address: SubgridAddress | None = None
) -> SubgridSolution:
    address = address or SubgridAddress(0, 1, 1)
    order = per_unit_order(b for b in subgrid_bidders if b.demand <= m)
    ids = [b.id for b in order]
    k = critical_position([b.demand for b in order], m)
    if k is None:
        # everyone is served; channel order then follows ids, which needs no bids
        return SubgridSolution(address, sorted(ids), sum(b.bid for b in order), ids)
    prefix = order[:k]
    prefix_sum = sum(b.bid for b in prefix)
    if prefix_sum >= order[k].bid:
        return SubgridSolution(address, [b.id for b in prefix], prefix_sum, ids, k + 1)
    return SubgridSolution(address, [order[k].id], order[k].bid, ids, k + 1)


@dataclass
class MuaResult:
    allocation: Allocation
    subgrids: dict[SubgridAddress, SubgridSolution]
    cell_pick: dict[tuple[int, int], int]  # (cell, type) -> chosen subcell
    type_weights: dict[int, int]
    chosen_type: int
    addresses: dict[int, SubgridAddress]

    def subgrid_weight(self, cell: int, grid_type: int, subcell: int) -> int:
        sol = self.subgrids.get(SubgridAddress(cell, grid_type, subcell))
        return sol.weight if sol else 0

    def cells_of_type(self, grid_type: int) -> list[int]:
        return sorted({c for (c, t) in self.cell_pick if t == grid_type})

    def cell_solution(self, cell: int, grid_type: int) -> SubgridSolution | None:
        s = self.cell_pick.get((cell, grid_type))
        return self.subgrids.get(SubgridAddress(cell, grid_type, s)) if s else None


def _argmax_first(weights: Mapping[int, int], keys: Iterable[int]) -> int:
    best = None
    for key in keys:
        if best is None or weights.get(key, 0) > weights.get(best, 0):
            best = key
    return best


def mua_allocate(scenario: Scenario) -> MuaResult:
    m = scenario.channel_count
    width = scenario.area[0]
    by_id = scenario.by_id
    addresses = {b.id: subgrid_address(b.location, width) for b in scenario.bidders}
    groups: dict[SubgridAddress, list[Bidder]] = {}
    for b in scenario.bidders:
        groups.setdefault(addresses[b.id], []).append(b)
    subgrids = {a: subgrid_greedy(bs, m, a) for a, bs in sorted(groups.items())}

    cell_pick: dict[tuple[int, int], int] = {}
    for cell, t in sorted({(a.cell, a.grid_type) for a in subgrids}):
        weights = {s: subgrids[SubgridAddress(cell, t, s)].weight
                   for s in SUBCELLS if SubgridAddress(cell, t, s) in subgrids}
        cell_pick[(cell, t)] = _argmax_first(weights, SUBCELLS)

    type_weights = {t: 0 for t in GRID_TYPES}
    for (cell, t), s in cell_pick.items():
        type_weights[t] += subgrids.get(SubgridAddress(cell, t, s), _EMPTY).weight
    chosen = _argmax_first(type_weights, GRID_TYPES)

    winners, channels = assemble_channels(subgrids, cell_pick, chosen, {i: b.demand for i, b in by_id.items()})
    alloc = Allocation(winners, channels, type_weights[chosen])
    return MuaResult(alloc, subgrids, cell_pick, type_weights, chosen, addresses)


def assemble_channels(
    subgrids: Mapping[SubgridAddress, SubgridSolution],
    cell_pick: Mapping[tuple[int, int], int],
    chosen_type: int,
    demands: Mapping[int, int],
) -> tuple[frozenset[int], dict[int, frozenset[int]]]:
    """Winners of the chosen type with consecutive channels inside each subcell."""
    winners, channels = [], {}
    for (cell, t), s in sorted(cell_pick.items()):
        if t != chosen_type:
            continue
        sol = subgrids.get(SubgridAddress(cell, t, s))
        if sol is None:
            continue
        nxt = 0
        for i in sol.winners:
            channels[i] = frozenset(range(nxt, nxt + demands[i]))
            nxt += demands[i]
            winners.append(i)
    return frozenset(winners), channels


_EMPTY = SubgridSolution(SubgridAddress(-1, 0, 0), [], 0, [])


# -- exact oracles -----------------------------------------------------------


def knapsack_optimum(bidders: Sequence[Bidder], m: int) -> int:
    """Exact 0/1 knapsack by enumeration (for small instances)."""
    best = 0
    for r in range(len(bidders) + 1):
        for combo in itertools.combinations(bidders, r):
            if sum(b.demand for b in combo) <= m:
                best = max(best, sum(b.bid for b in combo))
    return best


def _colorable(members: Sequence[Bidder], adj: dict[int, set[int]], m: int) -> bool:
    """Can every member get `demand` channels with conflicting members disjoint?"""
    order = sorted(members, key=lambda b: (-len(adj[b.id]), b.id))
    assigned: dict[int, frozenset[int]] = {}
    channels = range(m)

    def place(idx: int) -> bool:
        if idx == len(order):
            return True
        b = order[idx]
        used = set()
        for j in adj[b.id]:
            if j in assigned:
                used |= assigned[j]
        free = [c for c in channels if c not in used]
        if len(free) < b.demand:
            return False
        seen_shapes = set()
        for combo in itertools.combinations(free, b.demand):
            chosen = frozenset(combo)
            # channels untouched by anyone placed so far are interchangeable
            shape = tuple(c if any(c in assigned[x] for x in assigned) else -1 for c in combo)
            if shape in seen_shapes:
                continue
            seen_shapes.add(shape)
            assigned[b.id] = chosen
            if place(idx + 1):
                return True
            del assigned[b.id]
        return False

    return place(0)


def brute_force_mua(scenario: Scenario, cap: int = DEFAULT_ORACLE_CAP) -> int:
    """Maximum bid sum over subsets that admit a feasible channel assignment."""
    n = len(scenario.bidders)
    if n > cap:
        raise OracleCapExceeded(f"oracle cap {cap} exceeded by n={n}")
    m = scenario.channel_count
    order = sorted((b for b in scenario.bidders if b.demand <= m), key=lambda b: (-b.bid, b.id))
    adj = conflict_graph(order)
    suffix = [0] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + order[i].bid
    best = 0
    feasible_cache: dict[frozenset[int], bool] = {}

    def component_ok(chosen: list[Bidder], newest: Bidder) -> bool:
        ids = {b.id for b in chosen}
        comp, stack = {newest.id}, [newest.id]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u in ids and u not in comp:
                    comp.add(u)
                    stack.append(u)
        key = frozenset(comp)
        if key not in feasible_cache:
            members = [b for b in chosen if b.id in comp]
            feasible_cache[key] = _colorable(members, adj, m)
        return feasible_cache[key]

    def search(i: int, chosen: list[Bidder], w: int):
        nonlocal best
        best = max(best, w)
        if i == len(order) or w + suffix[i] <= best:
            return
        b = order[i]
        chosen.append(b)
        if component_ok(chosen, b):
            search(i + 1, chosen, w + b.bid)
        chosen.pop()
        search(i + 1, chosen, w)

    search(0, [], 0)
    return best


# -- critical values ---------------------------------------------------------


@dataclass(frozen=True)
class LinearForm:
    """Integer combination of bids plus a constant: sum(coef * b_id) + const."""

    coefs: tuple[tuple[int, int], ...] = ()
    const: int = 0

    @staticmethod
    def of(terms: Mapping[int, int] | None = None, const: int = 0) -> "LinearForm":
        items = tuple(sorted((i, c) for i, c in (terms or {}).items() if c))
        return LinearForm(items, const)

    @staticmethod
    def bid_sum(ids: Iterable[int]) -> "LinearForm":
        return LinearForm.of({i: 1 for i in ids})

    def _combine(self, other: "LinearForm", sign: int) -> "LinearForm":
        acc = dict(self.coefs)
        for i, c in other.coefs:
            acc[i] = acc.get(i, 0) + sign * c
        return LinearForm.of(acc, self.const + sign * other.const)

    def __add__(self, other):
        if isinstance(other, int):
            return LinearForm(self.coefs, self.const + other)
        return self._combine(other, 1)

    def __sub__(self, other):
        if isinstance(other, int):
            return LinearForm(self.coefs, self.const - other)
        return self._combine(other, -1)

    def scale(self, factor: int) -> "LinearForm":
        return LinearForm(tuple((i, c * factor) for i, c in self.coefs), self.const * factor)

    def evaluate(self, bids: Mapping[int, int]) -> int:
        return sum(c * bids[i] for i, c in self.coefs) + self.const

    @property
    def bidders(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.coefs)

    def bound(self, max_bid: int) -> int:
        """Largest |value| over bids in [0, max_bid]."""
        return sum(abs(c) for _, c in self.coefs) * max_bid + abs(self.const)


@dataclass(frozen=True)
class PerUnitCut:
    """Smallest integer bid with which ``bidder`` overtakes ``rival`` per unit.

    bidder precedes rival at bid x iff x * N_rival > b_rival * N_bidder, or
    the products are equal and bidder has the lower id.
    """

    rival: int
    rival_demand: int
    demand: int
    wins_exact_tie: bool

    @property
    def numerator(self) -> LinearForm:
        return LinearForm.of({self.rival: self.demand})

    def evaluate(self, bids: Mapping[int, int]) -> int:
        q, rem = divmod(bids[self.rival] * self.demand, self.rival_demand)
        return q if rem == 0 and self.wins_exact_tie else q + 1


class Evaluator(Protocol):
    """Answers the questions a payment computation asks about hidden bids."""

    def ge(self, a: LinearForm, b: LinearForm) -> bool: ...
    def form_ge_cut(self, form: LinearForm, cut: PerUnitCut) -> bool: ...
    def cut_lt(self, a: PerUnitCut, b: PerUnitCut) -> bool: ...
    def value(self, form: LinearForm) -> int: ...
    def cut_value(self, cut: PerUnitCut) -> int: ...


class PlainEvaluator:
    def __init__(self, bids: Mapping[int, int]):
        self.bids = dict(bids)

    def ge(self, a, b):
        return a.evaluate(self.bids) >= b.evaluate(self.bids)

    def form_ge_cut(self, form, cut):
        return form.evaluate(self.bids) >= cut.evaluate(self.bids)

    def cut_lt(self, a, b):
        return a.evaluate(self.bids) < b.evaluate(self.bids)

    def value(self, form):
        return form.evaluate(self.bids)

    def cut_value(self, cut):
        return cut.evaluate(self.bids)


@dataclass
class PaymentContext:
    """Everything the critical-value walk needs about one winner, bid-free.

    ``others`` are the winner's subcell rivals in per-unit order.  Competing
    weights are linear forms over bids so the walk can run on hidden values.
    """

    bidder: int
    demand: int
    position: int  # number of rivals ahead of the winner at its own bid
    others: list[tuple[int, int]]  # (id, demand), per-unit order
    m: int
    cell_rivals: list[tuple[LinearForm, int]]  # (weight, tie penalty)
    type_rivals: list[tuple[LinearForm, int]]
    type_rest: LinearForm
    all_fit: bool = False  # the whole subcell fits, so rank never matters


@dataclass
class MuaPaymentTrace:
    payment: int
    position: int
    subcell_term: object = None
    cell_term: object = None
    type_term: object = None
    steps: int = 0


def _cut(ctx: PaymentContext, rival: tuple[int, int]) -> PerUnitCut:
    rid, rdemand = rival
    return PerUnitCut(rid, rdemand, ctx.demand, ctx.bidder < rid)


def segment_conditions(ctx: PaymentContext, q: int) -> list[LinearForm] | None:
    """Lower bounds on the winner's bid while it sits behind exactly q rivals.

    Returns None when no bid in this position can win.
    """
    order = ctx.others[:q] + [(ctx.bidder, ctx.demand)] + ctx.others[q:]
    k = critical_position([d for _, d in order], ctx.m)
    conds: list[LinearForm] = []
    if k is None:
        alpha = LinearForm.bid_sum(i for i, _ in order if i != ctx.bidder)
    elif q < k:
        alpha = LinearForm.bid_sum(i for i, _ in order[:k] if i != ctx.bidder)
        conds.append(LinearForm.bid_sum([order[k][0]]) - alpha)
    elif q == k:
        alpha = LinearForm()
        conds.append(LinearForm.bid_sum(i for i, _ in order[:k]) + 1)
    else:
        return None
    for weight, penalty in ctx.cell_rivals:
        conds.append(weight + penalty - alpha)
    for weight, penalty in ctx.type_rivals:
        conds.append(weight + penalty - ctx.type_rest - alpha)
    return conds


def _max_form(forms: list[LinearForm], ev: Evaluator) -> LinearForm | None:
    best = None
    for f in forms:
        if best is None or not ev.ge(best, f):
            best = f
    return best


def critical_walk(ctx: PaymentContext, ev: Evaluator) -> MuaPaymentTrace:
    """Descend the winner's per-unit rank until it stops winning.

    Each rank position is a bid interval [cut of next rival, cut of previous
    rival - 1] on which the winning condition is a set of linear lower
    bounds; the first interval whose own bottom loses holds the critical
    value.
    """
    q = ctx.position
    n_others = len(ctx.others)
    if ctx.all_fit:
        bound = _max_form(segment_conditions(ctx, q), ev)
        if bound is None or ev.ge(LinearForm(), bound):
            return MuaPaymentTrace(0, q, steps=1)
        return MuaPaymentTrace(ev.value(bound), q, bound, steps=1)
    steps = 0
    while True:
        steps += 1
        conds = segment_conditions(ctx, q)
        bound = _max_form(conds, ev) if conds else None
        if q == n_others:
            # bottom interval reaches bid 0
            if bound is not None and not ev.ge(LinearForm(), bound):
                return MuaPaymentTrace(ev.value(bound), q, bound, steps=steps)
            return MuaPaymentTrace(0, q, steps=steps)
        lo = _cut(ctx, ctx.others[q])
        if bound is not None and ev.form_ge_cut(bound - 1, lo):
            # bound > lo: the minimum inside this interval is the bound itself
            return MuaPaymentTrace(ev.value(bound), q, bound, steps=steps)
        # the winner still wins at the interval bottom `lo`
        if ev.form_ge_cut(LinearForm(), lo):
            # lo == 0
            return MuaPaymentTrace(0, q, steps=steps)
        nxt = q + 1
        while nxt < n_others and not ev.cut_lt(_cut(ctx, ctx.others[nxt]), lo):
            nxt += 1
        below = segment_conditions(ctx, nxt)
        below_bound = _max_form(below, ev) if below else None
        if below is None or (below_bound is not None and ev.form_ge_cut(below_bound, lo)):
            return MuaPaymentTrace(ev.cut_value(lo), q, lo, steps=steps)
        q = nxt


def bid_context(scenario: Scenario, result: MuaResult, bidder_id: int) -> PaymentContext:
    """Payment context for any servable bidder, winner or not."""
    by_id = scenario.by_id
    me = by_id[bidder_id]
    if me.demand > scenario.channel_count:
        raise ValueError(f"bidder {bidder_id} demands more channels than exist")
    addr = result.addresses[bidder_id]
    sol = result.subgrids[addr]
    others_b = [by_id[i] for i in sol.sorted_order if i != bidder_id]
    # bids are not needed here: the rank comes from the subcell's sorted order
    position = sol.sorted_order.index(bidder_id)

    def weight_form(s: SubgridSolution | None) -> LinearForm:
        return LinearForm.bid_sum(s.winners) if s else LinearForm()

    cell_rivals = []
    for s in SUBCELLS:
        if s == addr.subcell:
            continue
        # empty subcells still take part in the pick with weight 0
        other = result.subgrids.get(SubgridAddress(addr.cell, addr.grid_type, s))
        cell_rivals.append((weight_form(other), 1 if s < addr.subcell else 0))
    type_rest = LinearForm()
    for cell in result.cells_of_type(addr.grid_type):
        if cell != addr.cell:
            type_rest = type_rest + weight_form(result.cell_solution(cell, addr.grid_type))
    type_rivals = []
    for t in GRID_TYPES:
        if t == addr.grid_type:
            continue
        total = LinearForm()
        for cell in result.cells_of_type(t):
            total = total + weight_form(result.cell_solution(cell, t))
        type_rivals.append((total, 1 if t < addr.grid_type else 0))
    return PaymentContext(
        bidder_id, me.demand, position, [(b.id, b.demand) for b in others_b],
        scenario.channel_count, cell_rivals, type_rivals, type_rest,
        all_fit=sol.critical_index is None,
    )


def payment_context(scenario: Scenario, result: MuaResult, winner_id: int) -> PaymentContext:
    if winner_id not in result.allocation.winners:
        raise ValueError(f"bidder {winner_id} is not a winner")
    return bid_context(scenario, result, winner_id)


def mua_payment(
    scenario: Scenario, cache: MuaResult, winner_id: int, evaluator: Evaluator | None = None
) -> int:
    ev = evaluator or PlainEvaluator({b.id: b.bid for b in scenario.bidders})
    return critical_walk(payment_context(scenario, cache, winner_id), ev).payment


def mua_payments(scenario: Scenario, cache: MuaResult | None = None) -> dict[int, int]:
    cache = cache or mua_allocate(scenario)
    return {i: mua_payment(scenario, cache, i) for i in sorted(cache.allocation.winners)}


# -- loser fill-in -----------------------------------------------------------


@dataclass
class EmuaFill:
    base: Allocation
    admitted_losers: list[int]
    final: Allocation


def loser_order(bidders: Iterable[Bidder]) -> list[Bidder]:
    return sorted(bidders, key=lambda b: (-b.bid, b.id))


def fill_losers(
    scenario: Scenario, base: Allocation, losers: Sequence[Bidder]
) -> tuple[list[int], dict[int, frozenset[int]]]:
    """Admit losers in the given order whenever enough channels are free.

    A channel is free for a loser when no current winner in conflict with it
    holds that channel; the lowest free channel indices are assigned.
    """
    by_id = scenario.by_id
    channels = dict(base.channel_assignment)
    admitted = []
    for b in losers:
        used = set()
        for j, chans in channels.items():
            if conflicts(b, by_id[j]):
                used |= chans
        free = [c for c in range(scenario.channel_count) if c not in used]
        if len(free) >= b.demand:
            channels[b.id] = frozenset(free[: b.demand])
            admitted.append(b.id)
    return admitted, channels


def emua_allocate(scenario: Scenario, base: MuaResult | None = None) -> EmuaFill:
    base = base or mua_allocate(scenario)
    alloc = base.allocation
    losers = loser_order(b for b in scenario.bidders if b.id not in alloc.winners)
    admitted, channels = fill_losers(scenario, alloc, losers)
    by_id = scenario.by_id
    winners = alloc.winners | set(admitted)
    final = Allocation(winners, channels, sum(by_id[i].bid for i in winners))
    return EmuaFill(alloc, admitted, final)


def fill_threshold(scenario: Scenario, base: Allocation, bidder_id: int) -> int | None:
    """Lowest bid at which the fill-in admits ``bidder_id`` against ``base``.

    Returns None when the base winners already block it.  Otherwise the
    threshold is set by the first loser whose precedence blocks the bidder:
    matching that loser's bid suffices when the bidder holds the lower id.
    """
    by_id = scenario.by_id
    me = by_id[bidder_id]
    m = scenario.channel_count
    channels = dict(base.channel_assignment)

    def admissible() -> bool:
        used = set()
        for j, chans in channels.items():
            if conflicts(me, by_id[j]):
                used |= chans
        return m - len(used) >= me.demand

    if me.demand > m or not admissible():
        return None
    losers = loser_order(b for b in scenario.bidders if b.id not in base.winners and b.id != bidder_id)
    for rival in losers:
        used = set()
        for j, chans in channels.items():
            if conflicts(rival, by_id[j]):
                used |= chans
        free = [c for c in range(m) if c not in used]
        if len(free) < rival.demand:
            continue
        channels[rival.id] = frozenset(free[: rival.demand])
        if not admissible():
            return rival.bid if bidder_id < rival.id else rival.bid + 1
    return 0


def bid_breakpoints(scenario: Scenario, result: MuaResult, bidder_id: int) -> set[int]:
    """Bids at which the base allocation may change while ``bidder_id`` loses it."""
    me = scenario.bidder(bidder_id)
    if me.demand > scenario.channel_count:
        return set()
    ctx = bid_context(scenario, result, bidder_id)
    bids = {b.id: b.bid for b in scenario.bidders}
    points = {_cut(ctx, o).evaluate(bids) for o in ctx.others}
    for q in range(len(ctx.others) + 1):
        for form in segment_conditions(ctx, q) or ():
            points.add(form.evaluate(bids))
    return points


def emua_payment(
    scenario: Scenario, fill: EmuaFill, winner_id: int, base_result: MuaResult | None = None
) -> int:
    """Critical value under the extended mechanism.

    A base winner keeps its base critical value unless the fill-in would
    still admit it just below that value; in that case, and for winners
    admitted only by the fill-in, the payment is the fill threshold.  The
    base allocation can change with the winner's bid even while it loses, so
    the descent runs over the bid intervals on which the base is constant.
    """
    if winner_id not in fill.final.winners:
        raise ValueError(f"bidder {winner_id} is not a winner")
    base_result = base_result or mua_allocate(scenario)
    if winner_id in base_result.allocation.winners:
        top = mua_payment(scenario, base_result, winner_id) - 1
    else:
        top = scenario.bidder(winner_id).bid
    if top < 0:
        return 0
    points = sorted({0} | {x for x in bid_breakpoints(scenario, base_result, winner_id) if 0 < x <= top})
    hi = top
    for lo in reversed(points):
        if lo > hi:
            continue
        probe = scenario.with_bid(winner_id, hi)
        base_here = mua_allocate(probe).allocation
        thr = fill_threshold(probe, base_here, winner_id)
        if thr is None or thr > hi:
            return hi + 1
        if thr > lo:
            return thr
        hi = lo - 1
    return 0


def emua_payments(scenario: Scenario, fill: EmuaFill | None = None) -> dict[int, int]:
    base_result = mua_allocate(scenario)
    fill = fill or emua_allocate(scenario, base_result)
    return {i: emua_payment(scenario, fill, i, base_result) for i in sorted(fill.final.winners)}
