"""The agent: holds encrypted bids and public bidder data, never decrypts.

Every decision that depends on bids is delegated to the auctioneer through
a masked batch.  Within a batch all values share one fresh MaskPair, so the
auctioneer learns their order and nothing about their magnitude.  Ties in
the returned ranks are broken here with the same canonical keys the
plaintext allocators use (sorted id tuples, shifting index, bidder id), so
the auctioneer never needs to see real ids.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace
from functools import cmp_to_key
from typing import Mapping, Sequence

from ..alloc_mua import (
    GRID_TYPES,
    SUBCELLS,
    LinearForm,
    MuaResult,
    PerUnitCut,
    SubgridSolution,
    _cut,
    assemble_channels,
    bid_context,
    critical_position,
    critical_walk,
    fill_losers,
    segment_conditions,
)
from ..alloc_sua import enumerate_maximal_independent_sets
from ..crypto import (
    Ciphertext,
    MaskConfig,
    MaskPair,
    PublicKey,
    check_overflow,
    hom_add,
    hom_add_plain,
    hom_linear,
    mask_affine,
    trivial_encrypt,
)
from ..model import (
    Allocation,
    Bidder,
    ModelKind,
    Scenario,
    ShiftingSpec,
    SubgridAddress,
    conflicts,
    shifting_partition,
    sort_key_ids,
    subgrid_address,
)
from .transcript import CtProvenance, MaskRecord, PartyRole, Transcript
from .transport import Transport
from .wire import (
    BidEntry,
    Codec,
    FinalAllocation,
    FinalEntry,
    IdSpace,
    MaskedBidBatch,
    MaskedWeightBatch,
    PaymentComponentBatch,
    PaymentEntry,
    PaymentOp,
    Purpose,
)

FAULTS = ("raw_id", "unmasked_bid", "mask_reuse")


@dataclass(frozen=True)
class PublicInfo:
    """What the agent knows in the clear about the auction."""

    bidders: tuple[tuple[int, float, float, int], ...]  # (id, x, y, demand)
    channel_count: int
    area: tuple[float, float]
    model_kind: ModelKind
    bid_max: int

    @staticmethod
    def from_scenario(scenario: Scenario) -> "PublicInfo":
        return PublicInfo(
            scenario.public(), scenario.channel_count, scenario.area,
            scenario.model_kind, scenario.bid_range[1],
        )

    def scenario(self) -> Scenario:
        """Placeholder scenario with every bid set to 0 (geometry only)."""
        bidders = tuple(Bidder(i, x, y, 0, d) for i, x, y, d in self.bidders)
        return Scenario(bidders, self.channel_count, self.area, self.model_kind, (0, self.bid_max))


@dataclass(frozen=True)
class Hidden:
    """An encrypted integer the agent tracks symbolically."""

    ct: Ciphertext
    refs: frozenset[int]  # bidders whose bids it depends on
    bound: int  # upper bound on |value|
    const: int | None = None  # plaintext, when no bid enters


@dataclass
class _RankedGrid:
    members: list[frozenset[int]]  # rank order
    weights: list[Hidden]

    def first(self, pred) -> int | None:
        for idx, m in enumerate(self.members):
            if pred(m):
                return idx
        return None


@dataclass
class MuaState:
    result: MuaResult  # bid-free mirror of the plaintext cache
    groups: dict[SubgridAddress, list[int]]
    weights: dict[SubgridAddress, Hidden]


class Agent:
    def __init__(
        self,
        pk: PublicKey,
        info: PublicInfo,
        encrypted_bids: Mapping[int, Ciphertext],
        transport: Transport,
        transcript: Transcript,
        *,
        rng: random.Random | None = None,
        mask_config: MaskConfig | None = None,
        fault: str | None = None,
        zero_unit_offset: bool = False,
    ):
        if fault is not None and fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
        self.pk = pk
        self.info = info
        self.enc = dict(encrypted_bids)
        self.transport = transport
        self.transcript = transcript
        self.view = transcript.agent_view
        self.codec = Codec(pk)
        self.rng = rng or random.Random(0)
        self.mask_config = mask_config or MaskConfig.for_bits(pk.bits)
        self.fault = fault
        self.zero_unit_offset = zero_unit_offset
        self.public = info.scenario()
        self.by_id = self.public.by_id
        self.demand = {b.id: b.demand for b in self.public.bidders}
        self.m = info.channel_count
        self.seq = 0
        self._batch = 0
        self._reused_mask: MaskPair | None = None
        self._fault_pending = fault == "unmasked_bid"
        self._cut_cache: dict[PerUnitCut, Hidden] = {}
        ids = sorted(self.by_id)
        images = list(range(len(ids)))
        self.rng.shuffle(images)
        self.pi = dict(zip(ids, images))
        self.view.permutation = dict(self.pi)
        missing = set(ids) - set(self.enc)
        if missing:
            raise ValueError(f"no encrypted bid for bidders {sorted(missing)}")

    # -- plumbing ----------------------------------------------------------

    def _exchange(self, msg):
        self.seq += 1
        frame = self.codec.frame(self.seq, msg)
        self.transcript.record(self.seq, PartyRole.AGENT, msg, frame)
        reply = self.transport.exchange(frame)
        if reply is None:
            return None
        seq, answer = self.codec.unframe(reply)
        if seq != self.seq + 1:
            raise ValueError(f"out-of-order reply {seq} after {self.seq}")
        self.seq = seq
        self.transcript.record(seq, PartyRole.AUCTIONEER, answer, reply)
        return answer

    def _new_batch(self) -> int:
        self._batch += 1
        return self._batch

    def _fresh_mask(self, batch: int) -> MaskPair:
        if self._fault_pending:
            self._fault_pending = False
            mask = MaskPair(1, 0)
        elif self.fault == "mask_reuse" and self._reused_mask is not None:
            mask = self._reused_mask
        else:
            mask = self.mask_config.draw(self.rng)
            if self.fault == "mask_reuse":
                self._reused_mask = mask
        self._record_mask(batch, batch, mask)
        return mask

    def _record_mask(self, batch: int, group: int, mask: MaskPair):
        self.view.masks.append(MaskRecord(batch, group, mask))
        self.view.mask_groups[batch] = group

    def _mask_all(self, batch: int, values: Sequence[Hidden], mask: MaskPair, scales=None) -> list[Ciphertext]:
        w_max = max(h.bound for h in values)
        scales = scales or [1] * len(values)
        masked = mask.delta_mult != 1 or mask.delta_add != 0
        out = []
        for h, sc in zip(values, scales):
            out.append(mask_affine(self.pk, h.ct, mask, w_max, add_scale=sc))
            self.view.hom_ops += 2
        self.view.provenance.setdefault(batch, []).extend(CtProvenance(h.refs, masked) for h in values)
        return out

    # -- hidden arithmetic -------------------------------------------------

    def const(self, value: int) -> Hidden:
        return Hidden(trivial_encrypt(self.pk, value), frozenset(), abs(value), value)

    def bid(self, i: int) -> Hidden:
        return Hidden(self.enc[i], frozenset({i}), self.info.bid_max)

    def combine(self, terms: Sequence[tuple[Hidden, int]], const: int = 0) -> Hidden:
        terms = [(h, c) for h, c in terms if c]
        if all(h.const is not None for h, _ in terms):
            return self.const(sum(h.const * c for h, c in terms) + const)
        ct = hom_linear(self.pk, [(h.ct, c) for h, c in terms], const)
        self.view.hom_ops += 2 * len(terms) + 1
        refs = frozenset().union(*(h.refs for h, _ in terms))
        bound = sum(abs(c) * h.bound for h, c in terms) + abs(const)
        return Hidden(ct, refs, bound)

    def total(self, values: Sequence[Hidden]) -> Hidden:
        return self.combine([(h, 1) for h in values])

    def form(self, f: LinearForm, override: Mapping[int, Hidden] | None = None) -> Hidden:
        override = override or {}
        return self.combine([(override[i] if i in override else self.bid(i), c) for i, c in f.coefs], f.const)

    def bids_of(self, ids, override: Mapping[int, Hidden] | None = None) -> Hidden:
        override = override or {}
        return self.total([override[i] if i in override else self.bid(i) for i in ids])

    # -- queries -----------------------------------------------------------

    def _weight_batch(self, values: Sequence[Hidden], purpose: Purpose):
        batch = self._new_batch()
        mask = self._fresh_mask(batch)
        cts = self._mask_all(batch, values, mask)
        return self._exchange(MaskedWeightBatch(batch, cts, purpose))

    def rank(self, values: Sequence[Hidden]) -> list[int]:
        return self._weight_batch(values, Purpose.RANK).ranks

    def pick(self, values: Sequence[Hidden], purpose: Purpose) -> int:
        return self._weight_batch(values, purpose).index

    def compare(self, a: Hidden, b: Hidden) -> int:
        """Sign of a - b."""
        if a.const is not None and b.const is not None:
            return (a.const > b.const) - (a.const < b.const)
        ra, rb = self.rank([a, b])
        return (ra < rb) - (ra > rb)

    def reveal(self, h: Hidden) -> int:
        if h.const is not None:
            return h.const
        batch = self._new_batch()
        mask = self._fresh_mask(batch)
        (ct,) = self._mask_all(batch, [h], mask)
        reply = self._exchange(PaymentComponentBatch(batch, PaymentOp.REVEAL, entries=[PaymentEntry(0, 0, ct)]))
        return mask.unmask(reply.values[0])

    def cut(self, cut: PerUnitCut) -> Hidden:
        """E(t) for a per-unit cut, via one masked division at the auctioneer."""
        if cut in self._cut_cache:
            return self._cut_cache[cut]
        x = self.form(cut.numerator)
        batch = self._new_batch()
        offset = self.rng.getrandbits(self.mask_config.gamma_add)
        mask = MaskPair(1, offset)
        self._record_mask(batch, batch, mask)
        check_overflow(self.pk, mask, x.bound, cut.rival_demand)
        ct = hom_add_plain(self.pk, x.ct, offset * cut.rival_demand)
        self.view.hom_ops += 1
        self.view.provenance.setdefault(batch, []).append(CtProvenance(x.refs, True))
        reply = self._exchange(PaymentComponentBatch(
            batch, PaymentOp.DIVIDE, entries=[PaymentEntry(int(cut.wins_exact_tie), cut.rival_demand, ct)]))
        t = Hidden(hom_add_plain(self.pk, reply.cts[0], -offset), x.refs, x.bound // cut.rival_demand + 1)
        self.view.hom_ops += 1
        self._cut_cache[cut] = t
        return t

    def _pid(self, i: int) -> tuple[int, IdSpace]:
        if self.fault == "raw_id":
            return i, IdSpace.RAW
        return self.pi[i], IdSpace.PERMUTED

    def bid_batch(self, entries: Sequence[tuple[int, Hidden]], per_unit: bool):
        """Rank bidders by (per-unit) bid; returns batch id, entry order, mask, sorted ids."""
        entries = sorted(entries, key=lambda e: self.pi[e[0]])
        batch = self._new_batch()
        mask = self._fresh_mask(batch)
        if per_unit and self.zero_unit_offset:
            mask = MaskPair(mask.delta_mult, 0)
            self.view.masks[-1] = MaskRecord(batch, batch, mask)
        scales = [self.demand[i] if per_unit and not self.zero_unit_offset else 1 for i, _ in entries]
        cts = self._mask_all(batch, [h for _, h in entries], mask, scales)
        self.view.attributable.add(batch)
        bid_entries = []
        space = IdSpace.PERMUTED
        for (i, _), ct in zip(entries, cts):
            pid, space = self._pid(i)
            bid_entries.append(BidEntry(pid, self.demand[i], ct))
        reply = self._exchange(MaskedBidBatch(batch, bid_entries, per_unit, space))
        rank = {i: r for (i, _), r in zip(entries, reply.ranks)}
        order = sorted(rank, key=lambda i: (rank[i], i))
        return batch, [i for i, _ in entries], mask, order

    # -- PPS-SUA -----------------------------------------------------------

    def _rank_grid(self, member_ids: tuple[int, ...]) -> _RankedGrid:
        sets = enumerate_maximal_independent_sets([self.by_id[i] for i in member_ids])
        weights = [self.bids_of(sorted(s)) for s in sets]
        if len(sets) > 1:
            ranks = self.rank(weights)
            idx = sorted(range(len(sets)), key=lambda j: (ranks[j], sort_key_ids(sets[j])))
        else:
            idx = list(range(len(sets)))
        return _RankedGrid([sets[j] for j in idx], [weights[j] for j in idx])

    def run_sua(self, k: int) -> tuple[Allocation, dict[int, int]]:
        cache: dict[tuple[int, ...], _RankedGrid] = {}
        shiftings = []  # (spec, [grids])
        for r in range(k):
            for s in range(k):
                spec = ShiftingSpec(k, r, s)
                grids, _ = shifting_partition(self.public, spec)
                ranked = []
                for members in grids.values():
                    key = tuple(sorted(members))
                    if key not in cache:
                        cache[key] = self._rank_grid(key)
                    ranked.append(cache[key])
                shiftings.append((spec, ranked))
        totals = [self.total([g.weights[0] for g in grids]) for _, grids in shiftings]
        ranks = self.rank(totals) if len(totals) > 1 else [0]
        ranking = sorted(range(len(shiftings)), key=lambda u: (ranks[u], shiftings[u][0].index))
        winners_of = [frozenset().union(*(g.members[0] for g in grids)) for _, grids in shiftings]
        top = ranking[0]
        winners = winners_of[top]

        payments = {}
        for i in sorted(winners):
            payments[i] = self._sua_payment(i, shiftings, totals, ranking, winners_of)
        alloc = Allocation(winners, {i: frozenset({0}) for i in winners}, None)
        self._finish(alloc, payments)
        return alloc, payments

    def _sua_payment(self, i, shiftings, totals, ranking, winners_of) -> int:
        def grid_of(u):
            for g in shiftings[u][1]:
                if any(i in m for m in g.members):
                    return g
            return None

        me = self.bid(i)
        top = ranking[0]
        terms: list[tuple[int, Hidden]] = []
        g = grid_of(top)
        rest = g.first(lambda m: i not in m)
        if rest is not None:
            terms.append((1, self.combine([(g.weights[rest], 1), (g.weights[0], -1), (me, 1)])))
        for u in ranking[1:]:
            if i not in winners_of[u]:
                terms.append((3, self.combine([(totals[u], 1), (totals[top], -1), (me, 1)])))
                break
            gq = grid_of(u)
            alt = gq.first(lambda m: i not in m)
            if alt is not None:
                terms.append((2, self.combine([(totals[u], 1), (gq.weights[0], -1), (gq.weights[alt], 1),
                                               (totals[top], -1), (me, 1)])))
        batch = self._new_batch()
        # sanctioned disclosure: the components travel unmasked
        self.view.provenance[batch] = [CtProvenance(h.refs, False) for _, h in terms]
        reply = self._exchange(PaymentComponentBatch(
            batch, PaymentOp.SUA_TERMS, subject=i, id_space=IdSpace.RAW,
            entries=[PaymentEntry(tag, 0, h.ct) for tag, h in terms]))
        if reply.values:
            return reply.values[0]
        refs = frozenset().union(*(h.refs for _, h in terms))
        c = Hidden(reply.cts[0], refs, self.info.bid_max)

        # does i still win when bidding exactly c?
        delta = self.combine([(c, 1), (me, -1)])
        scored, has = [], []
        for u, (spec, grids) in enumerate(shiftings):
            gu = grid_of(u)
            if gu is None:
                scored.append(totals[u])
                has.append(False)
                continue
            inc = gu.first(lambda m: i in m)
            exc = gu.first(lambda m: i not in m)
            inc_w = self.combine([(gu.weights[inc], 1), (delta, 1)])
            take_inc = exc is None
            if not take_inc:
                sign = self.compare(inc_w, gu.weights[exc])
                take_inc = sign > 0 or (sign == 0 and sort_key_ids(gu.members[inc]) < sort_key_ids(gu.members[exc]))
            chosen = inc_w if take_inc else gu.weights[exc]
            scored.append(self.combine([(totals[u], 1), (gu.weights[0], -1), (chosen, 1)]))
            has.append(take_inc)
        ranks = self.rank(scored) if len(scored) > 1 else [0]
        best = min(range(len(scored)), key=lambda u: (ranks[u], shiftings[u][0].index))
        batch = self._new_batch()
        reply = self._exchange(PaymentComponentBatch(
            batch, PaymentOp.TIE_VERDICT, subject=i, id_space=IdSpace.RAW, verdict=int(has[best])))
        return reply.values[0]

    # -- PPS-MUA -----------------------------------------------------------

    def solve_subcell(
        self, address: SubgridAddress, members: Sequence[int],
        override: Mapping[int, Hidden] | None = None, linked: bool = True,
    ) -> tuple[SubgridSolution, Hidden]:
        servable = sorted(i for i in members if self.demand[i] <= self.m)
        if not servable:
            return SubgridSolution(address, [], 0, []), self.const(0)
        if sum(self.demand[i] for i in servable) <= self.m:
            # every demand fits: no comparison needed
            return SubgridSolution(address, servable, 0, servable), self.bids_of(servable, override)
        override = override or {}
        hidden = {i: override[i] if i in override else self.bid(i) for i in servable}
        batch, entry_ids, mask, order = self.bid_batch([(i, hidden[i]) for i in servable], per_unit=True)
        k = critical_position([self.demand[i] for i in order], self.m)
        prefix, critical = order[:k], order[k]
        psum = self.total([hidden[i] for i in prefix])
        if linked:
            # same mask as the bid batch, so the auctioneer compares sum vs critical bid
            check = self._new_batch()
            self._record_mask(check, batch, mask)
            scale = 1 if self.zero_unit_offset else self.demand[critical]
            ct = mask_affine(self.pk, psum.ct, mask, psum.bound, add_scale=scale)
            self.view.hom_ops += 2
            self.view.provenance[check] = [CtProvenance(psum.refs, True)]
            self.view.attributable.add(check)
            reply = self._exchange(MaskedWeightBatch(
                check, [ct], Purpose.PREFIX, batch, entry_ids.index(critical),
                [entry_ids.index(i) for i in prefix]))
            # the critical bidder is never part of the prefix
            won_prefix = reply.pids != [self._pid(critical)[0]]
        else:
            won_prefix = self.compare(psum, hidden[critical]) >= 0
        winners = prefix if won_prefix else [critical]
        sol = SubgridSolution(address, winners, 0, order, k + 1)
        return sol, self.total([hidden[i] for i in winners])

    def _pick_cell(self, cell, grid_type, weights: Mapping[SubgridAddress, Hidden]) -> int:
        vals = [weights.get(SubgridAddress(cell, grid_type, s)) or self.const(0) for s in SUBCELLS]
        return SUBCELLS[self.pick(vals, Purpose.PICK_SUBCELL)]

    def _pick_type(self, cell_pick, weights) -> int:
        totals = []
        for t in GRID_TYPES:
            parts = [weights[SubgridAddress(c, tt, s)] for (c, tt), s in sorted(cell_pick.items())
                     if tt == t and SubgridAddress(c, tt, s) in weights]
            totals.append(self.total(parts))
        return GRID_TYPES[self.pick(totals, Purpose.PICK_TYPE)]

    def run_mua_allocation(self) -> MuaState:
        width = self.info.area[0]
        addresses = {i: subgrid_address((b.x, b.y), width) for i, b in self.by_id.items()}
        groups: dict[SubgridAddress, list[int]] = {}
        for i in sorted(addresses):
            groups.setdefault(addresses[i], []).append(i)
        subgrids, weights = {}, {}
        for addr in sorted(groups):
            subgrids[addr], weights[addr] = self.solve_subcell(addr, groups[addr])
        cell_pick = {}
        for cell, t in sorted({(a.cell, a.grid_type) for a in subgrids}):
            cell_pick[(cell, t)] = self._pick_cell(cell, t, weights)
        chosen = self._pick_type(cell_pick, weights)
        winners, channels = assemble_channels(subgrids, cell_pick, chosen, self.demand)
        result = MuaResult(Allocation(winners, channels, None), subgrids, cell_pick,
                           {t: 0 for t in GRID_TYPES}, chosen, addresses)
        return MuaState(result, groups, weights)

    def critical_value(self, state: MuaState, i: int) -> int:
        ctx = bid_context(self.public, state.result, i)
        return critical_walk(ctx, EncryptedEvaluator(self)).payment

    def run_mua(self) -> tuple[Allocation, dict[int, int]]:
        state = self.run_mua_allocation()
        alloc = state.result.allocation
        payments = {i: self.critical_value(state, i) for i in sorted(alloc.winners)}
        self._finish(alloc, payments)
        return alloc, payments

    # -- PPS-EMUA ----------------------------------------------------------

    def _fill(self, base: Allocation, order: Sequence[int]):
        return fill_losers(self.public, base, [self.by_id[i] for i in order])

    def base_at(self, state: MuaState, i: int, x: Hidden) -> Allocation:
        """Base allocation if ``i`` reported the hidden value ``x``."""
        addr = state.result.addresses[i]
        # a fresh mask for the prefix test keeps the batch underdetermined even
        # when x is itself a combination of the subcell's bids
        sol, w = self.solve_subcell(addr, state.groups[addr], {i: x}, linked=False)
        subgrids = dict(state.result.subgrids)
        weights = dict(state.weights)
        subgrids[addr], weights[addr] = sol, w
        cell_pick = dict(state.result.cell_pick)
        cell_pick[(addr.cell, addr.grid_type)] = self._pick_cell(addr.cell, addr.grid_type, weights)
        chosen = self._pick_type(cell_pick, weights)
        winners, channels = assemble_channels(subgrids, cell_pick, chosen, self.demand)
        return Allocation(winners, channels, None)

    def wins_at(self, state: MuaState, i: int, x: Hidden) -> bool:
        base = self.base_at(state, i, x)
        if i in base.winners:
            return True
        if self.demand[i] > self.m:
            return False
        entries = [(j, self.bid(j)) for j in sorted(self.by_id) if j not in base.winners and j != i]
        entries.append((i, x))
        _, _, _, order = self.bid_batch(entries, per_unit=False)
        admitted, _ = self._fill(base, order[: order.index(i) + 1])
        return i in admitted

    def _candidates(self, state: MuaState, i: int) -> list[Hidden]:
        ctx = bid_context(self.public, state.result, i)
        forms: dict[LinearForm, None] = {}
        for q in range(len(ctx.others) + 1):
            for f in segment_conditions(ctx, q) or ():
                forms.setdefault(f)
        me = self.by_id[i]
        for j in sorted(self.by_id):
            if j != i and conflicts(me, self.by_id[j]):
                forms.setdefault(LinearForm.of({j: 1}))
        out = [self.form(f) for f in forms]
        if not ctx.all_fit:
            out += [self.cut(_cut(ctx, o)) for o in ctx.others]
        return out

    def _emua_threshold(self, state: MuaState, i: int, top: Hidden) -> int:
        """Smallest bid in [0, top] with which i still ends up winning.

        ``i`` is known to win at ``top``.  Winning can only switch on or off
        at a candidate value or one above it, and is monotone in the bid, so
        a binary search over the sorted candidates plus one check of
        ``prev + 1`` pins it down.
        """
        zero = self.const(0)
        pool = [h for h in self._candidates(state, i)
                if self.compare(h, zero) >= 0 and self.compare(h, top) <= 0]
        pool.sort(key=cmp_to_key(self.compare))
        points = [zero]
        for h in pool:
            if self.compare(h, points[-1]) > 0:
                points.append(h)
        if self.compare(top, points[-1]) > 0:
            points.append(top)
        lo, hi = 0, len(points) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.wins_at(state, i, points[mid]):
                hi = mid
            else:
                lo = mid + 1
        best = points[lo]
        if lo > 0:
            step = self.combine([(points[lo - 1], 1)], 1)
            if self.compare(step, best) < 0 and self.wins_at(state, i, step):
                best = step
        return self.reveal(best)

    def run_emua(self) -> tuple[Allocation, dict[int, int]]:
        state = self.run_mua_allocation()
        base = state.result.allocation
        losers = [j for j in sorted(self.by_id) if j not in base.winners]
        admitted, channels = [], dict(base.channel_assignment)
        if losers:
            _, _, _, order = self.bid_batch([(j, self.bid(j)) for j in losers], per_unit=False)
            admitted, channels = self._fill(base, order)
        winners = base.winners | frozenset(admitted)
        payments = {}
        for i in sorted(winners):
            if i in base.winners:
                p_base = self.critical_value(state, i)
                if p_base == 0:
                    payments[i] = 0
                elif not self.wins_at(state, i, self.const(p_base - 1)):
                    payments[i] = p_base
                else:
                    payments[i] = self._emua_threshold(state, i, self.const(p_base - 1))
            else:
                payments[i] = self._emua_threshold(state, i, self.bid(i))
        alloc = Allocation(winners, channels, None)
        self._finish(alloc, payments)
        return alloc, payments

    def _finish(self, alloc: Allocation, payments: Mapping[int, int]):
        entries = [FinalEntry(i, payments[i], sorted(alloc.channel_assignment[i])) for i in sorted(alloc.winners)]
        self._exchange(FinalAllocation(entries))


class EncryptedEvaluator:
    """Answers critical-value questions through masked comparisons."""

    def __init__(self, agent: Agent, override: Mapping[int, Hidden] | None = None):
        self.agent = agent
        self.override = override

    def _h(self, f: LinearForm) -> Hidden:
        return self.agent.form(f, self.override)

    def ge(self, a, b):
        return self.agent.compare(self._h(a), self._h(b)) >= 0

    def form_ge_cut(self, form, cut):
        # form >= t  iff  form * N_rival > b_rival * N, or equal with the tie going our way
        sign = self.agent.compare(self._h(form.scale(cut.rival_demand)), self._h(cut.numerator))
        return sign > 0 or (sign == 0 and cut.wins_exact_tie)

    def cut_lt(self, a, b):
        return self.agent.compare(self.agent.cut(a), self.agent.cut(b)) < 0

    def value(self, form):
        return self.agent.reveal(self._h(form))

    def cut_value(self, cut):
        return self.agent.reveal(self.agent.cut(cut))
