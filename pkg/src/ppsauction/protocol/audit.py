"""Behavioral privacy checks, communication accounting and replay."""
from __future__ import annotations

import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from ..crypto import KeyPair
from .auctioneer import Auctioneer
from .transcript import PartyRole, Transcript
from .wire import (
    IdSpace,
    MaskedBidBatch,
    MaskedWeightBatch,
    MessageKind,
    PaymentComponentBatch,
    PaymentOp,
    WinnerSetReply,
)

_ID_BEARING = (MaskedBidBatch, WinnerSetReply)


@dataclass
class Violation:
    check: str
    detail: str
    seq: int | None = None


@dataclass
class BatchCount:
    group: int
    unknowns: int
    relations: int
    attributable: bool


@dataclass
class PrivacyReport:
    violations: list[Violation] = field(default_factory=list)
    counts: list[BatchCount] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_check(self) -> Counter:
        return Counter(v.check for v in self.violations)


def _outgoing_cts(msg) -> int:
    if isinstance(msg, MaskedWeightBatch):
        return len(msg.cts)
    if isinstance(msg, MaskedBidBatch):
        return len(msg.entries)
    if isinstance(msg, PaymentComponentBatch):
        return len(msg.entries)
    return 0


def _sanctioned(msg) -> bool:
    return isinstance(msg, PaymentComponentBatch) and msg.op == PaymentOp.SUA_TERMS


def audit_privacy(transcript: Transcript, other: Transcript | None = None) -> PrivacyReport:
    """Mechanical checks on what the auctioneer could learn.

    (a) every ciphertext the agent sends is masked, except SUA payment
        components; (b) multi-unit runs only ever show permuted ids before the
        final allocation; (c) per mask, unknowns (bids involved plus mask
        values) outnumber the values the auctioneer decrypts under it,
        enforced where entries are attributable to (permuted) bidders and
        reported for every batch; masks are never reused across batches;
        (d) a second run under other masks yields the same outcome.
    """
    report = PrivacyReport()
    view = transcript.agent_view
    masks = {rec.batch: rec.mask for rec in view.masks}
    multi_unit = transcript.mechanism in ("PPS-MUA", "PPS-EMUA")

    for e in transcript.entries:
        msg = e.message
        if e.sender == PartyRole.AGENT and _outgoing_cts(msg):
            batch = msg.batch
            prov = view.provenance.get(batch, [])
            mask = masks.get(batch)
            identity = mask is not None and mask.delta_mult == 1 and mask.delta_add == 0
            if not _sanctioned(msg) and (identity or not all(p.masked for p in prov) or (mask is None and prov)):
                report.violations.append(Violation("unmasked", f"batch {batch} sends unmasked ciphertexts", e.seq))
        if multi_unit and isinstance(msg, _ID_BEARING) and msg.id_space == IdSpace.RAW:
            report.violations.append(Violation("raw_id", f"{e.kind.name} carries raw bidder ids", e.seq))
        if multi_unit and isinstance(msg, PaymentComponentBatch) and msg.op in (PaymentOp.SUA_TERMS, PaymentOp.TIE_VERDICT) \
                and msg.id_space == IdSpace.RAW:
            report.violations.append(Violation("raw_id", "payment message names a raw bidder id", e.seq))

    groups: dict[int, list[int]] = defaultdict(list)
    for batch, group in view.mask_groups.items():
        groups[group].append(batch)
    for group, batches in sorted(groups.items()):
        refs = set()
        relations = 0
        for b in batches:
            for p in view.provenance.get(b, []):
                refs |= p.refs
                relations += 1
        mask = masks[group]
        mask_unknowns = (mask.delta_mult != 1) + (mask.delta_add != 0)
        unknowns = len(refs) + mask_unknowns
        attributable = any(b in view.attributable for b in batches)
        report.counts.append(BatchCount(group, unknowns, relations, attributable))
        if attributable and relations and relations >= unknowns:
            report.violations.append(Violation(
                "underdetermined", f"mask group {group}: {relations} relations vs {unknowns} unknowns"))

    seen: dict[tuple[int, int], int] = {}
    for rec in view.masks:
        if rec.mask is None or (rec.mask.delta_mult == 1 and rec.mask.delta_add == 0):
            continue
        key = (rec.mask.delta_mult, rec.mask.delta_add)
        if key in seen and seen[key] != rec.group:
            report.violations.append(Violation(
                "mask_reuse", f"batch {rec.batch} reuses the mask of group {seen[key]}"))
        seen.setdefault(key, rec.group)

    if other is not None:
        mine, theirs = transcript.final_allocation(), other.final_allocation()
        if mine != theirs:
            report.violations.append(Violation("mask_dependence", "outcome changes with the masks"))
    return report


def comm_stats(transcript: Transcript | None) -> dict:
    if transcript is None or not transcript.entries:
        return {"total_bytes": 0, "bytes_by_kind": {}, "message_count": 0,
                "per_party_decryptions": {"agent": 0, "auctioneer": 0},
                "per_party_hom_ops": {"agent": 0, "auctioneer": 0}}
    by_kind: Counter = Counter()
    for e in transcript.entries:
        by_kind[e.kind.name] += e.size_bytes
    return {
        "total_bytes": sum(by_kind.values()),
        "bytes_by_kind": dict(sorted(by_kind.items())),
        "message_count": len(transcript.entries),
        "per_party_decryptions": {"agent": 0, "auctioneer": transcript.auctioneer_view.decryptions},
        "per_party_hom_ops": {"agent": transcript.agent_view.hom_ops, "auctioneer": 0},
    }


def replay(transcript: Transcript, keys: KeyPair, seed: int = 0) -> bool:
    """Feed the recorded agent frames to a fresh auctioneer.

    True when every reply matches the recorded one byte for byte.
    """
    auctioneer = Auctioneer(keys, random.Random(f"auctioneer-{seed}"))
    entries = transcript.entries
    for idx, e in enumerate(entries):
        if e.sender != PartyRole.AGENT:
            continue
        reply = auctioneer.handle(e.frame)
        expected = entries[idx + 1].frame if idx + 1 < len(entries) and entries[idx + 1].sender == PartyRole.AUCTIONEER else None
        if reply != expected:
            return False
    return True


def message_kinds(transcript: Transcript) -> Counter:
    return Counter(e.kind for e in transcript.entries)


__all__ = ["audit_privacy", "comm_stats", "replay", "PrivacyReport", "Violation", "BatchCount", "MessageKind"]
