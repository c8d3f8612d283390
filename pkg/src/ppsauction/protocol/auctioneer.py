"""The auctioneer: holds the secret key, only ever decrypts masked values."""
from __future__ import annotations

import random
import time
from fractions import Fraction

from ..crypto import KeyPair, encrypt_signed, decrypt_signed
from .transcript import AuctioneerView
from .wire import (
    Codec,
    FinalAllocation,
    MaskedBidBatch,
    MaskedWeightBatch,
    OrderReply,
    PaymentComponentBatch,
    PaymentOp,
    PaymentReply,
    Purpose,
    SubcellPick,
    TypePick,
    WinnerSetReply,
)


def dense_ranks(keys) -> list[int]:
    """Rank 0 for the largest key; equal keys share a rank."""
    distinct = sorted(set(keys), reverse=True)
    pos = {k: r for r, k in enumerate(distinct)}
    return [pos[k] for k in keys]


def first_max(values) -> int:
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


class Auctioneer:
    def __init__(self, keys: KeyPair, rng: random.Random | None = None):
        self.keys = keys
        self.codec = Codec(keys.public_key)
        self.rng = rng or random.Random(0)
        self.view = AuctioneerView()
        self.time_s = 0.0
        self._bid_batches: dict[int, MaskedBidBatch] = {}
        self._bid_values: dict[int, list[int]] = {}
        self._pending: dict[int, int] = {}
        self.payments: dict[int, int] = {}
        self.final: FinalAllocation | None = None

    def _decrypt(self, batch: int, cts) -> list[int]:
        vals = [decrypt_signed(self.keys.secret_key, c) for c in cts]
        self.view.decryptions += len(vals)
        self.view.decrypted.setdefault(batch, []).extend(vals)
        return vals

    def _encrypt(self, m: int):
        self.view.encryptions += 1
        return encrypt_signed(self.keys.public_key, m, self.rng)

    def handle(self, frame: bytes) -> bytes | None:
        start = time.perf_counter()
        try:
            seq, msg = self.codec.unframe(frame)
            reply = self.respond(msg)
            return self.codec.frame(seq + 1, reply) if reply is not None else None
        finally:
            self.time_s += time.perf_counter() - start

    def respond(self, msg):
        if isinstance(msg, MaskedBidBatch):
            vals = self._decrypt(msg.batch, [e.ct for e in msg.entries])
            self._bid_batches[msg.batch] = msg
            self._bid_values[msg.batch] = vals
            if msg.per_unit:
                keys = [Fraction(v, e.demand) for v, e in zip(vals, msg.entries)]
            else:
                keys = vals
            return OrderReply(msg.batch, dense_ranks(keys))
        if isinstance(msg, MaskedWeightBatch):
            vals = self._decrypt(msg.batch, msg.cts)
            if msg.purpose == Purpose.RANK:
                return OrderReply(msg.batch, dense_ranks(vals))
            if msg.purpose == Purpose.PICK_SUBCELL:
                return SubcellPick(msg.batch, first_max(vals))
            if msg.purpose == Purpose.PICK_TYPE:
                return TypePick(msg.batch, first_max(vals))
            if msg.purpose == Purpose.PREFIX:
                ref = self._bid_batches[msg.ref_batch]
                ref_val = self._bid_values[msg.ref_batch][msg.ref_index]
                # both sides carry the same additive offset, so the raw masked values compare
                if vals[0] >= ref_val:
                    pids = [ref.entries[i].pid for i in msg.prefix]
                else:
                    pids = [ref.entries[msg.ref_index].pid]
                return WinnerSetReply(msg.batch, pids, ref.id_space)
            raise ValueError(f"unknown purpose {msg.purpose}")
        if isinstance(msg, PaymentComponentBatch):
            return self._payment(msg)
        if isinstance(msg, FinalAllocation):
            self.final = msg
            return None
        raise ValueError(f"auctioneer cannot handle {type(msg).__name__}")

    def _payment(self, msg: PaymentComponentBatch) -> PaymentReply:
        if msg.op == PaymentOp.SUA_TERMS:
            vals = self._decrypt(msg.batch, [e.ct for e in msg.entries])
            c = max(vals) if vals else None
            if c is None or c < 0:
                self.payments[msg.subject] = 0
                return PaymentReply(msg.batch, msg.op, [0])
            # whether the bidder wins at exactly c depends on tie-breaks only the agent can judge
            self._pending[msg.subject] = c
            return PaymentReply(msg.batch, msg.op, [], [self._encrypt(c)])
        if msg.op == PaymentOp.TIE_VERDICT:
            c = self._pending.pop(msg.subject)
            pay = c if msg.verdict else c + 1
            self.payments[msg.subject] = pay
            return PaymentReply(msg.batch, msg.op, [pay])
        if msg.op == PaymentOp.REVEAL:
            return PaymentReply(msg.batch, msg.op, self._decrypt(msg.batch, [e.ct for e in msg.entries]))
        if msg.op == PaymentOp.DIVIDE:
            vals = self._decrypt(msg.batch, [e.ct for e in msg.entries])
            out = []
            for v, e in zip(vals, msg.entries):
                q, rem = divmod(v, e.aux)
                out.append(self._encrypt(q if rem == 0 and e.tag else q + 1))
            return PaymentReply(msg.batch, msg.op, [], out)
        raise ValueError(f"unknown payment op {msg.op}")
