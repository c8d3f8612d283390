"""Message types and their byte encoding.

Frame layout: u32 length of the rest, u8 kind, u32 sequence number, payload.
Ids, indices and counts take 4 bytes, flags 1 byte, ciphertexts the fixed
2 * modulus_bits / 8 bytes.  Signed integers (revealed values, payments) are
a u16 length, a sign byte and the big-endian magnitude.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

from ..crypto import Ciphertext, PublicKey


class MessageKind(IntEnum):
    MASKED_WEIGHT_BATCH = 1
    ORDER_REPLY = 2
    MASKED_BID_BATCH = 3
    WINNER_SET_REPLY = 4
    SUBCELL_PICK = 5
    TYPE_PICK = 6
    PAYMENT_COMPONENT_BATCH = 7
    PAYMENT_REPLY = 8
    FINAL_ALLOCATION = 9


class IdSpace(IntEnum):
    RAW = 0
    PERMUTED = 1


class Purpose(IntEnum):
    RANK = 0
    PICK_SUBCELL = 1
    PICK_TYPE = 2
    PREFIX = 3  # compare one masked sum against an entry of an earlier bid batch


class PaymentOp(IntEnum):
    SUA_TERMS = 0
    REVEAL = 1
    DIVIDE = 2
    TIE_VERDICT = 3


@dataclass
class MaskedWeightBatch:
    batch: int
    cts: list[Ciphertext]
    purpose: Purpose = Purpose.RANK
    ref_batch: int = 0
    ref_index: int = 0
    prefix: list[int] = field(default_factory=list)
    kind = MessageKind.MASKED_WEIGHT_BATCH


@dataclass
class OrderReply:
    batch: int
    ranks: list[int]
    kind = MessageKind.ORDER_REPLY


@dataclass
class BidEntry:
    pid: int
    demand: int
    ct: Ciphertext


@dataclass
class MaskedBidBatch:
    batch: int
    entries: list[BidEntry]
    per_unit: bool = True
    id_space: IdSpace = IdSpace.PERMUTED
    kind = MessageKind.MASKED_BID_BATCH


@dataclass
class WinnerSetReply:
    batch: int
    pids: list[int]
    id_space: IdSpace = IdSpace.PERMUTED
    kind = MessageKind.WINNER_SET_REPLY


@dataclass
class SubcellPick:
    batch: int
    index: int
    kind = MessageKind.SUBCELL_PICK


@dataclass
class TypePick:
    batch: int
    index: int
    kind = MessageKind.TYPE_PICK


@dataclass
class PaymentEntry:
    tag: int
    aux: int
    ct: Ciphertext


@dataclass
class PaymentComponentBatch:
    batch: int
    op: PaymentOp
    subject: int = 0
    id_space: IdSpace = IdSpace.RAW
    entries: list[PaymentEntry] = field(default_factory=list)
    verdict: int = 0
    kind = MessageKind.PAYMENT_COMPONENT_BATCH


@dataclass
class PaymentReply:
    batch: int
    op: PaymentOp
    values: list[int] = field(default_factory=list)
    cts: list[Ciphertext] = field(default_factory=list)
    kind = MessageKind.PAYMENT_REPLY


@dataclass
class FinalEntry:
    bidder: int
    payment: int
    channels: list[int]


@dataclass
class FinalAllocation:
    entries: list[FinalEntry]
    kind = MessageKind.FINAL_ALLOCATION


Message = (
    MaskedWeightBatch | OrderReply | MaskedBidBatch | WinnerSetReply | SubcellPick
    | TypePick | PaymentComponentBatch | PaymentReply | FinalAllocation
)


class _Writer:
    def __init__(self, ct_size: int):
        self.buf = bytearray()
        self.ct_size = ct_size

    def u8(self, v):
        self.buf += struct.pack(">B", v)

    def u16(self, v):
        self.buf += struct.pack(">H", v)

    def u32(self, v):
        self.buf += struct.pack(">I", v)

    def sint(self, v: int):
        mag = abs(v)
        raw = mag.to_bytes((mag.bit_length() + 7) // 8, "big")
        self.u16(len(raw))
        self.u8(1 if v < 0 else 0)
        self.buf += raw

    def ct(self, c: Ciphertext):
        data = c.to_bytes()
        if len(data) != self.ct_size:
            raise ValueError("ciphertext does not match the session key size")
        self.buf += data

    def u32s(self, vs):
        self.u32(len(vs))
        for v in vs:
            self.u32(v)

    def cts(self, cs):
        self.u32(len(cs))
        for c in cs:
            self.ct(c)


class _Reader:
    def __init__(self, data: bytes, pk: PublicKey):
        self.data, self.pos, self.pk = data, 0, pk

    def _take(self, n):
        if self.pos + n > len(self.data):
            raise ValueError("truncated payload")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return self._take(1)[0]

    def u16(self):
        return struct.unpack(">H", self._take(2))[0]

    def u32(self):
        return struct.unpack(">I", self._take(4))[0]

    def sint(self):
        size = self.u16()
        neg = self.u8()
        mag = int.from_bytes(self._take(size), "big")
        return -mag if neg else mag

    def ct(self):
        return Ciphertext.from_bytes(self.pk, self._take(self.pk.ciphertext_bytes))

    def u32s(self):
        return [self.u32() for _ in range(self.u32())]

    def cts(self):
        return [self.ct() for _ in range(self.u32())]

    def done(self):
        if self.pos != len(self.data):
            raise ValueError("trailing bytes in payload")


class Codec:
    """Encodes messages for one session key."""

    def __init__(self, pk: PublicKey):
        self.pk = pk

    def encode(self, msg: Message) -> bytes:
        w = _Writer(self.pk.ciphertext_bytes)
        if isinstance(msg, MaskedWeightBatch):
            w.u32(msg.batch); w.u8(msg.purpose); w.u32(msg.ref_batch); w.u32(msg.ref_index)
            w.u32s(msg.prefix); w.cts(msg.cts)
        elif isinstance(msg, OrderReply):
            w.u32(msg.batch); w.u32s(msg.ranks)
        elif isinstance(msg, MaskedBidBatch):
            w.u32(msg.batch); w.u8(int(msg.per_unit)); w.u8(msg.id_space); w.u32(len(msg.entries))
            for e in msg.entries:
                w.u32(e.pid); w.u32(e.demand); w.ct(e.ct)
        elif isinstance(msg, WinnerSetReply):
            w.u32(msg.batch); w.u8(msg.id_space); w.u32s(msg.pids)
        elif isinstance(msg, (SubcellPick, TypePick)):
            w.u32(msg.batch); w.u32(msg.index)
        elif isinstance(msg, PaymentComponentBatch):
            w.u32(msg.batch); w.u8(msg.op); w.u32(msg.subject); w.u8(msg.id_space)
            w.u8(msg.verdict); w.u32(len(msg.entries))
            for e in msg.entries:
                w.u8(e.tag); w.u32(e.aux); w.ct(e.ct)
        elif isinstance(msg, PaymentReply):
            w.u32(msg.batch); w.u8(msg.op); w.u32(len(msg.values))
            for v in msg.values:
                w.sint(v)
            w.cts(msg.cts)
        elif isinstance(msg, FinalAllocation):
            w.u32(len(msg.entries))
            for e in msg.entries:
                w.u32(e.bidder); w.sint(e.payment); w.u32s(e.channels)
        else:
            raise TypeError(f"not a protocol message: {type(msg).__name__}")
        return bytes(w.buf)

    def decode(self, kind: MessageKind, payload: bytes) -> Message:
        r = _Reader(payload, self.pk)
        if kind == MessageKind.MASKED_WEIGHT_BATCH:
            batch, purpose, ref_batch, ref_index = r.u32(), Purpose(r.u8()), r.u32(), r.u32()
            prefix = r.u32s()
            msg = MaskedWeightBatch(batch, r.cts(), purpose, ref_batch, ref_index, prefix)
        elif kind == MessageKind.ORDER_REPLY:
            msg = OrderReply(r.u32(), r.u32s())
        elif kind == MessageKind.MASKED_BID_BATCH:
            batch, per_unit, space = r.u32(), bool(r.u8()), IdSpace(r.u8())
            entries = [BidEntry(r.u32(), r.u32(), r.ct()) for _ in range(r.u32())]
            msg = MaskedBidBatch(batch, entries, per_unit, space)
        elif kind == MessageKind.WINNER_SET_REPLY:
            batch, space = r.u32(), IdSpace(r.u8())
            msg = WinnerSetReply(batch, r.u32s(), space)
        elif kind == MessageKind.SUBCELL_PICK:
            msg = SubcellPick(r.u32(), r.u32())
        elif kind == MessageKind.TYPE_PICK:
            msg = TypePick(r.u32(), r.u32())
        elif kind == MessageKind.PAYMENT_COMPONENT_BATCH:
            batch, op, subject, space, verdict = r.u32(), PaymentOp(r.u8()), r.u32(), IdSpace(r.u8()), r.u8()
            entries = [PaymentEntry(r.u8(), r.u32(), r.ct()) for _ in range(r.u32())]
            msg = PaymentComponentBatch(batch, op, subject, space, entries, verdict)
        elif kind == MessageKind.PAYMENT_REPLY:
            batch, op = r.u32(), PaymentOp(r.u8())
            values = [r.sint() for _ in range(r.u32())]
            msg = PaymentReply(batch, op, values, r.cts())
        elif kind == MessageKind.FINAL_ALLOCATION:
            entries = [FinalEntry(r.u32(), r.sint(), r.u32s()) for _ in range(r.u32())]
            msg = FinalAllocation(entries)
        else:
            raise ValueError(f"unknown message kind {kind}")
        r.done()
        return msg

    def frame(self, seq: int, msg: Message) -> bytes:
        body = struct.pack(">BI", msg.kind, seq) + self.encode(msg)
        return struct.pack(">I", len(body)) + body

    def unframe(self, frame: bytes) -> tuple[int, Message]:
        if len(frame) < 9:
            raise ValueError("frame too short")
        (length,) = struct.unpack(">I", frame[:4])
        if length != len(frame) - 4:
            raise ValueError("frame length prefix does not match")
        kind, seq = struct.unpack(">BI", frame[4:9])
        return seq, self.decode(MessageKind(kind), frame[9:])


def frame_payload(frame: bytes) -> bytes:
    return frame[9:]
