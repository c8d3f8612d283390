"""Transcripts: every frame exchanged plus what each party saw locally."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from ..crypto import MaskPair
from .wire import Message, MessageKind


class PartyRole(str, Enum):
    AGENT = "agent"
    AUCTIONEER = "auctioneer"


@dataclass
class TranscriptEntry:
    seq: int
    sender: PartyRole
    kind: MessageKind
    size_bytes: int
    message: Message
    frame: bytes

    @property
    def payload_digest(self) -> str:
        return hashlib.sha256(self.frame[9:]).hexdigest()


@dataclass(frozen=True)
class CtProvenance:
    """Which bids an outgoing ciphertext depends on, and whether it was masked."""

    refs: frozenset[int]
    masked: bool


@dataclass
class MaskRecord:
    batch: int
    group: int  # batches sharing one mask on purpose (a subcell and its prefix test)
    mask: MaskPair | None
    add_scale_per_entry: bool = False


@dataclass
class AgentView:
    permutation: dict[int, int] = field(default_factory=dict)
    masks: list[MaskRecord] = field(default_factory=list)
    provenance: dict[int, list[CtProvenance]] = field(default_factory=dict)
    attributable: set[int] = field(default_factory=set)  # batches whose entries carry ids
    mask_groups: dict[int, int] = field(default_factory=dict)  # batch -> group
    hom_ops: int = 0
    encryptions: int = 0


@dataclass
class AuctioneerView:
    decrypted: dict[int, list[int]] = field(default_factory=dict)
    decryptions: int = 0
    encryptions: int = 0


@dataclass
class Transcript:
    mechanism: str
    modulus_bits: int
    entries: list[TranscriptEntry] = field(default_factory=list)
    agent_view: AgentView = field(default_factory=AgentView)
    auctioneer_view: AuctioneerView = field(default_factory=AuctioneerView)
    agent_time_s: float = 0.0
    auctioneer_time_s: float = 0.0

    def record(self, seq: int, sender: PartyRole, msg: Message, frame: bytes) -> None:
        if self.entries and seq <= self.entries[-1].seq:
            raise ValueError("sequence numbers must strictly increase")
        self.entries.append(TranscriptEntry(seq, sender, msg.kind, len(frame), msg, frame))

    def frames(self, sender: PartyRole | None = None) -> list[bytes]:
        return [e.frame for e in self.entries if sender is None or e.sender == sender]

    def final_allocation(self):
        for e in reversed(self.entries):
            if e.kind == MessageKind.FINAL_ALLOCATION:
                return e.message
        return None

    def jsonl_lines(self) -> list[str]:
        return [
            json.dumps(
                {"seq": e.seq, "sender": e.sender.value, "kind": e.kind.name,
                 "size_bytes": e.size_bytes, "payload_digest": e.payload_digest},
                sort_keys=True,
            )
            for e in self.entries
        ]

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.jsonl_lines():
                fh.write(line + "\n")

    def write_frames(self, path: str | Path) -> None:
        """Raw frames back to back; enough to replay the agent's side."""
        with open(path, "wb") as fh:
            for e in self.entries:
                fh.write(e.frame)


def read_frames(path: str | Path) -> list[bytes]:
    data = Path(path).read_bytes()
    frames, pos = [], 0
    while pos < len(data):
        length = int.from_bytes(data[pos : pos + 4], "big")
        frames.append(data[pos : pos + 4 + length])
        pos += 4 + length
    return frames
