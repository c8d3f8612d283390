"""Two-party execution of the auctions over Paillier-encrypted bids."""
from .agent import FAULTS, Agent, EncryptedEvaluator, PublicInfo
from .audit import PrivacyReport, Violation, audit_privacy, comm_stats, replay
from .auctioneer import Auctioneer
from .session import (
    ProtocolOutcome,
    SessionConfig,
    encrypt_bids,
    run_pps_emua,
    run_pps_mua,
    run_pps_sua,
    run_scenario,
)
from .transcript import PartyRole, Transcript
from .transport import InMemoryTransport, StreamTransport
from .wire import Codec, MessageKind

__all__ = [
    "FAULTS", "Agent", "EncryptedEvaluator", "PublicInfo", "PrivacyReport", "Violation",
    "audit_privacy", "comm_stats", "replay", "Auctioneer", "ProtocolOutcome", "SessionConfig",
    "encrypt_bids", "run_pps_emua", "run_pps_mua", "run_pps_sua", "run_scenario", "PartyRole",
    "Transcript", "InMemoryTransport", "StreamTransport", "Codec", "MessageKind",
]
