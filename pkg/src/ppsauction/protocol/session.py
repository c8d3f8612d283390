"""Running one auction end to end between an agent and an auctioneer."""
from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Callable, Mapping

from ..crypto import Ciphertext, KeyPair, MaskConfig, encrypt
from ..model import Allocation, Scenario
from .agent import Agent, PublicInfo
from .auctioneer import Auctioneer
from .transcript import Transcript
from .transport import InMemoryTransport, StreamTransport, Transport

TransportFactory = Callable[[Callable[[bytes], "bytes | None"]], Transport]

TRANSPORTS: dict[str, TransportFactory] = {"memory": InMemoryTransport, "stream": StreamTransport}


@dataclass
class ProtocolOutcome:
    allocation: Allocation  # weight is None: nobody inside the protocol learns it
    payments: dict[int, int]
    transcript: Transcript
    auctioneer: Auctioneer


@dataclass(frozen=True)
class SessionConfig:
    seed: int = 0  # drives masks, the permutation and auctioneer re-encryption
    mask_config: MaskConfig | None = None
    transport: str = "memory"
    fault: str | None = None
    zero_unit_offset: bool = False


def encrypt_bids(keys: KeyPair, scenario: Scenario, rng=None) -> dict[int, Ciphertext]:
    """What each bidder submits: its bid under the auctioneer's public key."""
    return {b.id: encrypt(keys.public_key, b.bid, rng) for b in scenario.bidders}


def _run(mechanism: str, info: PublicInfo, encrypted_bids, keys: KeyPair, config: SessionConfig, step):
    config = config or SessionConfig()
    transcript = Transcript(mechanism, keys.modulus_bits)
    auctioneer = Auctioneer(keys, random.Random(f"auctioneer-{config.seed}"))
    transport = TRANSPORTS[config.transport](auctioneer.handle)
    agent = Agent(
        keys.public_key, info, encrypted_bids, transport, transcript,
        rng=random.Random(f"agent-{config.seed}"),
        mask_config=config.mask_config, fault=config.fault, zero_unit_offset=config.zero_unit_offset,
    )
    start = time.perf_counter()
    try:
        alloc, payments = step(agent)
    finally:
        transport.close()
    total = time.perf_counter() - start
    transcript.auctioneer_view = auctioneer.view
    transcript.auctioneer_time_s = auctioneer.time_s
    transcript.agent_time_s = max(total - auctioneer.time_s, 0.0)
    return ProtocolOutcome(alloc, dict(payments), transcript, auctioneer)


def run_pps_sua(info: PublicInfo, encrypted_bids: Mapping[int, Ciphertext], k: int, keys: KeyPair,
                config: SessionConfig | None = None) -> ProtocolOutcome:
    return _run("PPS-SUA", info, encrypted_bids, keys, config, lambda a: a.run_sua(k))


def run_pps_mua(info: PublicInfo, encrypted_bids: Mapping[int, Ciphertext], keys: KeyPair,
                config: SessionConfig | None = None) -> ProtocolOutcome:
    return _run("PPS-MUA", info, encrypted_bids, keys, config, lambda a: a.run_mua())


def run_pps_emua(info: PublicInfo, encrypted_bids: Mapping[int, Ciphertext], keys: KeyPair,
                 config: SessionConfig | None = None) -> ProtocolOutcome:
    return _run("PPS-EMUA", info, encrypted_bids, keys, config, lambda a: a.run_emua())


def run_scenario(scenario: Scenario, mechanism: str, keys: KeyPair, *, k: int = 4,
                 config: SessionConfig | None = None, bid_seed: int = 0) -> ProtocolOutcome:
    """Convenience wrapper: encrypt the scenario's bids and run one mechanism."""
    info = PublicInfo.from_scenario(scenario)
    bids = encrypt_bids(keys, scenario, random.Random(f"bids-{bid_seed}"))
    mech = mechanism.lower()
    if mech in ("sua", "pps-sua"):
        return run_pps_sua(info, bids, k, keys, config)
    if mech in ("mua", "pps-mua"):
        return run_pps_mua(info, bids, keys, config)
    if mech in ("emua", "pps-emua"):
        return run_pps_emua(info, bids, keys, config)
    raise ValueError(f"unknown mechanism {mechanism!r}")
