"""Privacy-preserving strategyproof spectrum auctions.

Plaintext allocators and critical-value payments live in ``alloc_sua`` and
``alloc_mua``; ``protocol`` runs the same mechanisms between an agent and an
auctioneer over Paillier-encrypted bids (``crypto``).
"""
from .model import Allocation, Bidder, ModelKind, Scenario, ScenarioConfig, generate_scenario

__version__ = "0.1.0"

__all__ = ["Allocation", "Bidder", "ModelKind", "Scenario", "ScenarioConfig", "generate_scenario"]
