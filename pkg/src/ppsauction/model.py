"""Bidders, scenarios and the planar decompositions the allocators work on.

Every bidder interferes within a disk of radius 1/2, so two bidders conflict
when their locations are strictly closer than one unit.  Geometry is kept in
floats; bids and weights are always exact integers.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

CONFLICT_DISTANCE = 1.0
DISK_RADIUS = 0.5


class ModelKind(str, Enum):
    SUA = "sua"
    MUA = "mua"


@dataclass(frozen=True)
class Bidder:
    id: int
    x: float
    y: float
    bid: int
    demand: int = 1
    valuation: int = 0

    def __post_init__(self):
        if self.demand < 1:
            raise ValueError(f"bidder {self.id}: demand must be >= 1, got {self.demand}")
        if self.bid < 0:
            raise ValueError(f"bidder {self.id}: bid must be non-negative, got {self.bid}")

    @property
    def location(self) -> tuple[float, float]:
        return (self.x, self.y)

    def with_bid(self, bid: int) -> "Bidder":
        return replace(self, bid=bid)


@dataclass(frozen=True)
class Scenario:
    bidders: tuple[Bidder, ...]
    channel_count: int = 1
    area: tuple[float, float] = (100.0, 100.0)
    model_kind: ModelKind = ModelKind.SUA
    bid_range: tuple[int, int] = (0, 100)

    def __post_init__(self):
        object.__setattr__(self, "bidders", tuple(self.bidders))
        object.__setattr__(self, "model_kind", ModelKind(self.model_kind))
        ids = [b.id for b in self.bidders]
        if len(set(ids)) != len(ids):
            raise ValueError("bidder ids must be unique")
        if self.channel_count < 1:
            raise ValueError("channel_count must be positive")
        if self.model_kind is ModelKind.SUA:
            if self.channel_count != 1:
                raise ValueError("SUA scenarios have exactly one channel")
            if any(b.demand != 1 for b in self.bidders):
                raise ValueError("SUA bidders all demand a single channel")
        w, h = self.area
        for b in self.bidders:
            if not (0 <= b.x <= w and 0 <= b.y <= h):
                raise ValueError(f"bidder {b.id} at {b.location} lies outside area {self.area}")

    def __len__(self):
        return len(self.bidders)

    @property
    def by_id(self) -> dict[int, Bidder]:
        return {b.id: b for b in self.bidders}

    def bidder(self, bidder_id: int) -> Bidder:
        for b in self.bidders:
            if b.id == bidder_id:
                return b
        raise KeyError(bidder_id)

    def with_bid(self, bidder_id: int, bid: int) -> "Scenario":
        """Copy of the scenario where one bidder reports ``bid`` instead."""
        if all(b.id != bidder_id for b in self.bidders):
            raise KeyError(bidder_id)
        bidders = tuple(b.with_bid(bid) if b.id == bidder_id else b for b in self.bidders)
        return replace(self, bidders=bidders)

    def public(self) -> tuple[tuple[int, float, float, int], ...]:
        """What the agent learns in the clear: ids, locations and demands."""
        return tuple((b.id, b.x, b.y, b.demand) for b in self.bidders)


@dataclass(frozen=True)
class ShiftingSpec:
    k: int
    r: int
    s: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not (0 <= self.r < self.k and 0 <= self.s < self.k):
            raise ValueError(f"shift ({self.r}, {self.s}) outside [0, {self.k})")

    @property
    def index(self) -> int:
        return self.r * self.k + self.s


@dataclass(frozen=True, order=True)
class SubgridAddress:
    cell: int
    grid_type: int
    subcell: int


@dataclass
class Allocation:
    winners: frozenset[int] = frozenset()
    channel_assignment: dict[int, frozenset[int]] = field(default_factory=dict)
    weight: int = 0

    def __post_init__(self):
        self.winners = frozenset(self.winners)

    def __contains__(self, bidder_id):
        return bidder_id in self.winners


def distance(a: Bidder, b: Bidder) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def conflicts(a: Bidder, b: Bidder) -> bool:
    # tangent disks do not interfere
    return (a.x - b.x) ** 2 + (a.y - b.y) ** 2 < CONFLICT_DISTANCE**2


def conflict_graph(bidders: Sequence[Bidder]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {b.id: set() for b in bidders}
    for i, a in enumerate(bidders):
        for b in bidders[i + 1 :]:
            if conflicts(a, b):
                adj[a.id].add(b.id)
                adj[b.id].add(a.id)
    return adj


def _line_distance(coord: float, offset: int, k: int) -> float:
    t = (coord - offset) % k
    return min(t, k - t)


def shifting_partition(
    scenario: Scenario, spec: ShiftingSpec
) -> tuple[dict[tuple[int, int], list[int]], list[int]]:
    """Split bidders into the k x k grids of an (r, s)-shifting.

    Bidders whose disk is cut by a line x = r (mod k) or y = s (mod k) are
    discarded.  Grid keys are (column, row) of the cell containing the bidder.
    """
    grids: dict[tuple[int, int], list[int]] = {}
    discarded: list[int] = []
    k, r, s = spec.k, spec.r, spec.s
    for b in scenario.bidders:
        if _line_distance(b.x, r, k) < DISK_RADIUS or _line_distance(b.y, s, k) < DISK_RADIUS:
            discarded.append(b.id)
            continue
        key = (math.floor((b.x - r) / k), math.floor((b.y - s) / k))
        grids.setdefault(key, []).append(b.id)
    return dict(sorted(grids.items())), discarded


def cell_columns(width: float) -> int:
    # a point on the far edge still gets its own column
    return math.floor(width / 2) + 1


def subgrid_address(location: tuple[float, float], width: float = 100.0) -> SubgridAddress:
    """Locate a point in the 2x2 cell / 1x1 type / half-unit subcell hierarchy.

    Labels run row-major from the origin: type = 2*(floor(y) mod 2) +
    (floor(x) mod 2) + 1, and the subcell uses the same rule at half-unit
    resolution.  Cells are numbered row-major with floor(width / 2) + 1 columns.
    """
    x, y = location
    cx, cy = math.floor(x / 2), math.floor(y / 2)
    grid_type = 2 * (math.floor(y) % 2) + (math.floor(x) % 2) + 1
    subcell = 2 * (math.floor(2 * y) % 2) + (math.floor(2 * x) % 2) + 1
    return SubgridAddress(cy * cell_columns(width) + cx, grid_type, subcell)


def k_from_epsilon(epsilon: float) -> int:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    k = math.ceil((1 + epsilon + math.sqrt(1 + epsilon)) / epsilon)
    return max(2, k)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    area: tuple[float, float] = (100.0, 100.0)
    bid_range: tuple[int, int] = (0, 100)
    demand_range: tuple[int, int] = (1, 4)
    m: int = 4
    model_kind: ModelKind = ModelKind.MUA
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model_kind", ModelKind(self.model_kind))
        if self.n < 1:
            raise ValueError("n must be at least 1")
        lo, hi = self.bid_range
        if lo > hi or lo < 0:
            raise ValueError(f"empty or negative bid range {self.bid_range}")
        dlo, dhi = self.demand_range
        if dlo > dhi or dlo < 1:
            raise ValueError(f"empty demand range {self.demand_range}")
        if self.area[0] <= 0 or self.area[1] <= 0:
            raise ValueError("area must have positive extent")


def generate_scenario(config: ScenarioConfig) -> Scenario:
    rng = random.Random(config.seed)
    w, h = config.area
    lo, hi = config.bid_range
    sua = config.model_kind is ModelKind.SUA
    bidders = []
    for i in range(config.n):
        x, y = rng.uniform(0, w), rng.uniform(0, h)
        bid = rng.randint(lo, hi)
        demand = 1 if sua else rng.randint(*config.demand_range)
        bidders.append(Bidder(i, x, y, bid, demand, valuation=bid))
    return Scenario(
        tuple(bidders),
        channel_count=1 if sua else config.m,
        area=(float(w), float(h)),
        model_kind=config.model_kind,
        bid_range=(lo, hi),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "model": scenario.model_kind.value,
        "m": scenario.channel_count,
        "area": list(scenario.area),
        "bid_range": list(scenario.bid_range),
        "bidders": [
            {"id": b.id, "x": b.x, "y": b.y, "bid": b.bid, "demand": b.demand, "valuation": b.valuation}
            for b in scenario.bidders
        ],
    }


def scenario_from_dict(data: dict) -> Scenario:
    bidders = tuple(
        Bidder(
            int(d["id"]), float(d["x"]), float(d["y"]), int(d["bid"]),
            int(d.get("demand", 1)), int(d.get("valuation", d["bid"])),
        )
        for d in data["bidders"]
    )
    return Scenario(
        bidders,
        channel_count=int(data["m"]),
        area=tuple(float(a) for a in data["area"]),
        model_kind=ModelKind(data["model"]),
        bid_range=tuple(data.get("bid_range", (0, 100))),
    )


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=1)
        fh.write("\n")


def load_scenario(path: str | Path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def sort_key_ids(ids: Iterable[int]) -> tuple[int, ...]:
    """Canonical tie-break key for a bidder set: its sorted id tuple."""
    return tuple(sorted(ids))
