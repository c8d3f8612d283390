"""Re-run oracles and property checks shared by the test-suite and the CLI.

Everything here treats a mechanism as a black box: allocate from scratch,
look at who won.  The critical-value oracle bisects on that black box, so it
shares no code with the payment formulas it is meant to check.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .alloc_mua import emua_allocate, emua_payments, mua_allocate, mua_payments
from .alloc_sua import ptas_allocate, sua_payments
from .model import Allocation, ModelKind, Scenario, ScenarioConfig, generate_scenario


class Mechanism(str, Enum):
    SUA = "sua"
    MUA = "mua"
    EMUA = "emua"


def fuzz_scenario(mechanism: Mechanism | str, seed: int) -> tuple[Scenario, int]:
    """A small random instance (and shifting parameter k) for property checks.

    Areas are kept tight so that conflicts, contention and ties are common.
    """
    rng = random.Random(f"fuzz-{seed}")
    if Mechanism(mechanism) is Mechanism.SUA:
        side = rng.choice([3, 5, 8])
        cfg = ScenarioConfig(n=rng.randint(2, 12), area=(side, side), model_kind=ModelKind.SUA, seed=seed)
        return generate_scenario(cfg), rng.choice([2, 3, 4])
    side = rng.choice([1, 2, 3])
    cfg = ScenarioConfig(
        n=rng.randint(4, 14), area=(side, side), bid_range=(0, rng.choice([10, 100])),
        m=rng.choice([2, 3, 4]), model_kind=ModelKind.MUA, seed=seed,
    )
    return generate_scenario(cfg), 4


def allocate(scenario: Scenario, mechanism: Mechanism | str, k: int = 4) -> Allocation:
    mech = Mechanism(mechanism)
    if mech is Mechanism.SUA:
        return ptas_allocate(scenario, k).allocation
    if mech is Mechanism.MUA:
        return mua_allocate(scenario).allocation
    return emua_allocate(scenario).final


def payments(scenario: Scenario, mechanism: Mechanism | str, k: int = 4) -> dict[int, int]:
    mech = Mechanism(mechanism)
    if mech is Mechanism.SUA:
        return sua_payments(scenario, k)
    if mech is Mechanism.MUA:
        return mua_payments(scenario)
    return emua_payments(scenario)


def wins_with(scenario: Scenario, mechanism, bidder_id: int, bid: int, k: int = 4) -> bool:
    return bidder_id in allocate(scenario.with_bid(bidder_id, bid), mechanism, k).winners


def bisection_threshold(scenario: Scenario, mechanism, bidder_id: int, k: int = 4) -> int:
    """Smallest bid with which a current winner still wins, by re-running.

    Assumes bid monotonicity (checked separately); searches [0, own bid].
    """
    lo, hi = 0, scenario.bidder(bidder_id).bid
    if not wins_with(scenario, mechanism, bidder_id, hi, k):
        raise ValueError(f"bidder {bidder_id} does not win at its own bid")
    while lo < hi:
        mid = (lo + hi) // 2
        if wins_with(scenario, mechanism, bidder_id, mid, k):
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass
class CheckResult:
    name: str
    trials: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, detail: str):
        self.failures.append(detail)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"[{status}] {self.name}: {self.trials} trials, {len(self.failures)} failures"


def check_monotone(scenario: Scenario, mechanism, rng: random.Random, deltas: int = 3, k: int = 4,
                   result: CheckResult | None = None, tag: str = "") -> CheckResult:
    result = result or CheckResult("bid monotonicity")
    span = max(scenario.bid_range[1], 1)
    for i in sorted(allocate(scenario, mechanism, k).winners):
        b = scenario.bidder(i).bid
        for _ in range(deltas):
            raised = b + rng.randint(1, span)
            result.trials += 1
            if not wins_with(scenario, mechanism, i, raised, k):
                result.fail(f"{tag} bidder {i} loses after raising {b} -> {raised}")
    return result


def check_critical(scenario: Scenario, mechanism, k: int = 4, result: CheckResult | None = None,
                   tag: str = "") -> CheckResult:
    result = result or CheckResult("critical values")
    for i, p in sorted(payments(scenario, mechanism, k).items()):
        result.trials += 1
        oracle = bisection_threshold(scenario, mechanism, i, k)
        if p != oracle:
            result.fail(f"{tag} bidder {i}: formula {p} vs re-run threshold {oracle}")
    return result


def utility(scenario: Scenario, mechanism, bidder_id: int, k: int = 4,
            pay: Callable | None = None) -> int:
    """Valuation minus payment if winning, else 0 (valuations are the true bids)."""
    alloc = allocate(scenario, mechanism, k)
    if bidder_id not in alloc.winners:
        return 0
    p = (pay or payments)(scenario, mechanism, k)[bidder_id]
    return scenario.bidder(bidder_id).valuation - p


def misreport_gain(scenario: Scenario, mechanism, bidder_id: int, report: int, k: int = 4,
                   pay: Callable | None = None) -> int:
    """Utility from reporting ``report`` minus utility from bidding truthfully."""
    truthful = scenario.with_bid(bidder_id, scenario.bidder(bidder_id).valuation)
    lied = scenario.with_bid(bidder_id, report)
    value = scenario.bidder(bidder_id).valuation
    u_true = utility(truthful, mechanism, bidder_id, k, pay)
    alloc = allocate(lied, mechanism, k)
    if bidder_id not in alloc.winners:
        return -u_true
    p = (pay or payments)(lied, mechanism, k)[bidder_id]
    return (value - p) - u_true


def check_strategyproof(scenario: Scenario, mechanism, rng: random.Random, trials: int, k: int = 4,
                        result: CheckResult | None = None, tag: str = "",
                        pay: Callable | None = None) -> CheckResult:
    result = result or CheckResult("strategyproofness")
    ids = [b.id for b in scenario.bidders]
    hi = 2 * max(scenario.bid_range[1], 1)
    for _ in range(trials):
        i = rng.choice(ids)
        report = rng.randint(0, hi)
        result.trials += 1
        gain = misreport_gain(scenario, mechanism, i, report, k, pay)
        if gain > 0:
            result.fail(f"{tag} bidder {i} gains {gain} by reporting {report}")
    return result
