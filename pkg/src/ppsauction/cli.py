"""Command-line harness: generate scenarios, run mechanisms, sweep, verify.

    ppsauction generate --model sua --n 50 --area 100 --seed 1 -o s.json
    ppsauction run s.json --mechanism sua --k 4 --encrypted
    ppsauction bench --mechanism sua --n 8,12,16 --k 2,4 --repetitions 100 -o sua.csv
    ppsauction verify --fuzz 100 --mechanism emua --encrypted

Default Paillier key size comes from $PPS_KEY_BITS (1024 when unset).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import random
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import click

from . import checks
from .alloc_mua import DEFAULT_ORACLE_CAP as MUA_ORACLE_CAP
from .alloc_mua import brute_force_mua
from .alloc_sua import DEFAULT_ORACLE_CAP as SUA_ORACLE_CAP
from .alloc_sua import brute_force_mwis
from .checks import Mechanism
from .crypto import KeyPair, MaskConfig, MaskOverflowError, keygen
from .model import (
    ModelKind,
    Scenario,
    ScenarioConfig,
    generate_scenario,
    k_from_epsilon,
    load_scenario,
    save_scenario,
    scenario_to_dict,
)

KEY_BITS_ENV = "PPS_KEY_BITS"
PROTOCOL_NAMES = {Mechanism.SUA: "PPS-SUA", Mechanism.MUA: "PPS-MUA", Mechanism.EMUA: "PPS-EMUA"}

# column order of `bench` output; documented in the README
BENCH_COLUMNS = [
    "mechanism", "n", "k", "m", "repetitions", "ratio_mean", "ratio_count",
    "weight_mean", "payments_mean", "agent_time_ms_mean", "auctioneer_time_ms_mean",
    "total_bytes_mean", "message_count_mean",
]


def default_key_bits() -> int:
    return int(os.environ.get(KEY_BITS_ENV, "1024"))


def scenario_digest(scenario: Scenario) -> str:
    blob = json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunReport:
    scenario_digest: str
    mechanism: str
    n: int
    k: int | None
    channel_count: int
    winners: list[int]
    payments: dict[int, int]
    weight: int
    social_efficiency_ratio: float | None = None
    oracle_weight: int | None = None
    encrypted: bool = False
    agent_time_ms: float = 0.0
    auctioneer_time_ms: float = 0.0
    comm: dict = field(default_factory=dict)

    @property
    def payments_total(self) -> int:
        return sum(self.payments.values())

    def to_json(self) -> dict:
        d = asdict(self)
        d["payments"] = {str(i): p for i, p in sorted(self.payments.items())}
        d["payments_total"] = self.payments_total
        return d


class EquivalenceError(AssertionError):
    pass


def oracle_weight(scenario: Scenario, mechanism: Mechanism, sua_cap=SUA_ORACLE_CAP,
                  mua_cap=MUA_ORACLE_CAP) -> int | None:
    n = len(scenario.bidders)
    if mechanism is Mechanism.SUA:
        return brute_force_mwis(scenario).weight if n <= sua_cap else None
    return brute_force_mua(scenario) if n <= mua_cap else None


def run_once(scenario: Scenario, mechanism, k: int = 4, *, encrypted: bool = False,
             keys: KeyPair | None = None, seed: int = 0, oracle: bool = True,
             sua_cap=SUA_ORACLE_CAP, mua_cap=MUA_ORACLE_CAP, mask_config=None) -> RunReport:
    from .protocol import SessionConfig, comm_stats, run_scenario

    mech = Mechanism(mechanism)
    start = time.perf_counter()
    alloc = checks.allocate(scenario, mech, k)
    pay = checks.payments(scenario, mech, k)
    plain_ms = (time.perf_counter() - start) * 1e3
    report = RunReport(
        scenario_digest(scenario), PROTOCOL_NAMES[mech], len(scenario.bidders),
        k if mech is Mechanism.SUA else None, scenario.channel_count,
        sorted(alloc.winners), pay, alloc.weight, agent_time_ms=plain_ms,
    )
    if oracle:
        opt = oracle_weight(scenario, mech, sua_cap, mua_cap)
        if opt is not None:
            report.oracle_weight = opt
            report.social_efficiency_ratio = alloc.weight / opt if opt else 1.0
    if encrypted:
        keys = keys or keygen(default_key_bits(), random.Random(f"keys-{seed}"))
        out = run_scenario(scenario, mech.value, keys, k=k,
                           config=SessionConfig(seed=seed, mask_config=mask_config), bid_seed=seed)
        if (out.allocation.winners != alloc.winners
                or out.allocation.channel_assignment != alloc.channel_assignment
                or out.payments != pay):
            raise EquivalenceError(f"encrypted {report.mechanism} run disagrees with plaintext")
        report.encrypted = True
        report.agent_time_ms = out.transcript.agent_time_s * 1e3
        report.auctioneer_time_ms = out.transcript.auctioneer_time_s * 1e3
        report.comm = comm_stats(out.transcript)
    return report


def _parse_ints(text: str | None) -> list[int]:
    if not text:
        return []
    return [int(t) for t in text.split(",") if t.strip()]


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _emit_csv(rows: list[dict], columns: list[str], out):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
    else:
        click.echo(buf.getvalue(), nl=False)


@click.group()
def main():
    """Privacy-preserving strategyproof spectrum auctions."""


@main.command()
@click.option("--model", type=click.Choice(["sua", "mua"]), required=True)
@click.option("--n", "n", type=int, required=True)
@click.option("--area", type=float, default=100.0, show_default=True, help="side of the square area")
@click.option("--channels", type=int, default=None, help="m (MUA only, default 4)")
@click.option("--demand-min", type=int, default=None)
@click.option("--demand-max", type=int, default=None)
@click.option("--bid-min", type=int, default=0, show_default=True)
@click.option("--bid-max", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None)
def generate(model, n, area, channels, demand_min, demand_max, bid_min, bid_max, seed, out):
    """Write a random scenario as JSON."""
    if model == "sua":
        if channels not in (None, 1):
            raise click.UsageError("--channels must be 1 (or omitted) for --model sua")
        if (demand_min or 1) != 1 or (demand_max or 1) != 1:
            raise click.UsageError("SUA bidders demand exactly one channel")
        channels, demand_min, demand_max = 1, 1, 1
    else:
        channels = 4 if channels is None else channels
        demand_min = 1 if demand_min is None else demand_min
        demand_max = 4 if demand_max is None else demand_max
    try:
        cfg = ScenarioConfig(n=n, area=(area, area), bid_range=(bid_min, bid_max),
                             demand_range=(demand_min, demand_max), m=channels,
                             model_kind=ModelKind(model), seed=seed)
        scenario = generate_scenario(cfg)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    if out:
        save_scenario(scenario, out)
    else:
        _emit_json(scenario_to_dict(scenario), None)


def _resolve_k(k, epsilon) -> int:
    if k is not None and epsilon is not None:
        raise click.UsageError("give either --k or --epsilon, not both")
    if epsilon is not None:
        return k_from_epsilon(epsilon)
    return 4 if k is None else k


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--mechanism", type=click.Choice([m.value for m in Mechanism]), required=True)
@click.option("--k", type=int, default=None, help="shifting parameter (SUA)")
@click.option("--epsilon", type=float, default=None, help="derive k from the approximation target")
@click.option("--encrypted/--plaintext", default=False)
@click.option("--key-bits", type=int, default=None, help=f"default: ${KEY_BITS_ENV} or 1024")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--oracle/--no-oracle", default=True, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None)
def run(scenario_file, mechanism, k, epsilon, encrypted, key_bits, seed, oracle, fmt, out):
    """Run one mechanism on a scenario file and report metrics."""
    scenario = load_scenario(scenario_file)
    k = _resolve_k(k, epsilon)
    keys = keygen(key_bits or default_key_bits(), random.Random(f"keys-{seed}")) if encrypted else None
    try:
        report = run_once(scenario, mechanism, k, encrypted=encrypted, keys=keys, seed=seed, oracle=oracle)
    except EquivalenceError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if fmt == "json":
        _emit_json(report.to_json(), out)
    else:
        row = {
            "scenario_digest": report.scenario_digest, "mechanism": report.mechanism, "n": report.n,
            "k": report.k, "m": report.channel_count, "weight": report.weight,
            "ratio": report.social_efficiency_ratio, "payments_total": report.payments_total,
            "agent_time_ms": round(report.agent_time_ms, 3),
            "auctioneer_time_ms": round(report.auctioneer_time_ms, 3),
            "total_bytes": report.comm.get("total_bytes", 0),
        }
        _emit_csv([row], list(row), out)


@lru_cache(maxsize=4)
def _bench_keys(bits: int) -> KeyPair:
    return keygen(bits, random.Random(f"bench-keys-{bits}"))


def _bench_point(args) -> dict:
    mech, n, k, m, reps, area, encrypted, bits, seed0 = args
    model = ModelKind.SUA if mech == "sua" else ModelKind.MUA
    reports = []
    for rep in range(reps):
        seed = seed0 + rep
        cfg = ScenarioConfig(n=n, area=(area, area), m=1 if model is ModelKind.SUA else m,
                             model_kind=model, seed=seed)
        keys = _bench_keys(bits) if encrypted else None
        reports.append(run_once(generate_scenario(cfg), mech, k, encrypted=encrypted, keys=keys, seed=seed))
    ratios = [r.social_efficiency_ratio for r in reports if r.social_efficiency_ratio is not None]

    def avg(xs):
        return sum(xs) / len(xs) if xs else ""

    return {
        "mechanism": PROTOCOL_NAMES[Mechanism(mech)], "n": n, "k": k if mech == "sua" else "",
        "m": m if mech != "sua" else 1, "repetitions": reps,
        "ratio_mean": avg(ratios), "ratio_count": len(ratios),
        "weight_mean": avg([r.weight for r in reports]),
        "payments_mean": avg([r.payments_total for r in reports]),
        "agent_time_ms_mean": avg([r.agent_time_ms for r in reports]),
        "auctioneer_time_ms_mean": avg([r.auctioneer_time_ms for r in reports]),
        "total_bytes_mean": avg([r.comm.get("total_bytes", 0) for r in reports]),
        "message_count_mean": avg([r.comm.get("message_count", 0) for r in reports]),
    }


@main.command()
@click.option("--mechanism", type=click.Choice([m.value for m in Mechanism]), required=True)
@click.option("--n", "ns", default="8,12,16,20", show_default=True, help="comma-separated bidder counts")
@click.option("--k", "ks", default="4", show_default=True, help="comma-separated k values (SUA)")
@click.option("--m", "ms", default="4", show_default=True, help="comma-separated channel counts (MUA/EMUA)")
@click.option("--repetitions", type=int, default=100, show_default=True)
@click.option("--area", type=float, default=None, help="side of the area (default 8 SUA, 6 MUA)")
@click.option("--encrypted/--plaintext", default=True, show_default=True)
@click.option("--key-bits", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True, help="worker processes")
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None)
def bench(mechanism, ns, ks, ms, repetitions, area, encrypted, key_bits, seed, jobs, out):
    """Average run reports over seeds for every (n, k) or (n, m) point; CSV out."""
    if repetitions < 1:
        raise click.UsageError("--repetitions must be positive")
    bits = key_bits or default_key_bits()
    area = area or (8.0 if mechanism == "sua" else 6.0)
    second = _parse_ints(ks) if mechanism == "sua" else _parse_ints(ms)
    points = []
    for p in second:
        for n in _parse_ints(ns):
            k, m = (p, 1) if mechanism == "sua" else (4, p)
            points.append((mechanism, n, k, m, repetitions, area, encrypted, bits, seed))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_bench_point, points))
    else:
        rows = [_bench_point(p) for p in points]
    _emit_csv(rows, BENCH_COLUMNS, out)


@dataclass
class VerifyOutcome:
    results: list[checks.CheckResult]
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and all(r.ok for r in self.results)


def first_price(scenario, mechanism, k):
    """A deliberately manipulable rule: winners pay their own bid."""
    alloc = checks.allocate(scenario, mechanism, k)
    return {i: scenario.bidder(i).bid for i in alloc.winners}


def verify_scenarios(items, mechanism, *, encrypted=False, bits=512, inject=None,
                     misreports=5) -> VerifyOutcome:
    """Run the property suites over (tag, scenario, k) items."""
    from .protocol import SessionConfig, audit_privacy, run_scenario

    mech = Mechanism(mechanism)
    mono = checks.CheckResult("bid monotonicity")
    crit = checks.CheckResult("critical values")
    sp = checks.CheckResult("strategyproofness")
    bound = checks.CheckResult("approximation bound")
    results = [mono, crit, sp, bound]
    enc = audit = None
    if encrypted or inject == "overflow":
        enc = checks.CheckResult("encrypted = plaintext")
        audit = checks.CheckResult("privacy audit")
        results += [enc, audit]
    outcome = VerifyOutcome(results)
    pay = first_price if inject == "misreport" else None
    mask_config = MaskConfig.for_bits(bits)
    if inject == "overflow":
        mask_config = MaskConfig(mask_config.gamma_mult, bits + 16)
    keys = keygen(bits, random.Random("verify-keys")) if enc else None

    for tag, scenario, k in items:
        rng = random.Random(f"verify-{tag}")
        checks.check_monotone(scenario, mech, rng, 3, k, mono, tag)
        checks.check_critical(scenario, mech, k, crit, tag)
        checks.check_strategyproof(scenario, mech, rng, misreports, k, sp, tag, pay)
        opt = oracle_weight(scenario, mech)
        if opt is not None:
            bound.trials += 1
            w = checks.allocate(scenario, mech, k).weight
            if mech is Mechanism.SUA:
                ok = w * k * k >= (k - 1) ** 2 * opt
            else:
                ok = 32 * w >= opt
            if not ok:
                bound.fail(f"{tag} weight {w} vs optimum {opt}")
        if enc is None:
            continue
        enc.trials += 1
        try:
            out = run_scenario(scenario, mech.value, keys, k=k,
                               config=SessionConfig(seed=zlib.crc32(str(tag).encode()), mask_config=mask_config))
        except MaskOverflowError as exc:
            outcome.errors.append(f"{tag} mask overflow guard: {exc}")
            enc.fail(f"{tag} aborted by the overflow guard")
            continue
        alloc = checks.allocate(scenario, mech, k)
        if (out.allocation.winners != alloc.winners
                or out.allocation.channel_assignment != alloc.channel_assignment
                or out.payments != checks.payments(scenario, mech, k)):
            enc.fail(f"{tag} encrypted outcome differs from plaintext")
        audit.trials += 1
        report = audit_privacy(out.transcript)
        for v in report.violations:
            audit.fail(f"{tag} {v.check}: {v.detail}")
    return outcome


@main.command()
@click.argument("scenario_file", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--mechanism", type=click.Choice([m.value for m in Mechanism]), required=True)
@click.option("--fuzz", type=int, default=None, help="number of random seeds instead of a file")
@click.option("--k", type=int, default=4, show_default=True, help="k for a scenario file (SUA)")
@click.option("--encrypted/--plaintext", default=False, help="also run the protocol and the audit")
@click.option("--key-bits", type=int, default=None)
@click.option("--inject", type=click.Choice(["overflow", "misreport"]), default=None,
              help="deliberately break something to see the check fire")
@click.option("--seed", type=int, default=0, show_default=True, help="first fuzz seed")
def verify(scenario_file, mechanism, fuzz, k, encrypted, key_bits, inject, seed):
    """Check monotonicity, critical values, strategyproofness, bounds (and the protocol)."""
    if (scenario_file is None) == (fuzz is None):
        raise click.UsageError("give a scenario file or --fuzz N")
    if scenario_file:
        items = [(scenario_file, load_scenario(scenario_file), k)]
    else:
        items = [(f"seed={s}", *checks.fuzz_scenario(mechanism, s)) for s in range(seed, seed + fuzz)]
    outcome = verify_scenarios(items, mechanism, encrypted=encrypted,
                               bits=key_bits or default_key_bits(), inject=inject)
    for r in outcome.results:
        click.echo(r.line())
        for f in r.failures[:10]:
            click.echo(f"    {f}")
    for e in outcome.errors[:10]:
        click.echo(f"error: {e}")
    sys.exit(0 if outcome.ok else 1)


if __name__ == "__main__":
    main()
