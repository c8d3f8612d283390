#!/usr/bin/env python3
"""Communication and per-party time of the encrypted protocols, as tables.

    PPS_KEY_BITS=1024 python scripts/comm_tables.py --seeds 20

Prints KB of traffic for SUA (rows n, columns k) and MUA / EMUA (rows n,
columns m), averaged over seeds, followed by mean agent/auctioneer time.
"""
import argparse
import os
import random
from statistics import mean

from ppsauction.crypto import keygen
from ppsauction.model import ScenarioConfig, generate_scenario
from ppsauction.protocol import SessionConfig, comm_stats, run_scenario


def cell(mech, n, p, keys, seeds):
    kb, ta, tu = [], [], []
    for seed in range(seeds):
        if mech == "sua":
            sc = generate_scenario(ScenarioConfig(n=n, area=(8, 8), model_kind="sua", seed=seed))
            out = run_scenario(sc, mech, keys, k=p, config=SessionConfig(seed=seed))
        else:
            sc = generate_scenario(ScenarioConfig(n=n, area=(6, 6), m=p, seed=seed))
            out = run_scenario(sc, mech, keys, config=SessionConfig(seed=seed))
        kb.append(comm_stats(out.transcript)["total_bytes"] / 1024)
        ta.append(out.transcript.agent_time_s * 1e3)
        tu.append(out.transcript.auctioneer_time_s * 1e3)
    return mean(kb), mean(ta), mean(tu)


def table(title, mech, ns, ps, label, keys, seeds):
    print(f"\n{title} (KB; agent ms / auctioneer ms)")
    print(f"{'n':>5} " + " ".join(f"{label}={p:<22}" for p in ps))
    for n in ns:
        cells = [cell(mech, n, p, keys, seeds) for p in ps]
        print(f"{n:>5} " + " ".join(f"{kb:8.1f} {a:6.1f}/{u:6.1f}  " for kb, a, u in cells))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--key-bits", type=int, default=int(os.environ.get("PPS_KEY_BITS", "512")))
    args = ap.parse_args()
    keys = keygen(args.key_bits, random.Random("comm-tables"))
    print(f"{args.key_bits}-bit keys, {args.seeds} seeds per cell")
    table("PPS-SUA", "sua", [8, 12, 16, 20], [2, 4, 6], "k", keys, args.seeds)
    table("PPS-MUA", "mua", [6, 12, 24, 48], [2, 4, 6], "m", keys, args.seeds)
    table("PPS-EMUA", "emua", [6, 12, 24, 48], [2, 4, 6], "m", keys, args.seeds)


if __name__ == "__main__":
    main()
