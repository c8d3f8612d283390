#!/usr/bin/env python3
"""Social-efficiency ratio against the exact optimum, averaged over seeds.

    python scripts/ratio_sweep.py --seeds 100 -o ratios.csv

SUA rows sweep n x k on an 8x8 area; MUA/EMUA rows sweep n x m on 6x6.
Both areas are fixed so density grows with n.
"""
import argparse
import csv
import sys
from statistics import mean

from ppsauction.alloc_mua import brute_force_mua, emua_allocate
from ppsauction.alloc_sua import brute_force_mwis, ptas_allocate
from ppsauction.model import ScenarioConfig, generate_scenario


def ratio(w, opt):
    return w / opt if opt else 1.0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--sua-n", default="8,12,16,20")
    ap.add_argument("--sua-k", default="2,4,6")
    ap.add_argument("--mua-n", default="6,9,12")
    ap.add_argument("--mua-m", default="2,4")
    ap.add_argument("-o", "--out", default=None)
    args = ap.parse_args(argv)
    ints = lambda s: [int(x) for x in s.split(",")]

    rows = []
    for k in ints(args.sua_k):
        for n in ints(args.sua_n):
            rs = []
            for seed in range(args.seeds):
                sc = generate_scenario(ScenarioConfig(n=n, area=(8, 8), model_kind="sua", seed=seed))
                rs.append(ratio(ptas_allocate(sc, k).allocation.weight, brute_force_mwis(sc).weight))
            rows.append({"mechanism": "SUA", "n": n, "k": k, "m": 1, "ratio": mean(rs), "min_ratio": min(rs)})
    for m in ints(args.mua_m):
        for n in ints(args.mua_n):
            base, ext = [], []
            for seed in range(args.seeds):
                sc = generate_scenario(ScenarioConfig(n=n, area=(6, 6), m=m, seed=seed))
                opt = brute_force_mua(sc)
                fill = emua_allocate(sc)
                base.append(ratio(fill.base.weight, opt))
                ext.append(ratio(fill.final.weight, opt))
            rows.append({"mechanism": "MUA", "n": n, "k": "", "m": m, "ratio": mean(base), "min_ratio": min(base)})
            rows.append({"mechanism": "EMUA", "n": n, "k": "", "m": m, "ratio": mean(ext), "min_ratio": min(ext)})

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
