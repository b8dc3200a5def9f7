"""Iterative prices vs Monte Carlo on the two-regime benchmark, all three payoffs.

    python3 scripts/benchmark_compare.py [--paths 200000] [--seed 20240611]
"""

import argparse
import time

from rsasian.fixedpoint import price
from rsasian.model import OptionSpec, validate_model
from rsasian.montecarlo import mc_price


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    model = validate_model([[-1, 1], [1, -1]], [0.05, 0.08], [0.2, 0.4], 0.02)
    specs = [
        OptionSpec(0, 0, 1, 100, 0),
        OptionSpec(0, 0.4, 1, 100, 30),
        OptionSpec(0, 0, 1, 100, 0, 100, "fixed-put"),
        OptionSpec(0, 0.4, 1, 100, 30, 100, "fixed-put"),
        OptionSpec(0, 0, 1, 100, 0, 100, "fixed-call-starting"),
    ]
    print("style,s,a,regime,price,mc_mean,mc_se,z,iterations,seconds")
    for spec in specs:
        for i in range(model.m):
            t = time.perf_counter()
            res = price(model, spec, i)
            est = mc_price(model, spec, i, args.paths, args.seed)
            print(f"{spec.style},{spec.s:g},{spec.a:g},{i},{res.price:.5f},{est.mean:.5f},{est.se:.5f},"
                  f"{est.zscore(res.price):.2f},{res.iterations},{time.perf_counter() - t:.1f}", flush=True)


if __name__ == "__main__":
    main()
