"""Contraction factor, observed and a-priori iteration counts as the dividend rate doubles.

    python3 scripts/dividend_study.py
"""

from rsasian.fixedpoint import apriori_iterations, iterate
from rsasian.model import OptionSpec, validate_model


def main():
    base = validate_model([[-1, 1], [1, -1]], [0.05, 0.08], [0.2, 0.4], 0.01)
    spec = OptionSpec(0, 0, 1, 100, 0)
    print("delta,rho,observed,a_priori,first_increment,max_ratio,price")
    for delta in (0.01, 0.02, 0.04, 0.08, 0.16):
        res = iterate(base.with_delta(delta), spec, 0)
        ratios = [r for r in res.ratios() if r == r]
        print(f"{delta:g},{res.rho:.5f},{res.iterations},{apriori_iterations(res.rho, res.first_increment, 1e-4)},"
              f"{res.first_increment:.4e},{max(ratios):.4f},{res.price:.5f}", flush=True)


if __name__ == "__main__":
    main()
