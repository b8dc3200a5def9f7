"""Density identities on the default lattice and chi-square fits against simulation.

    python3 scripts/density_report.py [--paths 1000000]
"""

import argparse

from rsasian.checks import chi_square_psi, density_identities, report_lines
from rsasian.model import validate_model


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    model = validate_model([[-1, 1], [1, -1]], [0.05, 0.08], [0.2, 0.4], 0.02)
    recs = density_identities(model)
    points = [(0, 0.0, 0.0, 0.5), (1, 0.3, 10.0, 1.0), (0, -0.5, 0.0, 0.1), (1, 1.0, 5.0, 2.0)]
    chis = [chi_square_psi(model, i, z, a, dt, args.paths, args.seed + k) for k, (i, z, a, dt) in enumerate(points)]
    for line in report_lines(recs, chis):
        print(line)


if __name__ == "__main__":
    main()
