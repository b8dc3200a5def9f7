"""Benchmark floating-call price under kappa / time / density-node refinement.

    python3 scripts/grid_refinement.py
"""

import time

from rsasian.fixedpoint import EngineConfig, iterate
from rsasian.model import OptionSpec, validate_model
from rsasian.yor import QuadratureConfig


def main():
    model = validate_model([[-1, 1], [1, -1]], [0.05, 0.08], [0.2, 0.4], 0.02)
    spec = OptionSpec(0, 0, 1, 100, 0)
    print("n_time,n_kappa,zeta_panels,price,iterations,seconds")
    for n_time, n_kappa, zp in [(11, 201, 8), (21, 401, 8), (41, 401, 8), (21, 801, 8), (21, 401, 16)]:
        cfg = EngineConfig(n_time=n_time, n_kappa=n_kappa, quad=QuadratureConfig(zeta_panels=zp))
        t = time.perf_counter()
        res = iterate(model, spec, 0, cfg)
        print(f"{n_time},{n_kappa},{zp},{res.price:.6f},{res.iterations},{time.perf_counter() - t:.1f}", flush=True)


if __name__ == "__main__":
    main()
