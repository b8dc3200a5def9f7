"""Command-line front end.

    rsasian price --config run.cfg [--epsilon F] [--out DIR]
    rsasian oracle --config run.cfg [--seed N] [--paths N]
    rsasian compare --config run.cfg
    rsasian density-check --config run.cfg
    rsasian converge-report --config run.cfg

Each command prints a summary and appends records to ``<out>/<command>.csv``.
Exit codes: 0 success, 1 numerical failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

from .checks import DENSITY_FORM, chi_square_psi, density_identities, report_lines
from .config import RunConfig, load
from .errors import ConfigError, ModelError, NumericalError, SpecError
from .fixedpoint import apriori_iterations, price
from .montecarlo import mc_price

HEADERS = {
    "price": ["style", "regime", "price", "iterations", "increment", "rho", "bound", "price_bound", "fallback_nodes"],
    "oracle": ["payoff", "N", "seed", "mean", "se"],
    "compare": ["style", "regime", "price", "mc_mean", "mc_se", "z", "price_bound", "result"],
    "density-check": ["identity", "point", "computed", "target", "tol", "result", "form"],
    "converge-report": ["n", "increment", "ratio", "wall_time"],
}


def _append(out_dir, command, rows):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{command}.csv")
    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(HEADERS[command])
        w.writerows(rows)
    return path


def _price(cfg: RunConfig, epsilon):
    res = price(cfg.model, cfg.option, cfg.regime, cfg.numerics.engine, epsilon)
    unit = cfg.option.x * (res.grid.scale if res.grid is not None else 1.0)
    return res, res.bound * unit


def cmd_price(cfg: RunConfig, args):
    res, pbound = _price(cfg, args.epsilon)
    print(f"style            {cfg.option.style}")
    print(f"regime           {cfg.regime}")
    print(f"price            {res.price:.8f}")
    print(f"iterations       {res.iterations}")
    print(f"rho              {res.rho:.6f}")
    print(f"a-posteriori     {res.bound:.3e} (scaled), {pbound:.3e} (price)")
    if not res.F_active:
        print("F inactive: no switching, price is the no-switch value")
    if res.fallback_nodes:
        print(f"note: {res.fallback_nodes} density node sets used the sampled small-t' fallback")
    _append(args.out, "price", [[cfg.option.style, cfg.regime, f"{res.price:.10g}", res.iterations, f"{res.increment:.4e}",
                                 f"{res.rho:.8g}", f"{res.bound:.4e}", f"{pbound:.4e}", res.fallback_nodes]])
    return 0


def _oracle(cfg: RunConfig, args):
    n = args.paths or cfg.numerics.paths
    seed = cfg.numerics.seed if args.seed is None else args.seed
    return mc_price(cfg.model, cfg.option, cfg.regime, n, seed, substeps=cfg.numerics.substeps,
                    antithetic=cfg.numerics.antithetic)


def cmd_oracle(cfg: RunConfig, args):
    est = _oracle(cfg, args)
    print(f"{est.label}: {est.mean:.8f} +- {est.se:.8f} (N={est.n}, seed={est.seed})")
    _append(args.out, "oracle", [[est.label, est.n, est.seed, f"{est.mean:.10g}", f"{est.se:.6g}"]])
    return 0


def cmd_compare(cfg: RunConfig, args):
    res, pbound = _price(cfg, args.epsilon)
    est = _oracle(cfg, args)
    gap = abs(res.price - est.mean)
    ok = gap <= 3 * est.se + pbound
    z = gap / est.se if est.se > 0 else (0.0 if gap == 0 else math.inf)
    print(f"iterative  {res.price:.6f}  (bound {pbound:.2e})")
    print(f"oracle     {est.mean:.6f} +- {est.se:.6f}")
    print(f"|diff|/SE  {z:.3f}  -> {'PASS' if ok else 'FAIL'}")
    if not ok:
        print("hint: refine n_kappa / n_time and rerun; a gap that shrinks with refinement is discretization error")
    _append(args.out, "compare", [[cfg.option.style, cfg.regime, f"{res.price:.10g}", f"{est.mean:.10g}", f"{est.se:.6g}",
                                   f"{z:.4f}", f"{pbound:.4e}", "PASS" if ok else "FAIL"]])
    return 0


def cmd_density_check(cfg: RunConfig, args):
    quad = cfg.numerics.engine.quad
    recs = density_identities(cfg.model, cfg=quad)
    n = args.paths or cfg.numerics.chi_paths
    seed = cfg.numerics.seed if args.seed is None else args.seed
    points = [(0, 0.0, 0.0, 0.5), (cfg.model.m - 1, 0.3, 10.0, 1.0), (0, -0.5, 0.0, 0.1)]
    chis = [chi_square_psi(cfg.model, i, z, a, dt, n, seed + k, quad) for k, (i, z, a, dt) in enumerate(points)]
    lines = report_lines(recs, chis)
    for line in lines:
        print(line)
    mine = [r for r in recs if r.form == DENSITY_FORM]
    ok = all(r.passed for r in mine) and all(c.passed for c in chis)
    alt_ok = all(r.passed for r in recs if r.form != DENSITY_FORM)
    print(f"accepted form: {DENSITY_FORM}" if ok else "derived form FAILED")
    print(f"alternative form normalization: {'PASS' if alt_ok else 'FAIL'}")
    _append(args.out, "density-check", [r.row() for r in recs] + [
        ["chi-square", c.point, f"{c.statistic:.6g}", f"dof={c.dof}", f"p>{c.level}", "PASS" if c.passed else "FAIL", DENSITY_FORM]
        for c in chis
    ])
    return 0 if ok else 1


def cmd_converge_report(cfg: RunConfig, args):
    res, _ = _price(cfg, args.epsilon)
    eps = args.epsilon or cfg.numerics.engine.epsilon
    print(f"rho = {res.rho:.6f}, a-priori iterations = {apriori_iterations(res.rho, res.first_increment, eps)}, "
          f"observed = {res.iterations}")
    print("n,increment,ratio,wall_time")
    rows = []
    for rec in res.trace:
        row = [rec.n, f"{rec.increment:.6e}", f"{rec.ratio:.6f}", f"{rec.wall_time:.3f}"]
        print(",".join(map(str, row)))
        rows.append(row)
    _append(args.out, "converge-report", rows)
    return 0


COMMANDS = {
    "price": cmd_price,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "density-check": cmd_density_check,
    "converge-report": cmd_converge_report,
}


def parser():
    p = argparse.ArgumentParser(prog="rsasian", description="Asian options under regime-switching GBM")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        cfg = load(args.config)
        if args.epsilon is not None and not args.epsilon > 0:
            raise ConfigError("--epsilon must be positive")
        if args.paths is not None and args.paths < 2:
            raise ConfigError("--paths must be >= 2")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ModelError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
