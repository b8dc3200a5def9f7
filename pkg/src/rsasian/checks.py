"""Density identities and Monte Carlo goodness-of-fit for psi."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import AccuracyError
from .model import RegimeModel
from .montecarlo import sample_psi
from .yor import DEFAULT_QUADRATURE, PsiParams, QuadratureConfig, bin_probabilities, full_argument_identities, psi_nodes

DENSITY_FORM = "half-argument with Jacobian 1/(2 sqrt t')"
ALTERNATIVE_FORM = "full-argument without Jacobian"


@dataclass(frozen=True)
class DensityRecord:
    identity: str
    point: str
    computed: float
    target: float
    tol: float
    form: str = DENSITY_FORM

    @property
    def passed(self) -> bool:
        return abs(self.computed - self.target) <= self.tol

    def row(self):
        return [self.identity, self.point, f"{self.computed:.10g}", f"{self.target:.10g}", f"{self.tol:g}",
                "PASS" if self.passed else "FAIL", self.form]


def default_lattice(model: RegimeModel):
    """``(regime, z, dt)`` points: every regime, three spots, four horizons in ``[0.05, 2]``."""
    return [(i, z, dt) for i in range(model.m) for z in (-1.0, 0.0, 1.5) for dt in (0.05, 0.5, 1.0, 2.0)]


def density_identities(model: RegimeModel, lattice=None, cfg: QuadratureConfig = DEFAULT_QUADRATURE, tol: float = 1e-4,
                       a: float = 0.0, include_alternative: bool = True):
    records = []
    for i, z, dt in lattice or default_lattice(model):
        p = PsiParams.from_model(model, i, z, a, dt)
        point = f"i={i} z={z:g} dt={dt:g}"
        try:
            nodes = psi_nodes(p, cfg)
            ids = nodes.identities()
        except AccuracyError as exc:
            records.append(DensityRecord("mass", point, math.nan, 1.0, tol, f"{DENSITY_FORM}: {exc}"))
            continue
        for name, (value, target) in ids.items():
            records.append(DensityRecord(name, point, value, target, tol))
        if include_alternative:
            alt = full_argument_identities(p, cfg)
            records.append(DensityRecord("mass", point, alt["mass"], 1.0, tol, ALTERNATIVE_FORM))
    return records


@dataclass(frozen=True)
class ChiSquareResult:
    point: str
    statistic: float
    dof: int
    pvalue: float
    n: int
    level: float = 0.01

    @property
    def passed(self) -> bool:
        return self.pvalue > self.level


def chi_square_psi(model: RegimeModel, i: int, z: float, a: float, dt: float, N: int = 1_000_000, seed: int = 0,
                   cfg: QuadratureConfig = DEFAULT_QUADRATURE, bins: int = 10, substeps: int = 512,
                   level: float = 0.01, min_expected: float = 5.0) -> ChiSquareResult:
    """Binned chi-square of ``N`` simulated ``(Z_t, A_t)`` draws against psi.

    ``Z`` edges are exact normal quantiles; ``A`` edges are quantiles of an independent
    pilot sample.  Cells with small expected counts are pooled.
    """
    sig, nu = float(model.sigma[i]), model.nu(i)
    qs = np.linspace(0, 1, bins + 1)[1:-1]
    z_edges = np.concatenate([[-np.inf], nu * dt + sig * math.sqrt(dt) * stats.norm.ppf(qs), [np.inf]])
    _, pilot = sample_psi(model, i, z, a, dt, 20_000, seed + 7919, substeps)
    a_edges = np.concatenate([[a], np.quantile(pilot, qs), [np.inf]])
    zs, As = sample_psi(model, i, z, a, dt, N, seed, substeps)
    counts, _, _ = np.histogram2d(zs, As, bins=[z_edges, a_edges])
    probs = bin_probabilities(PsiParams.from_model(model, i, z, a, dt), z_edges, a_edges, cfg)
    expected = probs.ravel() / probs.sum() * N
    obs = counts.ravel()
    small = expected < min_expected
    e = np.append(expected[~small], expected[small].sum())
    o = np.append(obs[~small], obs[small].sum())
    keep = e > 0
    stat = float(((o[keep] - e[keep]) ** 2 / e[keep]).sum())
    dof = int(keep.sum()) - 1
    return ChiSquareResult(f"i={i} z={z:g} a={a:g} dt={dt:g}", stat, dof, float(stats.chi2.sf(stat, dof)), N, level)


def report_lines(records, chis=()):
    head = "identity,point,computed,target,tol,result,form"
    lines = [head] + [",".join(r.row()) for r in records]
    for c in chis:
        lines.append(f"chi-square,{c.point},{c.statistic:.4g},dof={c.dof},p={c.pvalue:.4g},{'PASS' if c.passed else 'FAIL'},{DENSITY_FORM}")
    return lines
