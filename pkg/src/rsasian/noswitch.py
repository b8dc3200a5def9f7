"""Constant-coefficient building blocks: the no-jump floating call, fixed-strike legs,
the symmetry transform, Black-Scholes and the vanilla-plus-Asian upper bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .model import OptionSpec, RegimeModel
from .yor import DEFAULT_QUADRATURE, PsiParams, QuadratureConfig, psi_nodes

GOLDEN = (math.sqrt(5) - 1) / 2


def kink_expectation(sigma, log_drift, x, a, dt, c0, c1, c_inc, cfg: QuadratureConfig = DEFAULT_QUADRATURE):
    """``E[(c0 + c1 exp(Z) + c_inc (A - a))^+]`` for one constant-coefficient segment.

    ``Z`` is the log-return over ``dt`` and ``A`` the running integral started at ``a``
    with spot ``x``; ``log_drift`` is the drift of ``log X``.  ``c0`` and ``c1`` may be arrays.
    """
    c0, c1 = np.broadcast_arrays(np.asarray(c0, dtype=float), np.asarray(c1, dtype=float))
    if dt <= 0:
        return np.maximum(c0 + c1, 0.0)
    params = PsiParams(0, math.log(x), a, dt, sigma, log_drift)
    return psi_nodes(params, cfg).expected_positive_part(c0, c1, c_inc)


def expected_average_integral(r: float, delta: float, tau: float, x: float, a: float = 0.0) -> float:
    """``E[A_T] = a + x (e^{(r-delta) tau} - 1) / (r - delta)``, with the ``r = delta`` limit."""
    g = r - delta
    if abs(g * tau) < 1e-12:
        return a + x * tau * (1 + 0.5 * g * tau)
    return a + x * math.expm1(g * tau) / g


def c0_floating(model: RegimeModel, spec: OptionSpec, i: int, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Floating-strike call conditional on regime ``i`` holding on ``[s, T]``."""
    r = float(model.r[i])
    tau, win = spec.tau, spec.window
    if tau == 0:
        return max(spec.x - spec.a / win, 0.0)
    v = kink_expectation(model.sigma[i], model.nu(i), spec.x, spec.a, tau, -spec.a / win, spec.x, -1 / win, cfg)
    return float(math.exp(-r * tau) * v)


def _fixed_ns(model, i, s, T, t0, x, a, K, sign, cfg):
    if not K > 0:
        raise ValueError("strike must be positive")
    r = float(model.r[i])
    tau, win = T - s, T - t0
    c0 = sign * (K - a / win)
    if tau == 0:
        return max(c0, 0.0)
    v = kink_expectation(model.sigma[i], model.nu(i), x, a, tau, c0, 0.0, -sign / win, cfg)
    return float(math.exp(-r * tau) * v)


def fixed_put_ns(model, i, s, T, t0, x, a, K, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Fixed-strike Asian put with regime ``i`` frozen on ``[s, T]``."""
    return _fixed_ns(model, i, s, T, t0, x, a, K, 1.0, cfg)


def fixed_call_ns(model, i, s, T, t0, x, a, K, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Fixed-strike Asian call with regime ``i`` frozen on ``[s, T]``."""
    return _fixed_ns(model, i, s, T, t0, x, a, K, -1.0, cfg)


def fixed_parity_gap(model, i, s, T, t0, x, a, K) -> float:
    """Closed-form ``call - put`` for constant coefficients."""
    r = float(model.r[i])
    mean_a = expected_average_integral(r, model.delta, T - s, x, a)
    return math.exp(-r * (T - s)) * (mean_a / (T - t0) - K)


@dataclass(frozen=True)
class SymmetrySpec:
    """Parameters of the equivalent generalized starting option under the transformed measure.

    Payoff ``(x - lam X*_T - beta/(T-s) int_s^T X*_u du)^+`` discounted at ``discount``;
    ``X*`` is a GBM with drift ``drift`` and volatility ``sigma`` started at ``x``.
    """

    lam: float
    beta: float
    x: float
    tau: float
    drift: float
    sigma: float
    discount: float

    @property
    def log_drift(self) -> float:
        return self.drift - 0.5 * self.sigma**2

    @property
    def starting(self) -> bool:
        return self.lam == 0 and self.beta == 1

    def describe(self) -> str:
        if self.starting:
            return f"fixed-strike put on A*/{self.tau:g} with strike {self.x:g}, X* drift {self.drift:g}"
        return (
            f"(x - {self.lam:g} X*_T - {self.beta:g} mean(X*))^+ with x={self.x:g}, "
            f"X* drift {self.drift:g}, vol {self.sigma:g}, discount {self.discount:g}"
        )


def symmetry_transform(model: RegimeModel, spec: OptionSpec, i: int) -> SymmetrySpec:
    lam = spec.a / (spec.x * spec.window)
    beta = spec.tau / spec.window
    return SymmetrySpec(
        lam, beta, spec.x, spec.tau, model.delta - float(model.r[i]), float(model.sigma[i]), model.delta
    )


def transformed_price(sym: SymmetrySpec, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Price of the generalized option of :class:`SymmetrySpec` by density integration."""
    if sym.tau == 0:
        return max(sym.x * (1 - sym.lam), 0.0)
    v = kink_expectation(
        sym.sigma, sym.log_drift, sym.x, 0.0, sym.tau, sym.x, -sym.lam * sym.x, -sym.beta / sym.tau, cfg
    )
    return float(math.exp(-sym.discount * sym.tau) * v)


def bs_european_call(r, sigma, delta, s, T, x, K) -> float:
    """Black-Scholes call with continuous dividend yield."""
    tau = T - s
    if not K > 0:
        return x * math.exp(-delta * tau)
    fwd = x * math.exp((r - delta) * tau)
    disc = math.exp(-r * tau)
    vol = sigma * math.sqrt(tau)
    if vol < 1e-12:
        return disc * max(fwd - K, 0.0)
    d1 = (math.log(fwd / K) + 0.5 * vol * vol) / vol
    return disc * (fwd * ndtr(d1) - K * ndtr(d1 - vol))


@dataclass(frozen=True)
class HendersonBound:
    value: float
    alpha: float
    european: float
    asian: float
    grid_value: float
    grid_alpha: float


def henderson_upper_bound(
    model: RegimeModel,
    spec: OptionSpec,
    i: int,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    iterations: int = 40,
    grid: int = 201,
) -> HendersonBound:
    """Minimize the vanilla-plus-starting-Asian bound over ``alpha`` in ``[0, 1]``.

    The European leg is ``(1 - alpha)`` calls struck at ``a / ((1 - alpha)(T - t0))``; the
    Asian leg is ``beta`` starting floating calls on ``alpha/beta X_T``, priced as a fixed
    put under the transformed dynamics.  Golden-section search is cross-checked on a grid.
    """
    r, sig = float(model.r[i]), float(model.sigma[i])
    x, a, tau, win = spec.x, spec.a, spec.tau, spec.window
    beta = tau / win
    if tau == 0:
        v = max(x - a / win, 0.0)
        return HendersonBound(v, 0.0, v, 0.0, v, 0.0)
    disc = math.exp(-model.delta * tau)
    star_drift = model.delta - r - 0.5 * sig * sig
    nodes = psi_nodes(PsiParams(0, math.log(x), 0.0, tau, sig, star_drift), cfg)

    def terms(alpha):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        eu = np.array(
            [
                0.0 if al >= 1 else (1 - al) * bs_european_call(r, sig, model.delta, spec.s, spec.T, x, a / ((1 - al) * win))
                for al in alpha
            ]
        )
        put = nodes.expected_positive_part(alpha / beta * x, np.zeros_like(alpha), -1 / tau)
        return eu, beta * disc * put

    def total(alpha):
        eu, asian = terms(alpha)
        return eu + asian

    lo, hi = 0.0, 1.0
    c, d = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    fc, fd = total(c)[0], total(d)[0]
    for _ in range(iterations):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = total(c)[0]
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = total(d)[0]
    cands = np.array([lo, hi, 0.5 * (lo + hi), 0.0, 1.0])
    vals = total(cands)
    k = int(np.argmin(vals))
    alphas = np.linspace(0, 1, grid)
    gvals = total(alphas)
    g = int(np.argmin(gvals))
    alpha = cands[k]
    if gvals[g] < vals[k]:
        # golden section landed in a worse basin; keep the grid point
        alpha = alphas[g]
    eu, asian = terms(alpha)
    return HendersonBound(float(eu[0] + asian[0]), float(alpha), float(eu[0]), float(asian[0]), float(gvals[g]), float(alphas[g]))
