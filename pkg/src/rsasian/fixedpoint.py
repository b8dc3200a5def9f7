"""Successive approximations for the regime-switching Asian price.

Prices are homogeneous of degree one in ``(x, a, K)``, so the scaled value function
``g = price / x`` depends on ``(z, a)`` only through one reduced coordinate ``kappa``:
``a / x`` for the floating call and ``(K - a/(T - t0)) / x`` for fixed strikes.  Over a
sojourn with log-return ``Z`` and scaled increment ``D = (A_t - a)/x`` it moves to
``kappa' = (kappa + b D) exp(-Z)`` with ``b = 1`` (floating) or ``b = -1/(T - t0)``.
The grid therefore lives on ``(t, kappa)`` per regime, and the operator is

    F(H)(t_k, kappa, i) = sum_{j != i} q_ij int e^{-(q_i + r_i) u} E[e^Z H(t_k + u, kappa', j)] du.

For one time lag the inner expectation is a fixed matrix acting on a grid slice, which is
cached per (regime, lag).  The outer integral weights the exact exponential against
piecewise-linear interpolation of the remaining factor in ``u``.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MaxIterations, SpecError
from .model import OptionSpec, RegimeModel, contraction_factor, overall_rho
from .yor import DEFAULT_QUADRATURE, PsiParams, QuadratureConfig, psi_nodes

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineConfig:
    n_time: int = 21
    n_kappa: int = 401
    kappa_sd: float = 7.0
    cluster: float = 0.3
    epsilon: float = 1e-4
    max_iter: int = 200
    quad: QuadratureConfig = DEFAULT_QUADRATURE
    clamp_fail_fraction: float = 0.05

    def __post_init__(self):
        if self.n_time < 2 or self.n_kappa < 5:
            raise ValueError("grid needs at least 2 time and 5 kappa nodes")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


DEFAULT_ENGINE = EngineConfig()


def n_bound(model: RegimeModel, T: float, t0: float) -> float:
    """Moment bound ``n(T)`` with ``E[max X] <= x n(T)`` for the starting fixed call."""
    return 2.0 * math.exp((float(model.r.max()) - model.delta + 0.5 * float((model.sigma**2).max())) * (T - t0))


# ---------------------------------------------------------------------------
# grid function
# ---------------------------------------------------------------------------


@dataclass
class GridFunction:
    """Scaled value ``g(t, kappa, i)`` on a rectilinear ``(t, kappa)`` grid per regime.

    ``values[k, l, i]``.  ``scale`` converts back to price per unit spot (``n(T)`` for
    the fixed call, 1 otherwise).  Outside the kappa range the style's tail policy applies.
    """

    times: np.ndarray
    kappa: np.ndarray
    values: np.ndarray
    style: str
    window: float
    K: float | None = None
    scale: float = 1.0
    terminal_payoff: bool = True
    fallback_nodes: int = 0

    @property
    def m(self) -> int:
        return self.values.shape[2]

    def like(self, values, terminal_payoff=None) -> "GridFunction":
        tp = self.terminal_payoff if terminal_payoff is None else terminal_payoff
        return replace(self, values=values, terminal_payoff=tp)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _interp_kappa(self, slice_, kappa):
        kap = self.kappa
        kappa = np.asarray(kappa, dtype=float)
        p = np.clip(np.searchsorted(kap, kappa) - 1, 0, len(kap) - 2)
        f = (kappa - kap[p]) / (kap[p + 1] - kap[p])
        val = slice_[..., p] * (1 - f) + slice_[..., p + 1] * f
        high = kappa > kap[-1]
        if self.style == "floating-call":
            val = np.where(high, 0.0, val)
        elif self.style == "fixed-put":
            val = np.where(kappa < 0, 0.0, val)
        else:
            val = np.where(high, 0.0, val)
        return val

    def __call__(self, t, kappa, i):
        """Bilinear interpolation in ``(t, kappa)``."""
        tk = self.times
        k = int(np.clip(np.searchsorted(tk, t) - 1, 0, len(tk) - 2))
        f = (t - tk[k]) / (tk[k + 1] - tk[k])
        v0 = self._interp_kappa(self.values[k, :, i], kappa)
        v1 = self._interp_kappa(self.values[k + 1, :, i], kappa)
        return (1 - f) * v0 + f * v1

    def kappa_of(self, z, a):
        x = np.exp(np.asarray(z, dtype=float))
        if self.style == "floating-call":
            return np.asarray(a) / x
        return (self.K - np.asarray(a) / self.window) / x

    def evaluate_za(self, t, z, a, i):
        """``g(t, z, a, i) = e^{-z} price(t, e^z, a, i)`` in the original coordinates."""
        return self(t, self.kappa_of(z, a), i) * self.scale


@dataclass(frozen=True)
class TraceRecord:
    n: int
    increment: float
    ratio: float
    wall_time: float


@dataclass
class PriceResult:
    price: float
    iterations: int
    increment: float
    bound: float
    rho: float
    style: str = "floating-call"
    regime: int = 0
    trace: list = field(default_factory=list)
    clamps: int = 0
    fallback_nodes: int = 0
    first_increment: float = 0.0
    grid: GridFunction | None = field(default=None, repr=False)
    regime_prices: np.ndarray | None = field(default=None, repr=False)

    @property
    def F_active(self) -> bool:
        return self.rho > 0

    def ratios(self):
        return [rec.ratio for rec in self.trace[1:]]


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


def _style_b(style, window):
    return 1.0 if style == "floating-call" else -1.0 / window


def kappa_grid(model: RegimeModel, spec: OptionSpec, cfg: EngineConfig) -> np.ndarray:
    tau, win = spec.tau, spec.window
    nu_max = float(np.max(np.abs(model.r - model.delta - 0.5 * model.sigma**2)))
    spread = math.exp(nu_max * tau + cfg.kappa_sd * float(model.sigma.max()) * math.sqrt(tau))
    k0 = spec.reduced_coordinate()
    if spec.style == "floating-call":
        lo, hi, center, width = 0.0, max(win * spread, 1.2 * k0), 0.75 * win, cfg.cluster * win
    else:
        reach = tau / win
        hi = max(reach * spread, 1.2 * k0)
        lo = 0.0 if spec.style == "fixed-put" else -0.5 * reach
        center, width = 0.75 * reach, cfg.cluster * max(reach, 1e-3)
    u = np.linspace(math.asinh((lo - center) / width), math.asinh((hi - center) / width), cfg.n_kappa)
    kap = center + width * np.sinh(u)
    kap[0], kap[-1] = lo, hi
    j = int(np.argmin(np.abs(kap - k0)))
    if 0 < j < len(kap) - 1:
        kap[j] = k0
    elif k0 < kap[0] or k0 > kap[-1] or (k0 != kap[j]):
        kap = np.unique(np.append(kap, k0))
    return kap


def _hat_pieces(lam: float, h: float):
    """``(I_left, I_right)`` for ``int_0^h e^{-lam u} (h-u)/h du`` and ``... u/h du``."""
    x = lam * h
    if abs(x) < 1e-3:
        right = h * (0.5 - x / 3 + x * x / 8 - x**3 / 30)
        left = h * (0.5 - x / 6 + x * x / 24 - x**3 / 120)
    else:
        em = math.exp(-x)
        right = h * (1 - em * (1 + x)) / (x * x)
        left = h * (x - 1 + em) / (x * x)
    return left, right


def lag_weights(lam: float, h: float, n_lags: int) -> np.ndarray:
    """``W[e, d]``: weight of lag ``d`` when integrating over ``[0, e h]``, ``e = 0..n_lags``."""
    left, right = _hat_pieces(lam, h)
    W = np.zeros((n_lags + 1, n_lags + 1))
    for e in range(1, n_lags + 1):
        d = np.arange(e)
        W[e, :e] += np.exp(-lam * d * h) * left
        W[e, 1 : e + 1] += np.exp(-lam * d * h) * right
    return W


class Discretization:
    """Per-(regime, lag) transfer matrices and exact terminal expectations for one spec."""

    def __init__(self, model: RegimeModel, spec: OptionSpec, cfg: EngineConfig = DEFAULT_ENGINE, scale: float = 1.0):
        self.model, self.spec, self.cfg, self.scale = model, spec, cfg, scale
        self.times = np.linspace(spec.s, spec.T, cfg.n_time)
        self.h = self.times[1] - self.times[0]
        self.kappa = kappa_grid(model, spec, cfg)
        self.b = _style_b(spec.style, spec.window)
        self.style = spec.style
        self.K = len(self.times) - 1
        self._mats = {}
        self.fallback_nodes = 0
        # terminal expectations E[e^Z payoff(kappa')] per regime and lag, shape (m, K+1, n_kappa)
        self.terminal = np.zeros((model.m, self.K + 1, len(self.kappa)))
        for i in range(model.m):
            self.terminal[i, 0] = self.payoff(self.kappa)
            for d in range(1, self.K + 1):
                self.terminal[i, d] = self._terminal_expectation(i, d)

    def payoff(self, kappa):
        win = self.spec.window
        if self.style == "floating-call":
            v = np.maximum(1 - kappa / win, 0.0)
        elif self.style == "fixed-put":
            v = np.maximum(kappa, 0.0)
        else:
            v = np.maximum(-kappa, 0.0)
        return v / self.scale

    def nodes(self, i, d):
        p = PsiParams(i, 0.0, 0.0, d * self.h, float(self.model.sigma[i]), self.model.nu(i))
        n = psi_nodes(p, self.cfg.quad)
        return n

    def _terminal_expectation(self, i, d):
        n = self.nodes(i, d)
        if n.fallback:
            self.fallback_nodes += 1
        win, kap = self.spec.window, self.kappa
        if self.style == "floating-call":
            v = n.expected_positive_part(-kap / win, np.ones_like(kap), -1 / win)
        elif self.style == "fixed-put":
            v = n.expected_positive_part(kap, np.zeros_like(kap), -1 / win)
        else:
            v = n.expected_positive_part(-kap, np.zeros_like(kap), 1 / win)
        return v / self.scale

    def matrix(self, i, d):
        """``M[l, l']`` with ``(M @ H)[l] ~= E[e^Z H(kappa'(kappa_l))]`` under the lag-``d`` density."""
        key = (i, d)
        if key in self._mats:
            return self._mats[key]
        kap = self.kappa
        nk = len(kap)
        if d == 0:
            M = np.eye(nk)
        else:
            n = self.nodes(i, d)
            ez = np.exp(n.z_prime)
            w = n.weights * ez
            kp = (kap[:, None] + self.b * n.increment[None, :]) / ez[None, :]
            p = np.clip(np.searchsorted(kap, kp) - 1, 0, nk - 2)
            f = (kp - kap[p]) / (kap[p + 1] - kap[p])
            if self.style == "floating-call":
                live = kp <= kap[-1]
            elif self.style == "fixed-put":
                live = kp >= 0
            else:
                live = kp <= kap[-1]
            wt = np.where(live, w[None, :], 0.0)
            rows = np.broadcast_to(np.arange(nk)[:, None] * nk, kp.shape)
            M = np.bincount((rows + p).ravel(), (wt * (1 - f)).ravel(), nk * nk)
            M += np.bincount((rows + p + 1).ravel(), (wt * f).ravel(), nk * nk)
            M = M.reshape(nk, nk)
        self._mats[key] = M
        return M


# ---------------------------------------------------------------------------
# operator and iteration
# ---------------------------------------------------------------------------


def build_g0(model: RegimeModel, spec: OptionSpec, cfg: EngineConfig = DEFAULT_ENGINE, disc: Discretization | None = None, scale: float = 1.0) -> GridFunction:
    """``g_0 = e^{-q_i (T - t)} g^0`` on the grid; ``g^0`` is the no-switch scaled price."""
    disc = disc or Discretization(model, spec, cfg, scale)
    K = disc.K
    tau = disc.times[-1] - disc.times
    vals = np.empty((K + 1, len(disc.kappa), model.m))
    for i in range(model.m):
        lags = K - np.arange(K + 1)
        g0 = np.exp(-float(model.r[i]) * tau)[:, None] * disc.terminal[i, lags]
        vals[:, :, i] = np.exp(-float(model.q[i]) * tau)[:, None] * g0
    return GridFunction(disc.times, disc.kappa, vals, spec.style, spec.window, spec.K, disc.scale, True, disc.fallback_nodes)


def apply_F(h: GridFunction, model: RegimeModel, disc: Discretization) -> GridFunction:
    """One application of the switching operator (without clamping)."""
    K, m = disc.K, model.m
    out = np.zeros_like(h.values)
    for i in range(m):
        targets = [j for j in range(m) if j != i and model.Q[i, j] > 0]
        if not targets:
            continue
        S = sum(model.Q[i, j] * h.values[:, :, j] for j in targets)  # (K+1, nk)
        rate = float(model.q[i]) + model.delta
        W = lag_weights(rate, disc.h, K)
        growth = float(model.r[i]) - model.delta
        for d in range(K + 1):
            # slices k = 0..K-d see lag d at time k+d
            if d == 0:
                Y = S[: K + 1].copy()
            else:
                Y = S[d:] @ disc.matrix(i, d).T
            if h.terminal_payoff:
                # the slice at T is the payoff: use its exact expectation
                Y[-1] = disc.terminal[i, d] * sum(model.Q[i, j] for j in targets)
            ks = np.arange(K + 1 - d)
            wk = W[K - ks, d] * math.exp(-growth * d * disc.h)
            out[: K + 1 - d, :, i] += wk[:, None] * Y
    return h.like(out, terminal_payoff=False)


def _clamp(style, values):
    hi = 1.0 if style in ("floating-call", "fixed-call-starting") else np.inf
    bad = int(np.count_nonzero((values < -1e-12) | (values > hi + 1e-12)))
    return np.clip(values, 0.0, hi), bad


def _iterate(model, spec, cfg, disc, i, g0_shift=0.0, epsilon=None):
    eps = cfg.epsilon if epsilon is None else epsilon
    g0 = build_g0(model, spec, cfg, disc, disc.scale)
    if g0_shift:
        g0 = g0.like(g0.values + g0_shift)
    rho = overall_rho(model, spec.s, spec.T)
    g = g0
    trace = []
    clamps = 0
    start = _time.perf_counter()
    prev = None
    first = 0.0
    for n in range(1, cfg.max_iter + 1):
        Fg = apply_F(g, model, disc)
        new_vals, bad = _clamp(spec.style, Fg.values + g0.values)
        clamps += bad
        inc = float(np.max(np.abs(new_vals - g.values)))
        if n == 1:
            first = inc
        ratio = inc / prev if prev else float("nan")
        trace.append(TraceRecord(n, inc, ratio, _time.perf_counter() - start))
        log.debug("iteration %d increment %.3e ratio %.3f", n, inc, ratio)
        g = g0.like(new_vals, terminal_payoff=True)
        prev = inc
        if inc < eps:
            break
    else:
        raise MaxIterations(f"no convergence after {cfg.max_iter} iterations (last increment {inc:.3e})")
    if clamps > cfg.clamp_fail_fraction * g.values.size * max(1, len(trace)):
        log.warning("frequent clamping: %d events", clamps)
    k0 = spec.reduced_coordinate()
    per_regime = np.array([float(g(spec.s, k0, j)) for j in range(model.m)]) * disc.scale * spec.x
    bound = rho * inc / (1 - rho) if rho < 1 else math.inf
    return PriceResult(
        float(per_regime[i]), len(trace), inc, bound, rho, spec.style, i, trace, clamps,
        disc.fallback_nodes, first, g, per_regime,
    )


def iterate(model: RegimeModel, spec: OptionSpec, i: int, cfg: EngineConfig = DEFAULT_ENGINE, epsilon: float | None = None, g0_shift: float = 0.0) -> PriceResult:
    """Successive approximations ``g_{n+1} = F(g_n) + g_0`` until the sup increment drops below ``epsilon``."""
    if spec.style != "floating-call":
        raise SpecError("iterate prices floating calls; use price_fixed_put / price_fixed_call_starting")
    if spec.tau == 0:
        return _terminal_result(model, spec, i, max(spec.x - spec.a / spec.window, 0.0))
    disc = Discretization(model, spec, cfg)
    return _iterate(model, spec, cfg, disc, i, g0_shift, epsilon)


def _terminal_result(model, spec, i, price):
    return PriceResult(price, 1, 0.0, 0.0, 0.0, spec.style, i, [TraceRecord(1, 0.0, float("nan"), 0.0)],
                       regime_prices=np.full(model.m, price))


def price_fixed_put(model: RegimeModel, spec: OptionSpec, i: int, cfg: EngineConfig = DEFAULT_ENGINE, epsilon: float | None = None) -> PriceResult:
    """Fixed-strike put; iterates on ``P / x`` as a function of ``(K - a/(T-t0)) / x``."""
    if spec.style != "fixed-put":
        spec = replace(spec, style="fixed-put")
    if spec.tau == 0:
        return _terminal_result(model, spec, i, max(spec.K - spec.a / spec.window, 0.0))
    disc = Discretization(model, spec, cfg)
    return _iterate(model, spec, cfg, disc, i, 0.0, epsilon)


def price_fixed_call_starting(model: RegimeModel, spec: OptionSpec, i: int, cfg: EngineConfig = DEFAULT_ENGINE, epsilon: float | None = None) -> PriceResult:
    """Starting fixed-strike call; iterates on ``g_K = e^{-z} C_K / n(T)``."""
    if spec.s > spec.t0 or spec.a > 0:
        raise SpecError("fixed-strike call must be starting (s = t0, a = 0); the in-progress map may not contract")
    if spec.style != "fixed-call-starting":
        spec = replace(spec, style="fixed-call-starting")
    disc = Discretization(model, spec, cfg, scale=n_bound(model, spec.T, spec.t0))
    return _iterate(model, spec, cfg, disc, i, 0.0, epsilon)


def price(model: RegimeModel, spec: OptionSpec, i: int, cfg: EngineConfig = DEFAULT_ENGINE, epsilon: float | None = None) -> PriceResult:
    if spec.style == "floating-call":
        return iterate(model, spec, i, cfg, epsilon)
    if spec.style == "fixed-put":
        return price_fixed_put(model, spec, i, cfg, epsilon)
    return price_fixed_call_starting(model, spec, i, cfg, epsilon)


def measured_rate(result: PriceResult):
    """Ratios ``||g_{n+1} - g_n|| / ||g_n - g_{n-1}||`` from a convergence trace."""
    return [rec.ratio for rec in result.trace[1:] if rec.increment > 0 or rec.ratio == rec.ratio]


def apriori_iterations(rho: float, first_increment: float, epsilon: float) -> int:
    """``ceil(log(eps (1 - rho) / ||g_1 - g_0||) / log rho)``; 1 when the first step already suffices."""
    if rho <= 0 or first_increment <= 0:
        return 1
    target = epsilon * (1 - rho) / first_increment
    if target >= 1:
        return 1
    return int(math.ceil(math.log(target) / math.log(rho)))


def perturbation_bound(eta: float, rho: float) -> float:
    """Fixed-point shift bound ``|eta| / (1 - rho)`` for a sup-norm perturbation of ``g_0``."""
    return abs(eta) / (1 - rho)


def regime_rho(model: RegimeModel, spec: OptionSpec):
    return [contraction_factor(model, spec.s, spec.T, i) for i in range(model.m)]
