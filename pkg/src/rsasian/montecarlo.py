"""Monte Carlo oracle: exact regime-chain simulation, exact lognormal sub-steps,
trapezoidal running integral and exact discounting.

Random numbers come from Philox streams keyed by ``(seed, block index)``; blocks have a
fixed size, so an estimate does not depend on how the work is split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import OptionSpec, RegimeModel

SUBSTEPS_PER_YEAR = 256
BLOCK = 8192


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), block]))


@dataclass(frozen=True)
class JumpSkeleton:
    """Regime path on ``[s, T]``: ``times[0] = s`` and ``states[k]`` holds on ``[times[k], times[k+1])``."""

    times: np.ndarray
    states: np.ndarray
    T: float

    @property
    def jumps(self) -> int:
        return len(self.times) - 1


def simulate_chain(model: RegimeModel, i: int, s: float, T: float, rng: np.random.Generator) -> JumpSkeleton:
    times, states = [s], [i]
    t, k = s, i
    while True:
        qk = float(model.q[k])
        if qk <= 0:
            break
        t += rng.exponential(1 / qk)
        if t >= T:
            break
        p = model.Q[k].copy()
        p[k] = 0.0
        k = int(rng.choice(model.m, p=p / qk))
        times.append(t)
        states.append(k)
    return JumpSkeleton(np.array(times), np.array(states), T)


def _chain_block(model: RegimeModel, i: int, s: float, T: float, n: int, rng):
    """Vectorized skeletons, padded with ``T`` and the last state."""
    q = model.q
    cum = np.cumsum(np.where(np.eye(model.m, dtype=bool), 0.0, model.Q), axis=1)
    times = [np.full(n, s)]
    states = [np.full(n, i)]
    t = times[0].copy()
    k = states[0].copy()
    alive = q[k] > 0
    while alive.any():
        e = rng.exponential(size=n)
        rate = q[k]
        with np.errstate(divide="ignore"):
            t_new = np.where(alive, t + e / np.where(rate > 0, rate, 1.0), T)
        jumped = alive & (t_new < T)
        u = rng.random(size=n) * np.where(rate > 0, rate, 1.0)
        nxt = (u[:, None] >= cum[k]).sum(axis=1)
        nxt = np.minimum(nxt, model.m - 1)
        k = np.where(jumped, nxt, k)
        t = np.where(jumped, t_new, T)
        times.append(t.copy())
        states.append(k.copy())
        alive = jumped & (q[k] > 0)
    return np.stack(times, axis=1), np.stack(states, axis=1)


def _occupation(times, states, grid, m):
    """Cumulative time in each regime at the grid points, shape ``(n, len(grid), m)``."""
    n, J = times.shape
    starts = times
    ends = np.concatenate([times[:, 1:], np.full((n, 1), np.inf)], axis=1)
    seg_len = np.clip(np.minimum(ends, grid[-1]) - starts, 0, None)
    onehot = states[:, :, None] == np.arange(m)
    cum = np.concatenate([np.zeros((n, 1, m)), np.cumsum(seg_len[:, :, None] * onehot, axis=1)], axis=1)
    seg = (grid[None, :, None] >= times[:, None, 1:]).sum(axis=2)  # (n, K)
    rows = np.arange(n)[:, None]
    base = cum[rows, seg]
    frac = (grid[None, :] - times[rows, seg])[:, :, None] * onehot[rows, seg]
    return base + frac


@dataclass(frozen=True)
class PathSample:
    times: np.ndarray
    states: np.ndarray
    X_T: float
    A_T: float
    discount: float


def _grid(s, T, substeps_per_year):
    k = max(1, int(math.ceil((T - s) * substeps_per_year)))
    return np.linspace(s, T, k + 1)


def _trapezoid(X, grid, idx=None):
    if idx is not None:
        X, grid = X[:, idx], grid[idx]
    return ((X[:, 1:] + X[:, :-1]) * 0.5) @ np.diff(grid)


def _simulate_block(model, spec, i, n, rng, substeps_per_year, antithetic=False, skeleton=None, coarse=False):
    grid = _grid(spec.s, spec.T, substeps_per_year)
    if skeleton is None:
        times, states = _chain_block(model, i, spec.s, spec.T, n, rng)
    else:
        times, states = skeleton
    occ = np.diff(_occupation(times, states, grid, model.m), axis=1)  # (n, K, m)
    nu = model.r - model.delta - 0.5 * model.sigma**2
    mean = occ @ nu
    sd = np.sqrt(occ @ model.sigma**2)
    eps = rng.standard_normal(mean.shape)
    disc = np.exp(-(occ.sum(axis=1) @ model.r))
    out = []
    for sign in (1.0, -1.0) if antithetic else (1.0,):
        logx = np.concatenate([np.zeros((n, 1)), np.cumsum(mean + sign * sd * eps, axis=1)], axis=1)
        X = spec.x * np.exp(logx)
        A = spec.a + _trapezoid(X, grid)
        if coarse:
            idx = np.unique(np.r_[np.arange(0, len(grid), 2), len(grid) - 1])
            out.append((X[:, -1], A, disc, spec.a + _trapezoid(X, grid, idx)))
        else:
            out.append((X[:, -1], A, disc))
    return out, times, states


def simulate_path(model: RegimeModel, spec: OptionSpec, i: int, rng, substeps: int = SUBSTEPS_PER_YEAR) -> PathSample:
    (xt, at, disc), times, states = (lambda o: (o[0][0], o[1], o[2]))(_simulate_block(model, spec, i, 1, rng, substeps))
    keep = np.concatenate([[True], times[0, 1:] < spec.T])
    return PathSample(times[0][keep], states[0][keep], float(xt[0]), float(at[0]), float(disc[0]))


def payoff(spec: OptionSpec, X_T, A_T, kind: str | None = None):
    kind = kind or spec.style
    avg = A_T / spec.window
    if kind == "floating-call":
        return np.maximum(X_T - avg, 0.0)
    if kind == "fixed-put":
        return np.maximum(spec.K - avg, 0.0)
    if kind in ("fixed-call", "fixed-call-starting"):
        return np.maximum(avg - spec.K, 0.0)
    raise ValueError(f"unknown payoff {kind!r}")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    se: float
    n: int
    seed: int
    label: str = ""

    def interval(self, k: float = 3.0):
        return self.mean - k * self.se, self.mean + k * self.se

    def zscore(self, value: float) -> float:
        if self.se == 0:
            return 0.0 if value == self.mean else math.inf
        return abs(value - self.mean) / self.se


def _estimate(samples, n, seed, label):
    samples = np.concatenate(samples)
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(len(samples))) if len(samples) > 1 else math.inf
    return McEstimate(mean, se, n, seed, label)


def mc_price(
    model: RegimeModel,
    spec: OptionSpec,
    i: int,
    N: int,
    seed: int = 0,
    kind: str | None = None,
    no_jump: bool = False,
    substeps: int = SUBSTEPS_PER_YEAR,
    antithetic: bool = False,
    payoff_fn=None,
) -> McEstimate:
    """Discounted payoff mean and standard error over ``N`` paths.

    ``no_jump`` freezes the regime (conditional no-switch price).  ``payoff_fn(X_T, A_T)``
    overrides the style payoff.  With ``antithetic`` each draw is a mirrored pair and the SE
    is computed from pair averages.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if no_jump:
        model = model.without_switching()
    fn = payoff_fn or (lambda X, A: payoff(spec, X, A, kind))
    samples = []
    done = 0
    b = 0
    while done < N:
        n = min(BLOCK, N - done)
        rng = block_rng(seed, b)
        paths, _, _ = _simulate_block(model, spec, i, n, rng, substeps, antithetic)
        vals = [disc * fn(X, A) for X, A, disc in paths]
        samples.append(vals[0] if len(vals) == 1 else 0.5 * (vals[0] + vals[1]))
        done += n
        b += 1
    label = kind or spec.style
    return _estimate(samples, N, seed, label + (" no-jump" if no_jump else ""))


def refinement_gap(
    model: RegimeModel, spec: OptionSpec, i: int, N: int, seed: int = 0, substeps: int = SUBSTEPS_PER_YEAR,
    kind: str | None = None,
) -> McEstimate:
    """Coupled estimate of ``price(substeps) - price(2 substeps)``.

    Each path is simulated on the fine grid; the coarse running integral uses every other
    point of the same path, so the difference isolates the trapezoid bias.
    """
    samples = []
    done = b = 0
    while done < N:
        n = min(BLOCK, N - done)
        (X, A_fine, disc, A_coarse), = _simulate_block(model, spec, i, n, block_rng(seed, b), 2 * substeps, coarse=True)[0]
        samples.append(disc * (payoff(spec, X, A_coarse, kind) - payoff(spec, X, A_fine, kind)))
        done += n
        b += 1
    return _estimate(samples, N, seed, "refinement gap")


def mc_transformed(sym, N: int, seed: int = 0, substeps: int = SUBSTEPS_PER_YEAR) -> McEstimate:
    """Monte Carlo for the generalized starting option of a :class:`SymmetrySpec`."""
    # X* has drift delta - r = r* - delta* with r* = delta (the discount) and delta* = r
    r_star, d_star = sym.discount, sym.discount - sym.drift
    model = RegimeModel(np.zeros((1, 1)), np.array([r_star]), np.array([sym.sigma]), d_star)
    spec = OptionSpec(0.0, 0.0, sym.tau, sym.x, 0.0, 1.0, "fixed-put")

    def fn(X, A):
        return np.maximum(sym.x - sym.lam * X - sym.beta * A / sym.tau, 0.0)

    est = mc_price(model, spec, 0, N, seed, substeps=substeps, payoff_fn=fn)
    return McEstimate(est.mean, est.se, est.n, est.seed, "transformed")


def sample_psi(
    model: RegimeModel, i: int, z: float, a: float, dt: float, N: int, seed: int = 0, substeps: int = 1024
):
    """``N`` draws of ``(Z_t, A_t)`` with regime ``i`` frozen; ``Z_t`` is the log-return."""
    frozen = model.single(i)
    spec = OptionSpec(0.0, 0.0, dt, math.exp(z), a, None, "floating-call")
    zs, As = [], []
    done = b = 0
    while done < N:
        n = min(BLOCK, N - done)
        (X, A, _), = _simulate_block(frozen, spec, 0, n, block_rng(seed, b), substeps)[0]
        zs.append(np.log(X) - z)
        As.append(A)
        done += n
        b += 1
    return np.concatenate(zs), np.concatenate(As)


def max_sample(model: RegimeModel, i: int, T: float, N: int, seed: int = 0, substeps: int = SUBSTEPS_PER_YEAR):
    """Sampled ``max_t X_t / x`` over ``[0, T]`` under the regime-switching dynamics."""
    spec = OptionSpec(0.0, 0.0, T, 1.0)
    grid = _grid(0.0, T, substeps)
    out = []
    done = b = 0
    while done < N:
        n = min(BLOCK, N - done)
        rng = block_rng(seed, b)
        times, states = _chain_block(model, i, 0.0, T, n, rng)
        occ = np.diff(_occupation(times, states, grid, model.m), axis=1)
        nu = model.r - model.delta - 0.5 * model.sigma**2
        logx = np.cumsum(occ @ nu + np.sqrt(occ @ model.sigma**2) * rng.standard_normal(occ.shape[:2]), axis=1)
        out.append(np.exp(np.maximum(logx.max(axis=1), 0.0)))
        done += n
        b += 1
    return np.concatenate(out)
