"""Market model, option specification and closed-form scalar quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    NegativeOffDiagonal,
    NonPositiveRate,
    NonPositiveVolatility,
    RowSumNonZero,
    SpecError,
)

ROW_SUM_TOL = 1e-12

STYLES = ("floating-call", "fixed-put", "fixed-call-starting")


@dataclass(frozen=True, eq=False)
class RegimeModel:
    """Regime-switching GBM: generator ``Q``, per-regime ``r`` and ``sigma``, dividend ``delta``.

    Build through :func:`validate_model`; the constructor does not check anything.
    """

    Q: np.ndarray
    r: np.ndarray
    sigma: np.ndarray
    delta: float = 0.0

    @property
    def m(self) -> int:
        return len(self.r)

    @property
    def q(self) -> np.ndarray:
        """Total exit rates ``q_i = -Q[i, i]``."""
        return -np.diag(self.Q)

    def nu(self, i: int) -> float:
        """Log-price drift ``r(i) - delta - sigma(i)^2 / 2``."""
        return float(self.r[i] - self.delta - 0.5 * self.sigma[i] ** 2)

    def yor_nu(self, i: int) -> float:
        """Drift of the time-changed Brownian motion, ``2 nu(i) / sigma(i)^2``."""
        return 2.0 * self.nu(i) / float(self.sigma[i] ** 2)

    def time_scale(self, i: int, dt: float) -> float:
        """Yor time ``t' = sigma(i)^2 dt / 4``."""
        return float(self.sigma[i] ** 2) * dt / 4.0

    def with_delta(self, delta: float) -> "RegimeModel":
        return validate_model(self.Q, self.r, self.sigma, delta)

    def without_switching(self) -> "RegimeModel":
        """Same coefficients with every regime absorbing."""
        return RegimeModel(np.zeros_like(self.Q), self.r, self.sigma, self.delta)

    def single(self, i: int) -> "RegimeModel":
        """One-regime model carrying the coefficients of regime ``i``."""
        return RegimeModel(np.zeros((1, 1)), self.r[i : i + 1].copy(), self.sigma[i : i + 1].copy(), self.delta)

    def permuted(self, perm: Sequence[int]) -> "RegimeModel":
        p = np.asarray(perm)
        return RegimeModel(self.Q[np.ix_(p, p)], self.r[p], self.sigma[p], self.delta)

    def __repr__(self) -> str:
        return (
            f"RegimeModel(m={self.m}, Q={self.Q.tolist()}, r={self.r.tolist()}, "
            f"sigma={self.sigma.tolist()}, delta={self.delta})"
        )


def validate_model(Q, r, sigma, delta: float = 0.0) -> RegimeModel:
    """Check the generator and coefficient conditions and return a frozen model."""
    r = np.atleast_1d(np.asarray(r, dtype=float)).copy()
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float)).copy()
    Q = np.atleast_2d(np.asarray(Q, dtype=float)).copy()
    m = len(r)
    if Q.shape != (m, m) or sigma.shape != (m,):
        raise ValueError(f"shape mismatch: Q {Q.shape}, r {r.shape}, sigma {sigma.shape}")
    off = Q[~np.eye(m, dtype=bool)]
    if np.any(off < 0):
        i, j = np.argwhere((Q < 0) & ~np.eye(m, dtype=bool))[0]
        raise NegativeOffDiagonal(f"Q[{i},{j}] = {Q[i, j]} < 0")
    rows = Q.sum(axis=1)
    bad = np.flatnonzero(np.abs(rows) > ROW_SUM_TOL)
    if bad.size:
        raise RowSumNonZero(f"row {bad[0]} of Q sums to {rows[bad[0]]}")
    if np.any(~(sigma > 0)):
        raise NonPositiveVolatility(f"sigma = {sigma.tolist()} must be > 0 in every regime")
    if np.any(~(r > 0)):
        raise NonPositiveRate(f"r = {r.tolist()} must be > 0 in every regime")
    if not delta >= 0:
        raise NonPositiveRate(f"dividend rate delta = {delta} must be >= 0")
    for arr in (Q, r, sigma):
        arr.setflags(write=False)
    return RegimeModel(Q, r, sigma, float(delta))


@dataclass(frozen=True)
class OptionSpec:
    """Contract and state: averaging window ``[t0, T]``, valuation time ``s``, spot ``x``,
    running integral ``a`` and, for fixed-strike styles, strike ``K``."""

    t0: float
    s: float
    T: float
    x: float
    a: float = 0.0
    K: float | None = None
    style: str = "floating-call"

    def __post_init__(self):
        if self.style not in STYLES:
            raise SpecError(f"unknown style {self.style!r}; expected one of {STYLES}")
        if not (self.t0 <= self.s <= self.T) or not self.t0 < self.T:
            raise SpecError(f"need t0 <= s <= T with t0 < T, got t0={self.t0}, s={self.s}, T={self.T}")
        if not self.x > 0:
            raise SpecError(f"spot x must be positive, got {self.x}")
        if not self.a >= 0:
            raise SpecError(f"running integral a must be >= 0, got {self.a}")
        if self.style != "floating-call" and not (self.K is not None and self.K > 0):
            raise SpecError(f"style {self.style} needs a positive strike K")
        if self.style == "fixed-call-starting" and (self.s > self.t0 or self.a > 0):
            raise SpecError(
                "fixed-strike call is only supported for starting options (s = t0, a = 0); "
                "in-progress the scaled operator need not be a contraction"
            )

    @property
    def tau(self) -> float:
        return self.T - self.s

    @property
    def window(self) -> float:
        return self.T - self.t0

    @property
    def z(self) -> float:
        return math.log(self.x)

    @property
    def starting(self) -> bool:
        return self.s == self.t0 and self.a == 0

    def reduced_coordinate(self) -> float:
        """Homogeneity variable: ``a / x`` for floating calls, ``(K - a/(T-t0)) / x`` otherwise."""
        if self.style == "floating-call":
            return self.a / self.x
        return (self.K - self.a / self.window) / self.x


@dataclass(frozen=True)
class DerivedScalars:
    """Per-regime drifts and Yor substitutions for one model."""

    z: float
    nu: np.ndarray = field(repr=False)
    yor_nu: np.ndarray = field(repr=False)
    sigma2: np.ndarray = field(repr=False)

    def time_scale(self, i: int, dt: float) -> float:
        return self.sigma2[i] * dt / 4.0


def derived_scalars(model: RegimeModel, x: float) -> DerivedScalars:
    nu = model.r - model.delta - 0.5 * model.sigma**2
    return DerivedScalars(math.log(x), nu, 2.0 * nu / model.sigma**2, model.sigma**2)


def contraction_factor(model: RegimeModel, s: float, T: float, i: int) -> float:
    """``rho(i) = sum_{j != i} q_ij / (q_i + delta) * (1 - exp(-(q_i + delta)(T - s)))``."""
    if T < s:
        raise ValueError("need s <= T")
    qi = float(model.q[i])
    out_rate = float(model.Q[i].sum() - model.Q[i, i])
    k = qi + model.delta
    if k == 0.0:
        return 0.0
    # -expm1 keeps relative accuracy when k (T - s) is tiny
    return out_rate / k * -math.expm1(-k * (T - s))


def overall_rho(model: RegimeModel, s: float, T: float) -> float:
    return max(contraction_factor(model, s, T, i) for i in range(model.m))
