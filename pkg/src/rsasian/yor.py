"""Hartman-Watson integrand, Yor's conditional density and the joint law of (Z_t, A_t).

The oscillatory integral defining ``theta_r(t)`` is evaluated along the steepest-descent
contour of its complex phase.  The vertical leg from 0 to the saddle carries a purely real
integrand and drops out of the imaginary part, which removes the ``exp(pi^2 / 2t)``
cancellation; what is left is a positive, bell-shaped integral that double precision
handles for any ``t`` of interest.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .errors import AccuracyError
from .model import RegimeModel

# ---------------------------------------------------------------------------
# contour geometry: a(u) = log(sinh u / u), b(w) = -log(sin w / w)
# ---------------------------------------------------------------------------

_A_SERIES = (1 / 6, -1 / 180, 1 / 2835, -1 / 37800, 1 / 467775, -691 / 3831077250)
_AP_SERIES = (1 / 3, -1 / 45, 2 / 945, -1 / 4725, 2 / 93555, -1382 / 638512875)
_B_SERIES = tuple(abs(c) for c in _A_SERIES)
_BP_SERIES = tuple(abs(c) for c in _AP_SERIES)
_SERIES_CUT = 0.25


def _series(x, coeffs, odd):
    x2 = x * x
    acc = np.zeros_like(x)
    for c in reversed(coeffs):
        acc = acc * x2 + c
    return acc * (x if odd else x2)


def _a(u):
    with np.errstate(all="ignore"):
        exact = np.where(u > 30, u - np.log(2 * u), np.log(np.sinh(u) / u))
    return np.where(u < _SERIES_CUT, _series(u, _A_SERIES, False), exact)


def _a_prime(u):
    with np.errstate(all="ignore"):
        exact = 1 / np.tanh(u) - 1 / u
    return np.where(u < _SERIES_CUT, _series(u, _AP_SERIES, True), exact)


def _b(w):
    with np.errstate(all="ignore"):
        exact = -np.log(np.sin(w) / w)
    return np.where(w < _SERIES_CUT, _series(w, _B_SERIES, False), exact)


def _b_prime(w):
    with np.errstate(all="ignore"):
        exact = 1 / w - 1 / np.tan(w)
    return np.where(w < _SERIES_CUT, _series(w, _BP_SERIES, True), exact)


def _a_inv(A):
    u = np.where(A < 1, np.sqrt(6 * A) * (1 + A / 20), A + np.log(2 * A + 2))
    for _ in range(60):
        step = (_a(u) - A) / np.where(u > 0, _a_prime(u), 1.0)
        new = np.where(A > 0, np.maximum(u - step, 0.5 * u), 0.0)
        done = np.abs(new - u) <= 4e-16 * (1 + u)
        u = new
        if done.all():
            break
    return u


def _b_inv(B):
    # below B = 2 Newton in w; above it in l = log(pi - w), which stays well conditioned
    Bs = np.minimum(B, 2.0)
    w = np.sqrt(6 * Bs) * (1 - Bs / 20)
    for _ in range(60):
        step = (_b(w) - Bs) / np.where(w > 0, _b_prime(w), 1.0)
        new = np.where(Bs > 0, np.clip(w - step, 0.5 * w, 0.5 * (w + np.pi)), 0.0)
        done = np.abs(new - w) <= 4e-16 * (1 + w)
        w = new
        if done.all():
            break
    Bl = np.maximum(B, 2.0)
    ell = math.log(math.pi) - Bl
    for _ in range(60):
        e = np.exp(np.clip(ell, -700.0, math.log(math.pi) - 1e-3))
        g = np.log(np.pi - e) - np.log(np.sin(e)) - Bl
        dg = -e / np.tan(e) - e / (np.pi - e)
        new = ell - g / dg
        done = np.abs(new - ell) <= 1e-15 * (1 + np.abs(ell))
        ell = new
        if done.all():
            break
    return np.where(B <= 2.0, w, np.pi - np.exp(ell))


def _graded_rule(n_geo: int, n_lin: int, order: int):
    rel = np.concatenate([[0.0], np.geomspace(1e-6, 0.03, n_geo), np.linspace(0.03, 1.0, n_lin + 1)[1:]])
    x, w = np.polynomial.legendre.leggauss(order)
    lo, width = rel[:-1, None], np.diff(rel)[:, None]
    return (lo + width * (x + 1) / 2).ravel(), (width / 2 * w).ravel()


_THETA_RULE = _graded_rule(4, 8, 8)
_SPAN_STEPS = 2.0 ** np.arange(-14, 18)


def log_theta(r, t, cut: float = 45.0) -> np.ndarray:
    """``log theta_r(t)`` for arrays ``r > 0`` and ``t > 0`` (broadcast)."""
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    shape = r.shape
    r = r.ravel()
    t = t.ravel()
    if np.any(~(r > 0)) or np.any(~(t > 0)):
        raise ValueError("theta needs r > 0 and t > 0")
    L = np.log(r * t)[:, None]
    tt = t[:, None]
    rr = r[:, None]

    def phase(S):
        with np.errstate(divide="ignore", invalid="ignore"):
            D = np.where(S > 0, 6 * L / S, 0.0)
            q = np.where(S > 0, 6 * L / S**2, 0.0)
        U = np.maximum(0.5 * (S - D), 0.0)
        W = np.maximum(0.5 * (S + D), 0.0)
        u = _a_inv(U * U / 6)
        w = _b_inv(W * W / 6)
        with np.errstate(divide="ignore", invalid="ignore"):
            du = np.where(u > 0, U * (1 + q) / 6 / _a_prime(u), 0.5 * (1 + q))
            dw = np.where(w > 0, W * (1 - q) / 6 / _b_prime(w), 0.5 * (1 - q))
        y = u + 1j * (np.pi - w)
        phi = -((y - 1j * np.pi) ** 2) / (2 * tt) - rr * np.cosh(y)
        return phi, np.sinh(y) * (du - 1j * dw)

    S0 = np.sqrt(6 * np.abs(L))
    phi0 = phase(S0)[0][:, 0].real
    scale = np.sqrt(t)[:, None] * _SPAN_STEPS
    with np.errstate(over="ignore", invalid="ignore"):
        drop = phase(S0 + scale)[0].real - phi0[:, None]
    past = np.nan_to_num(drop, nan=-np.inf) < -cut
    if not past.any(axis=1).all():
        raise AccuracyError("steepest-descent path did not decay; theta out of range")
    span = scale[np.arange(len(r)), past.argmax(axis=1)]
    nodes, weights = _THETA_RULE
    with np.errstate(over="ignore", invalid="ignore"):
        phi, jac = phase(S0 + span[:, None] * nodes)
        vals = np.nan_to_num((np.exp(phi - phi0[:, None]) * jac).imag)
    integral = (vals @ weights) * span
    if np.any(~(integral > 0)):
        raise AccuracyError("non-positive Hartman-Watson integral")
    out = np.log(r / np.sqrt(2 * np.pi**3 * t)) + phi0 + np.log(integral)
    return out.reshape(shape)


def theta(r, t) -> np.ndarray:
    """Hartman-Watson integrand ``theta_r(t)``."""
    with np.errstate(over="ignore"):
        return np.exp(log_theta(r, t))


class LogThetaTable:
    """Piecewise Chebyshev interpolant of ``log theta(e^x, t) - e^x`` for one ``t``.

    Accuracy is checked against direct evaluation at off-node points; the piece count
    doubles until the check passes.
    """

    def __init__(self, t: float, x_lo: float, x_hi: float, order: int = 16, pieces: int = 8, tol: float = 1e-9):
        self.t = t
        self.order = order
        k = np.arange(order)
        self._xc = np.cos(np.pi * (k + 0.5) / order)
        self._to_coef = np.cos(np.outer(k, np.pi * (k + 0.5) / order)) * 2 / order
        self._to_coef[0] /= 2
        pad = 1e-9 + 1e-6 * (x_hi - x_lo)
        self._build(x_lo - pad, x_hi + pad, pieces, tol)

    def _build(self, lo, hi, pieces, tol):
        while True:
            edges = np.linspace(lo, hi, pieces + 1)
            mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
            X = mid[:, None] + half[:, None] * self._xc
            V = log_theta(np.exp(X), self.t) - np.exp(X)
            self.edges, self.coef = edges, V @ self._to_coef.T
            probe = lo + (hi - lo) * np.array([0.013, 0.171, 0.333, 0.529, 0.687, 0.841, 0.977])
            err = np.max(np.abs(self(probe) - log_theta(np.exp(probe), self.t)))
            if err < tol or pieces >= 512:
                self.error = err
                return
            pieces *= 2

    @property
    def lo(self):
        return self.edges[0]

    @property
    def hi(self):
        return self.edges[-1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        n = len(self.edges) - 1
        p = np.clip(np.searchsorted(self.edges, x) - 1, 0, n - 1)
        xl = (2 * x - self.edges[p] - self.edges[p + 1]) / (self.edges[p + 1] - self.edges[p])
        c = self.coef[p]
        # Clenshaw
        b1 = np.zeros_like(x)
        b2 = np.zeros_like(x)
        for j in range(self.order - 1, 0, -1):
            b1, b2 = 2 * xl * b1 - b2 + c[..., j], b1
        return xl * b1 - b2 + c[..., 0] + np.exp(x)


# ---------------------------------------------------------------------------
# Yor's conditional density and the joint density of (Z_t, A_t)
# ---------------------------------------------------------------------------


def log_f_cond(t: float, z, w, log_theta_fn=None):
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    lt = log_theta_fn or (lambda x: log_theta(np.exp(x), t))
    return 0.5 * np.log(2 * np.pi * t) + z * z / (2 * t) - np.log(w) - (1 + np.exp(2 * z)) / (2 * w) + lt(z - np.log(w))


def f_cond(t: float, z, w) -> np.ndarray:
    """Density of ``A_t^nu`` at ``w`` given ``B_t + nu t = z`` (does not depend on ``nu``)."""
    if not t > 0:
        raise ValueError("f_cond needs t > 0")
    w = np.asarray(w, dtype=float)
    out = np.zeros(np.broadcast(np.asarray(z), w).shape)
    pos = np.broadcast_to(w > 0, out.shape)
    zb = np.broadcast_to(z, out.shape)
    wb = np.broadcast_to(w, out.shape)
    if pos.any():
        with np.errstate(over="ignore"):
            out[pos] = np.exp(log_f_cond(t, zb[pos], wb[pos]))
    return out


def log_joint_density(t: float, nu: float, zeta, s, log_theta_fn):
    """Log density of ``(B_t + nu t, log A_t^nu)`` at ``(zeta, s)``."""
    return nu * zeta - 0.5 * nu * nu * t - 0.5 * (1 + np.exp(2 * zeta)) * np.exp(-s) + log_theta_fn(zeta - s)


@dataclass(frozen=True)
class PsiParams:
    """Conditioning state for the joint law of ``(Z_t, A_t)`` after ``dt`` years in regime ``i``.

    ``t_prime`` and ``nu`` are the Yor time and drift; ``c`` maps ``a' - a`` to ``w``.
    """

    i: int
    z: float
    a: float
    dt: float
    sigma: float
    log_drift: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("PsiParams needs dt > 0")

    @classmethod
    def from_model(cls, model: RegimeModel, i: int, z: float, a: float, dt: float) -> "PsiParams":
        return cls(i, float(z), float(a), float(dt), float(model.sigma[i]), model.nu(i))

    @property
    def t_prime(self) -> float:
        return self.sigma**2 * self.dt / 4

    @property
    def nu(self) -> float:
        return 2 * self.log_drift / self.sigma**2

    @property
    def c(self) -> float:
        return self.sigma**2 * math.exp(-self.z) / 4

    def w_of(self, a_prime):
        return self.c * (np.asarray(a_prime, dtype=float) - self.a)


def psi(params: PsiParams, z_prime, a_prime) -> np.ndarray:
    """Joint density of ``(Z_t, A_t)`` with respect to ``dz' da'``; zero for ``a' <= a``."""
    zp, ap = np.broadcast_arrays(np.asarray(z_prime, dtype=float), np.asarray(a_prime, dtype=float))
    w = params.w_of(ap)
    out = np.zeros(zp.shape)
    pos = w > 0
    if pos.any():
        t = params.t_prime
        ld = log_joint_density(t, params.nu, zp[pos] / 2, np.log(w[pos]), lambda x: log_theta(np.exp(x), t))
        with np.errstate(over="ignore"):
            out[pos] = 0.5 * params.c * np.exp(ld) / w[pos]
    return out


# ---------------------------------------------------------------------------
# tensor quadrature over (z', a')
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs for the psi node sets.  Defaults hold the density identities near 1e-10."""

    zeta_half_width: float = 8.0
    zeta_panels: int = 8
    zeta_order: int = 10
    w_panels: int = 6
    w_order: int = 12
    scan_points: int = 64
    support_drop: float = 34.0
    table_order: int = 16
    table_pieces: int = 8
    table_tol: float = 1e-9
    tol: float = 1e-4
    t_prime_min: float = 1e-7
    fallback_samples: int = 100_000
    fallback_substeps: int = 64
    fallback_seed: int = 20240611

    def __post_init__(self):
        if min(self.zeta_order, self.w_order, self.table_order) < 2:
            raise ValueError("quadrature orders must be >= 2")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")


DEFAULT_QUADRATURE = QuadratureConfig()


@functools.lru_cache(maxsize=None)
def _fejer(n: int):
    """Chebyshev points of the first kind on [-1, 1], Fejer weights, and the map from
    point values to the antiderivative's Chebyshev coefficients (zero at -1)."""
    k = np.arange(n)
    th = np.pi * (k + 0.5) / n
    x = np.cos(th)
    j = np.arange(1, n // 2 + 1)
    w = 2 / n * (1 - 2 * (np.cos(2 * np.outer(th, j)) / (4 * j * j - 1)).sum(axis=1))
    to_coef = np.cos(np.outer(k, th)) * 2 / n
    to_coef[0] /= 2
    integ = np.stack([cheb.chebint(np.eye(n)[c], lbnd=-1) for c in range(n)], axis=1)
    return x, w, integ @ to_coef


def _bridge_log_mean(t, zeta):
    """``log E[A_t^nu | B_t + nu t = zeta]``; seeds the scan window."""
    x, w = np.polynomial.legendre.leggauss(24)
    u = t * (x + 1) / 2
    ex = 2 * zeta[:, None] * u / t + 2 * u * (t - u) / t
    mx = ex.max(axis=1, keepdims=True)
    return mx[:, 0] + np.log(np.exp(ex - mx) @ (w * t / 2))


@dataclass(frozen=True)
class _Conditional:
    t: float
    nu: float
    zeta: np.ndarray  # (nz,)
    zeta_w: np.ndarray  # (nz,) quadrature weights, density not included
    s_lo: np.ndarray  # (nz,)
    h: np.ndarray  # (nz,) panel width in s = log w
    s: np.ndarray  # (nz, P, n)
    dens: np.ndarray  # (nz, P, n) density of (zeta, s)
    fejer: np.ndarray  # (n,)
    antider: np.ndarray  # (n + 1, n)
    table_error: float

    def truncated_moments(self, s_star):
        """``(M0, M1)``: integrals of the density and of ``w`` times it over ``log w < s*``.

        One value per zeta node; ``s_star`` has shape ``(..., nz)`` and results share it.
        """
        c = self
        s_star = np.asarray(s_star, dtype=float)
        nz, P, n = c.s.shape
        pos = (s_star - c.s_lo) / c.h
        p = np.clip(np.floor(pos), 0, P - 1).astype(int)
        xloc = np.clip(2 * (pos - p) - 1, -1.0, 1.0)
        basis = np.cos(np.arange(n + 1) * np.arccos(xloc)[..., None])
        row = basis @ c.antider  # (..., nz, n)
        scale = c.h / 2
        full0 = (c.dens * c.fejer).sum(axis=2) * scale[:, None]  # (nz, P)
        full1 = (c.dens * np.exp(c.s) * c.fejer).sum(axis=2) * scale[:, None]
        cum0 = np.concatenate([np.zeros((nz, 1)), np.cumsum(full0, axis=1)], axis=1)
        cum1 = np.concatenate([np.zeros((nz, 1)), np.cumsum(full1, axis=1)], axis=1)
        idx = np.broadcast_to(np.arange(nz), p.shape)
        v0 = c.dens[idx, p]
        v1 = v0 * np.exp(c.s[idx, p])
        m0 = cum0[idx, p] + (row * v0).sum(axis=-1) * scale
        m1 = cum1[idx, p] + (row * v1).sum(axis=-1) * scale
        below = pos <= 0
        above = pos >= P
        m0 = np.where(below, 0.0, np.where(above, cum0[:, -1], m0))
        m1 = np.where(below, 0.0, np.where(above, cum1[:, -1], m1))
        return m0, m1


def _conditional_panels(t: float, nu: float, zeta: np.ndarray, zeta_w: np.ndarray, cfg: QuadratureConfig):
    nz = len(zeta)
    center = _bridge_log_mean(t, zeta)
    width = math.sqrt(t / 3)
    lo = center - 12 * width
    hi = center + 12 * width
    grid = np.linspace(0, 1, cfg.scan_points)
    table = None
    for _ in range(12):
        S = lo[:, None] + (hi - lo)[:, None] * grid
        X = zeta[:, None] - S
        if table is None or X.min() < table.lo or X.max() > table.hi:
            xl, xh = X.min(), X.max()
            if table is not None:
                xl, xh = min(xl, table.lo), max(xh, table.hi)
            table = LogThetaTable(t, xl, xh, cfg.table_order, cfg.table_pieces, cfg.table_tol)
        ld = log_joint_density(t, nu, zeta[:, None], S, table)
        top = ld.max(axis=1, keepdims=True)
        low_open = ld[:, 0] > top[:, 0] - cfg.support_drop
        high_open = ld[:, -1] > top[:, 0] - cfg.support_drop
        if not (low_open.any() or high_open.any()):
            break
        span = hi - lo
        lo = np.where(low_open, lo - 0.5 * span, lo)
        hi = np.where(high_open, hi + 0.5 * span, hi)
    else:
        raise AccuracyError("conditional density support not bracketed")
    keep = ld >= top - cfg.support_drop
    first = np.clip(keep.argmax(axis=1) - 1, 0, None)
    last = np.clip(cfg.scan_points - keep[:, ::-1].argmax(axis=1), None, cfg.scan_points - 1)
    rows = np.arange(nz)
    s_lo, s_hi = S[rows, first], S[rows, last]
    P = cfg.w_panels
    xk, fw, antider = _fejer(cfg.w_order)
    h = (s_hi - s_lo) / P
    left = s_lo[:, None] + h[:, None] * np.arange(P)
    s = left[:, :, None] + h[:, None, None] * (1 + xk[::-1]) / 2
    # nodes stored ascending; reverse the Fejer data to match
    fw = fw[::-1]
    antider = antider[:, ::-1]
    X = zeta[:, None, None] - s
    if X.min() < table.lo or X.max() > table.hi:
        table = LogThetaTable(t, min(X.min(), table.lo), max(X.max(), table.hi), cfg.table_order, cfg.table_pieces)
    with np.errstate(under="ignore"):
        dens = np.exp(log_joint_density(t, nu, zeta[:, None, None], s, table))
    return _Conditional(t, nu, zeta, zeta_w, s_lo, h, s, dens, fw, antider, table.error)


@functools.lru_cache(maxsize=512)
def _node_structure(t: float, nu: float, cfg: QuadratureConfig) -> _Conditional:
    x, w = np.polynomial.legendre.leggauss(cfg.zeta_order)
    half = cfg.zeta_half_width * math.sqrt(t)
    edges = np.linspace(nu * t - half, nu * t + half, cfg.zeta_panels + 1)
    mid, hw = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    zeta = (mid[:, None] + hw[:, None] * x).ravel()
    zeta_w = (hw[:, None] * w).ravel()
    return _conditional_panels(t, nu, zeta, zeta_w, cfg)


@functools.lru_cache(maxsize=64)
def _fallback_structure(t: float, nu: float, cfg: QuadratureConfig):
    """Monte Carlo slice of ``(B_t + nu t, A_t^nu)`` used below ``t_prime_min``."""
    rng = np.random.Generator(np.random.Philox(key=cfg.fallback_seed))
    n, k = cfg.fallback_samples, cfg.fallback_substeps
    dt = t / k
    incr = rng.standard_normal((n, k)) * math.sqrt(dt) + nu * dt
    path = np.concatenate([np.zeros((n, 1)), np.cumsum(incr, axis=1)], axis=1)
    e = np.exp(2 * path)
    area = dt * (e[:, 1:-1].sum(axis=1) + 0.5 * (e[:, 0] + e[:, -1]))
    return path[:, -1], np.log(area)


class PsiNodes:
    """Weighted node set over ``(z', a')`` for one :class:`PsiParams`.

    ``weights`` already contain the density, so ``sum(weights * h(z_prime, a_prime))``
    approximates ``E[h(Z_t, A_t)]``.  Node sets built from the analytic density also
    integrate payoffs with a kink in ``a'`` exactly per ``z'`` node via
    :meth:`expected_positive_part`.
    """

    def __init__(self, params: PsiParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE):
        self.params = params
        self.cfg = cfg
        t, nu = params.t_prime, params.nu
        self.fallback = t < cfg.t_prime_min
        if self.fallback:
            zeta, s = _fallback_structure(t, nu, cfg)
            self._cond = None
            self.zeta = zeta
            self._zeta_flat = zeta
            self._s_flat = s
            self.weights = np.full(len(zeta), 1.0 / len(zeta))
        else:
            c = _node_structure(t, nu, cfg)
            self._cond = c
            self.zeta = c.zeta
            nz, P, n = c.s.shape
            w = c.zeta_w[:, None, None] * (c.h[:, None, None] / 2) * c.fejer * c.dens
            self._zeta_flat = np.repeat(c.zeta, P * n)
            self._s_flat = c.s.ravel()
            self.weights = w.ravel()
        self.z_prime = 2 * self._zeta_flat
        self.w = np.exp(self._s_flat)
        self.increment = self.w / params.c  # a' - a
        self.a_prime = params.a + self.increment
        self.check()

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, fn) -> float:
        return float(np.dot(self.weights, fn(self.z_prime, self.a_prime)))

    def identities(self) -> dict:
        growth = math.exp((self.params.log_drift + self.params.sigma**2 / 2) * self.params.dt)
        return {
            "mass": (float(self.weights.sum()), 1.0),
            "exp_moment": (float(self.weights @ np.exp(self.z_prime)), growth),
        }

    def check(self):
        tol = self.cfg.tol
        if self.fallback:
            # sampling noise, not quadrature error
            return
        for name, (value, target) in self.identities().items():
            if not abs(value - target) <= tol * max(1.0, abs(target)):
                raise AccuracyError(
                    f"psi node set failed {name}: {value!r} vs {target!r} "
                    f"(t'={self.params.t_prime:.3g}, nu={self.params.nu:.3g})"
                )

    def truncated_moments(self, s_star):
        """``(M0, M1)`` per zeta node for ``log w < s_star``; see :meth:`_Conditional.truncated_moments`."""
        return self._cond.truncated_moments(s_star)

    def expected_positive_part(self, c0, c1, c_inc):
        """``E[(c0 + c1 exp(Z) + c_inc (A - a))^+]`` under psi, for arrays ``c0``, ``c1``."""
        c0, c1 = np.broadcast_arrays(np.asarray(c0, dtype=float), np.asarray(c1, dtype=float))
        if self.fallback or c_inc == 0:
            vals = c0[..., None] + c1[..., None] * np.exp(self.z_prime) + c_inc * self.increment
            return np.maximum(vals, 0.0) @ self.weights
        c = self._cond
        alpha = c0[..., None] + c1[..., None] * np.exp(2 * c.zeta)  # (..., nz)
        beta = c_inc / self.params.c  # coefficient on w
        m0_all, m1_all = self.truncated_moments(np.full(alpha.shape, np.inf))
        with np.errstate(divide="ignore", invalid="ignore"):
            w_star = -alpha / beta
            s_star = np.where(w_star > 0, np.log(w_star), -np.inf)
        m0, m1 = self.truncated_moments(np.where(np.isfinite(s_star), s_star, -1e300))
        if beta < 0:
            # positive where w < w*
            part = np.where(w_star > 0, alpha * m0 + beta * m1, 0.0)
        else:
            part = np.where(w_star > 0, alpha * (m0_all - m0) + beta * (m1_all - m1), alpha * m0_all + beta * m1_all)
        return part @ c.zeta_w

    def conditional_cdf(self, zeta_index, w):
        """Conditional probability of ``A^nu_{t'} <= w`` given the zeta node, unnormalized by the marginal."""
        m0, _ = self.truncated_moments(np.log(w))
        return m0[..., zeta_index]


def psi_nodes(params: PsiParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> PsiNodes:
    """Build (and self-check) the tensor node set for one conditioning state."""
    return PsiNodes(params, cfg)


def _zeta_rule(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = np.asarray(edges[:-1]), np.asarray(edges[1:])
    mid, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return (mid[:, None] + hw[:, None] * x).ravel(), (hw[:, None] * w).ravel()


def bin_probabilities(params: PsiParams, z_edges, a_edges, cfg: QuadratureConfig = DEFAULT_QUADRATURE, order: int = 12):
    """Probabilities of the rectangles ``z_edges x a_edges`` under psi (outer edges may be infinite).

    Each ``z'`` bin gets its own Gauss-Legendre rule; within a ``zeta`` node the ``a'`` edges
    are exact cuts of the conditional panels.
    """
    t, nu = params.t_prime, params.nu
    z_edges = np.asarray(z_edges, dtype=float)
    lo_z = nu * t - (cfg.zeta_half_width + 2) * math.sqrt(t)
    hi_z = nu * t + (cfg.zeta_half_width + 2) * math.sqrt(t)
    ze = np.clip(z_edges / 2, lo_z, hi_z)
    zeta, zw = _zeta_rule(ze, order)
    cond = _conditional_panels(t, nu, zeta, zw, cfg)
    w_edges = params.w_of(np.asarray(a_edges, dtype=float))
    with np.errstate(divide="ignore"):
        s_edges = np.where(w_edges > 0, np.log(np.maximum(w_edges, 1e-300)), -np.inf)
    s_grid = np.broadcast_to(np.where(np.isfinite(s_edges), s_edges, np.sign(s_edges) * 1e300)[:, None], (len(s_edges), len(zeta)))
    m0, _ = cond.truncated_moments(s_grid)  # (n_a_edges, nz)
    cells = np.diff(m0, axis=0) * zw  # (n_a_bins, nz)
    nzb = len(z_edges) - 1
    return cells.reshape(len(s_edges) - 1, nzb, order).sum(axis=2).T


def f_cond_mass(t: float, z: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``int_0^inf f_cond(t, z, w) dw`` by the adaptive conditional panels."""
    cond = _conditional_panels(t, 0.0, np.array([float(z)]), np.ones(1), cfg)
    total = float(((cond.dens * cond.fejer).sum(axis=2) * (cond.h[:, None] / 2)).sum())
    return total / (math.exp(-z * z / (2 * t)) / math.sqrt(2 * math.pi * t))


def f_cond_mean(t: float, nu: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``E[A_t^nu]`` by integrating ``w f_cond`` against the law of ``B_t + nu t``."""
    c = _node_structure(t, nu, cfg)
    full1 = (c.dens * np.exp(c.s) * c.fejer).sum(axis=2) * (c.h[:, None] / 2)
    return float(full1.sum(axis=1) @ c.zeta_w)


def full_argument_identities(params: PsiParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> dict:
    """Mass and exponential moment of the alternative reading
    ``c f(t', z', w) phi((z' - 2 nu t') / (2 sqrt t'))`` (no half-argument, no Jacobian)."""
    t, nu = params.t_prime, params.nu
    half = 2 * (cfg.zeta_half_width + 2) * math.sqrt(t)
    zp, zw = _zeta_rule(np.linspace(2 * nu * t - half, 2 * nu * t + half, 4 * cfg.zeta_panels + 1), cfg.zeta_order)
    cond = _conditional_panels(t, 0.0, zp, zw, cfg)
    joint = ((cond.dens * cond.fejer).sum(axis=2) * (cond.h[:, None] / 2)).sum(axis=1)
    mass_w = joint / (np.exp(-zp * zp / (2 * t)) / math.sqrt(2 * math.pi * t))
    phi = np.exp(-0.5 * ((zp - 2 * nu * t) / (2 * math.sqrt(t))) ** 2) / math.sqrt(2 * math.pi)
    return {"mass": float(zw @ (phi * mass_w)), "exp_moment": float(zw @ (phi * mass_w * np.exp(zp)))}
