"""Flat key-value run configuration.

One ``key = value`` per line; ``#`` starts a comment; arrays use brackets
(``Q = [[-1, 1], [1, -1]]``).  Strings need no quotes.  Keys::

    model:    Q, r, sigma, delta, m (optional, checked against Q)
    option:   t0, s, T, x, a, K, style, regime (0-based)
    numerics: n_time, n_kappa, epsilon, max_iter, t_prime_min, zeta_panels, w_panels,
              paths, substeps, seed, antithetic, chi_paths
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .fixedpoint import EngineConfig
from .model import OptionSpec, RegimeModel, validate_model
from .yor import QuadratureConfig

MODEL_KEYS = {"m", "Q", "r", "sigma", "delta"}
OPTION_KEYS = {"t0", "s", "T", "x", "a", "K", "style", "regime"}
NUMERIC_KEYS = {
    "n_time", "n_kappa", "epsilon", "max_iter", "t_prime_min", "zeta_panels", "w_panels",
    "paths", "substeps", "seed", "antithetic", "chi_paths",
}


@dataclass(frozen=True)
class Numerics:
    engine: EngineConfig = field(default_factory=EngineConfig)
    paths: int = 200_000
    substeps: int = 256
    seed: int = 0
    antithetic: bool = False
    chi_paths: int = 1_000_000


@dataclass(frozen=True)
class RunConfig:
    model: RegimeModel
    option: OptionSpec
    regime: int
    numerics: Numerics


def parse_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        try:
            out[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key] = value
    unknown = set(out) - MODEL_KEYS - OPTION_KEYS - NUMERIC_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    return out


def _num(d, key, default, kind=float):
    if key not in d:
        return default
    try:
        return kind(d[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot read {d[key]!r} as {kind.__name__}") from exc


def build(d: dict) -> RunConfig:
    for key in ("Q", "r", "sigma"):
        if key not in d:
            raise ConfigError(f"missing model key {key!r}")
    model = validate_model(d["Q"], d["r"], d["sigma"], _num(d, "delta", 0.0))
    if "m" in d and int(d["m"]) != model.m:
        raise ConfigError(f"m = {d['m']} but Q is {model.m}x{model.m}")
    for key in ("T", "x"):
        if key not in d:
            raise ConfigError(f"missing option key {key!r}")
    t0 = _num(d, "t0", 0.0)
    option = OptionSpec(
        t0, _num(d, "s", t0), _num(d, "T", None), _num(d, "x", None), _num(d, "a", 0.0),
        _num(d, "K", None), str(d.get("style", "floating-call")),
    )
    regime = _num(d, "regime", 0, int)
    if not 0 <= regime < model.m:
        raise ConfigError(f"regime {regime} outside 0..{model.m - 1}")
    quad = QuadratureConfig()
    quad = replace(
        quad,
        t_prime_min=_num(d, "t_prime_min", quad.t_prime_min),
        zeta_panels=_num(d, "zeta_panels", quad.zeta_panels, int),
        w_panels=_num(d, "w_panels", quad.w_panels, int),
    )
    base = EngineConfig()
    try:
        engine = EngineConfig(
            n_time=_num(d, "n_time", base.n_time, int),
            n_kappa=_num(d, "n_kappa", base.n_kappa, int),
            epsilon=_num(d, "epsilon", base.epsilon),
            max_iter=_num(d, "max_iter", base.max_iter, int),
            quad=quad,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    numerics = Numerics(
        engine,
        _num(d, "paths", 200_000, int),
        _num(d, "substeps", 256, int),
        _num(d, "seed", 0, int),
        bool(d.get("antithetic", False)),
        _num(d, "chi_paths", 1_000_000, int),
    )
    if numerics.paths < 2 or numerics.substeps < 1:
        raise ConfigError("paths must be >= 2 and substeps >= 1")
    return RunConfig(model, option, regime, numerics)


def load(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build(parse_text(text))
