import math

import numpy as np
import pytest
from scipy import integrate

from rsasian.errors import SpecError
from rsasian.fixedpoint import (
    Discretization,
    EngineConfig,
    apply_F,
    apriori_iterations,
    build_g0,
    lag_weights,
    n_bound,
    perturbation_bound,
    price,
    price_fixed_call_starting,
    price_fixed_put,
    regime_rho,
)
from rsasian.model import OptionSpec, contraction_factor, validate_model
from rsasian.montecarlo import max_sample
from rsasian.noswitch import c0_floating, fixed_call_ns, fixed_put_ns

FAST = EngineConfig(n_time=11, n_kappa=201)


@pytest.fixture(scope="module")
def bench_disc(bench_model, bench_spec):
    return Discretization(bench_model, bench_spec, FAST)


def test_g0_terminal_slice_is_payoff(bench_model, bench_spec, bench_disc):
    g0 = build_g0(bench_model, bench_spec, FAST, bench_disc)
    payoff = np.maximum(1 - bench_disc.kappa / bench_spec.window, 0)
    for i in range(2):
        np.testing.assert_allclose(g0.values[-1, :, i], payoff)


def test_g0_matches_no_switch_price_when_absorbing(bench_model, bench_spec):
    frozen = bench_model.without_switching()
    disc = Discretization(frozen, bench_spec, FAST)
    g0 = build_g0(frozen, bench_spec, FAST, disc)
    k, l = 4, int(np.searchsorted(disc.kappa, 0.3))
    t, kap = disc.times[k], disc.kappa[l]
    spec = OptionSpec(0, t, 1, 1.0, kap)
    for i in range(2):
        assert g0.values[k, l, i] == pytest.approx(c0_floating(frozen, spec, i), abs=1e-3)


def test_operator_on_constants(bench_model, bench_disc):
    g = build_g0(bench_model, bench_disc.spec, FAST, bench_disc)
    zero = apply_F(g.like(np.zeros_like(g.values), terminal_payoff=False), bench_model, bench_disc)
    assert zero.sup_norm() == 0
    one = apply_F(g.like(np.ones_like(g.values), terminal_payoff=False), bench_model, bench_disc)
    assert one.values.max() <= max(regime_rho(bench_model, bench_disc.spec)) + 1e-9
    # away from the truncated kappa tail, F(1)(t, i) is the contraction factor over [t, T]
    l = int(np.searchsorted(bench_disc.kappa, 0.2))
    for k in (0, 5):
        for i in range(2):
            rho_t = contraction_factor(bench_model, bench_disc.times[k], 1.0, i)
            assert one.values[k, l, i] == pytest.approx(rho_t, abs=1e-8)


def test_single_regime_operator_vanishes(single_model, bench_spec):
    disc = Discretization(single_model, bench_spec, FAST)
    g = build_g0(single_model, bench_spec, FAST, disc)
    assert apply_F(g, single_model, disc).sup_norm() == 0


def test_lag_weights_integrate_piecewise_linear_exactly():
    lam, h, n = 1.7, 0.1, 10
    W = lag_weights(lam, h, n)
    nodes = np.arange(n + 1) * h
    for f in (lambda u: 1 + 0 * u, lambda u: 3 - 2 * u, lambda u: np.abs(u - 0.3)):
        for e in (1, 4, 10):
            ref = integrate.quad(lambda u: math.exp(-lam * u) * f(u), 0, e * h, points=[0.3], epsabs=1e-14)[0]
            assert W[e] @ f(nodes) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_lag_weights_small_rate_branch():
    W0 = lag_weights(1e-9, 0.1, 3)
    assert W0[3].sum() == pytest.approx(0.3, rel=1e-8)


def test_bound_and_count_formulas():
    assert perturbation_bound(0.01, 0.63) == pytest.approx(0.0270, abs=1e-4)
    assert perturbation_bound(-0.001, 0.5) == pytest.approx(0.002)
    assert apriori_iterations(0.5, 1.0, 1e-4) == math.ceil(math.log(0.5e-4) / math.log(0.5))
    assert apriori_iterations(0.0, 1.0, 1e-4) == 1
    assert apriori_iterations(0.5, 1e-6, 1e-4) == 1


def test_identical_regimes_collapse():
    twin = validate_model([[-3, 3], [0.5, -0.5]], [0.05, 0.05], [0.3, 0.3], 0.01)
    one = validate_model([[0.0]], [0.05], [0.3], 0.01)
    spec = OptionSpec(0, 0, 1, 100, 0)
    p2 = price(twin, spec, 0, FAST).price
    p1 = price(one, spec, 0, FAST).price
    assert p2 == pytest.approx(p1, rel=1e-3)


def test_permutation_symmetry():
    m = validate_model([[-1, 1], [2, -2]], [0.05, 0.08], [0.2, 0.4], 0.02)
    spec = OptionSpec(0, 0, 1, 100, 0)
    a = price(m, spec, 0, FAST)
    b = price(m.permuted([1, 0]), spec, 1, FAST)
    assert a.price == pytest.approx(b.price, rel=1e-12)
    np.testing.assert_allclose(a.regime_prices, b.regime_prices[::-1], rtol=1e-12)


def test_price_non_increasing_in_running_integral(bench_model):
    vals = [price(bench_model, OptionSpec(0, 0.5, 1, 100, a), 0, FAST).price for a in (0, 20, 40, 60)]
    assert np.all(np.diff(vals) <= 1e-9)
    assert max(vals) <= 100 * (1 + 1e-6)


def test_moment_bound_certified_by_simulation(bench_model):
    mx = max_sample(bench_model, 1, 1.0, 50_000, seed=4)
    se = mx.std(ddof=1) / math.sqrt(len(mx))
    assert mx.mean() + 3 * se <= n_bound(bench_model, 1.0, 0.0)


def test_in_progress_fixed_call_rejected(bench_model):
    with pytest.raises(SpecError):
        price_fixed_call_starting(bench_model, OptionSpec(0, 0.3, 1, 100, 0, 100, "fixed-call"), 0)
    with pytest.raises(SpecError):
        price(bench_model, OptionSpec(0, 0.3, 1, 100, 20, 100, "fixed-call"), 0)


def test_fixed_strike_engines_reduce_to_constant_coefficients(single_model):
    put = price_fixed_put(single_model, OptionSpec(0, 0.3, 1, 100, 20, 95, "fixed-put"), 0, FAST)
    assert put.price == pytest.approx(fixed_put_ns(single_model, 0, 0.3, 1, 0, 100, 20, 95), rel=1e-10)
    call = price_fixed_call_starting(single_model, OptionSpec(0, 0, 1, 100, 0, 100, "fixed-call-starting"), 0, FAST)
    assert call.price == pytest.approx(fixed_call_ns(single_model, 0, 0, 1, 0, 100, 0, 100), rel=1e-10)
    assert not put.F_active and not call.F_active


def test_terminal_time_returns_payoff(bench_model):
    assert price(bench_model, OptionSpec(0, 1, 1, 100, 90), 0).price == pytest.approx(10)
    assert price(bench_model, OptionSpec(0, 1, 1, 100, 90, 95, "fixed-put"), 0).price == pytest.approx(5)


def test_engine_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(n_time=1)
    with pytest.raises(ValueError):
        EngineConfig(epsilon=0)
