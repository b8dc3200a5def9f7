import math

import numpy as np
import pytest

from oracles import expected_integral
from rsasian.model import OptionSpec, RegimeModel, validate_model
from rsasian.montecarlo import (
    _chain_block,
    block_rng,
    mc_price,
    refinement_gap,
    sample_psi,
    simulate_chain,
    simulate_path,
)


def test_absorbing_state_never_jumps():
    m = validate_model([[0, 0], [1, -1]], [0.05, 0.08], [0.2, 0.4])
    rng = block_rng(1, 0)
    assert all(simulate_chain(m, 0, 0, 5, rng).jumps == 0 for _ in range(100))


def test_first_jump_time_is_exponential():
    m = validate_model([[-2, 2], [1, -1]], [0.05, 0.08], [0.2, 0.4])
    # horizon 20: P(no jump) = e^-40, so truncation is invisible
    times, _ = _chain_block(m, 0, 0, 20, 100_000, block_rng(2, 0))
    first = times[:, 1]
    se = first.std(ddof=1) / math.sqrt(len(first))
    assert abs(first.mean() - 0.5) < 3 * se


def test_transition_frequencies():
    Q = [[-3, 1, 2], [1, -1, 0], [1, 1, -2]]
    m = validate_model(Q, [0.05] * 3, [0.2] * 3)
    _, states = _chain_block(m, 0, 0, 20, 30_000, block_rng(3, 0))
    nxt = states[:, 1]
    for j, p in ((1, 1 / 3), (2, 2 / 3)):
        f = np.mean(nxt == j)
        assert abs(f - p) < 3 * math.sqrt(p * (1 - p) / len(nxt))
    sk = simulate_chain(m, 0, 0, 3, block_rng(3, 1))
    assert np.all(np.diff(sk.times) > 0)


def test_deterministic_path():
    # sigma = 0 is outside the validated domain; build the dataclass directly
    m = RegimeModel(np.zeros((1, 1)), np.array([0.05]), np.array([0.0]), 0.0)
    spec = OptionSpec(0, 0, 1, 100, 0)
    p = simulate_path(m, spec, 0, block_rng(0, 0))
    assert p.X_T == pytest.approx(100 * math.exp(0.05), rel=1e-12)
    assert p.A_T == pytest.approx(100 * math.expm1(0.05) / 0.05, rel=1e-7)
    assert p.discount == pytest.approx(math.exp(-0.05))
    est = mc_price(m, spec, 0, 1000, 0)
    assert est.se == 0
    assert est.mean == pytest.approx(math.exp(-0.05) * (100 * math.exp(0.05) - p.A_T), rel=1e-12)


def test_lognormal_moments():
    m = validate_model([[0.0]], [0.05], [0.3], 0.01)
    spec = OptionSpec(0, 0.2, 1, 100, 5)
    X = lambda X, A: X * math.exp(0.05 * 0.8)
    A = lambda X, A: A * math.exp(0.05 * 0.8)
    ex = mc_price(m, spec, 0, 100_000, 4, payoff_fn=X)
    ea = mc_price(m, spec, 0, 100_000, 4, payoff_fn=A)
    assert ex.zscore(100 * math.exp(0.04 * 0.8)) < 3
    assert ea.zscore(expected_integral(0.05, 0.01, 0.8, 100, 5)) < 3


def test_bit_identical_reproduction(bench_model, bench_spec):
    a = mc_price(bench_model, bench_spec, 0, 20_000, 42)
    b = mc_price(bench_model, bench_spec, 0, 20_000, 42)
    c = mc_price(bench_model, bench_spec, 0, 20_000, 43)
    assert (a.mean, a.se) == (b.mean, b.se)
    assert a.mean != c.mean


def test_standard_error_scaling(bench_model, bench_spec):
    ses = [mc_price(bench_model, bench_spec, 0, n, 5).se for n in (25_000, 100_000, 400_000)]
    for lo, hi in zip(ses[1:], ses[:-1]):
        assert hi / lo == pytest.approx(2, rel=0.2)


def test_antithetic_variance_ratio(single_model, bench_spec):
    plain = mc_price(single_model, bench_spec, 0, 100_000, 9)
    anti = mc_price(single_model, bench_spec, 0, 50_000, 9, antithetic=True)
    ratio = (anti.se / plain.se) ** 2
    print(f"antithetic variance ratio at equal path count: {ratio:.3f}")
    assert ratio < 0.75
    assert anti.zscore(plain.mean) < 4


def test_price_never_exceeds_spot(bench_model):
    for a in (0, 40):
        spec = OptionSpec(0, 0.3, 1, 100, a)
        est = mc_price(bench_model, spec, 1, 50_000, 8)
        assert est.mean <= 100 + 3 * est.se


def test_sample_psi_moments(bench_model):
    z, A = sample_psi(bench_model, 1, 0.2, 4.0, 0.5, 100_000, seed=6)
    nu = bench_model.nu(1)
    assert abs(z.mean() - nu * 0.5) < 3 * z.std(ddof=1) / math.sqrt(len(z))
    ez = np.exp(z)
    assert abs(ez.mean() - math.exp(0.06 * 0.5)) < 3 * ez.std(ddof=1) / math.sqrt(len(ez))
    assert np.all(A >= 4.0)


def test_substep_refinement_below_noise(bench_model):
    spec = OptionSpec(0, 0.3, 1, 100, 20)
    price = mc_price(bench_model, spec, 0, 200_000, 10)
    # same paths on both grids, so the gap is pure trapezoid bias
    gap = refinement_gap(bench_model, spec, 0, 200_000, 11)
    assert abs(gap.mean) + 3 * gap.se < price.se


def test_rejects_tiny_sample(bench_model, bench_spec):
    with pytest.raises(ValueError):
        mc_price(bench_model, bench_spec, 0, 1)
