import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import theta_reference
from rsasian.checks import chi_square_psi
from rsasian.errors import AccuracyError
from rsasian.model import validate_model
from rsasian.yor import (
    LogThetaTable,
    PsiParams,
    QuadratureConfig,
    bin_probabilities,
    f_cond,
    f_cond_mass,
    f_cond_mean,
    log_theta,
    full_argument_identities,
    psi,
    psi_nodes,
    theta,
)


@pytest.mark.parametrize("r,t", [(1, 0.5), (0.1, 2), (3, 0.3), (10, 2), (1, 1), (1, 0.1), (20, 0.05), (0.1, 0.5)])
def test_theta_matches_multiprecision_integral(r, t):
    _, ref_log = theta_reference(r, t)
    assert float(log_theta(r, t)) == pytest.approx(ref_log, rel=1e-10, abs=1e-10)


def test_theta_positive_on_grid():
    r, t = np.meshgrid([0.1, 1, 10], [0.1, 0.5, 2])
    vals = theta(r, t)
    assert np.all(vals > 0)


def test_theta_handles_tiny_time_without_overflow():
    # the raw integral would need exp(pi^2 / 2t) ~ 1e2143 here
    v = log_theta(np.array([0.5, 1.0, 5.0]), 1e-3)
    assert np.all(np.isfinite(v))


def test_theta_rejects_bad_arguments():
    with pytest.raises(ValueError):
        log_theta(0.0, 1.0)
    with pytest.raises(ValueError):
        log_theta(1.0, -1.0)


@pytest.mark.parametrize("t", [5e-4, 0.05, 0.5, 2.0])
def test_log_theta_table_tracks_direct_evaluation(t):
    table = LogThetaTable(t, -4, 6)
    x = np.random.default_rng(1).uniform(-4, 6, 200)
    assert np.max(np.abs(table(x) - log_theta(np.exp(x), t))) < 1e-8


@pytest.mark.parametrize("t,z", [(0.25, 0.0), (0.5, 0.3), (1.0, -0.5)])
def test_f_cond_normalizes(t, z):
    # independent of the panel machinery: adaptive quadrature over w
    f = lambda s: float(f_cond(t, z, math.exp(s))) * math.exp(s)
    val = integrate.quad(f, -12, 6, limit=400, epsabs=1e-12)[0]
    assert val == pytest.approx(1, abs=1e-4)
    assert f_cond_mass(t, z) == pytest.approx(1, abs=1e-6)


def test_f_cond_unconditional_mean():
    assert f_cond_mean(1.0, 0.0) == pytest.approx((math.e**2 - 1) / 2, abs=1e-6)
    nu, t = -0.3, 0.7
    assert f_cond_mean(t, nu) == pytest.approx(math.expm1((2 * nu + 2) * t) / (2 * nu + 2), rel=1e-6)


def test_f_cond_zero_for_nonpositive_w():
    assert np.all(f_cond(0.5, 0.1, np.array([-1.0, 0.0])) == 0)


def test_theta_against_simulated_joint_law():
    """Kernel estimate of the (B_t, A_t) density at (0, 1) recovers theta_1(0.5)."""
    t, n_steps, N = 0.5, 500, 1_000_000
    dt = t / n_steps
    rng = np.random.Generator(np.random.Philox(key=2024))
    hz, hw = 0.04, 0.04
    hits = 0
    for _ in range(N // 20_000):
        b = np.cumsum(rng.standard_normal((20_000, n_steps)) * math.sqrt(dt), axis=1)
        e = np.exp(2 * b)
        A = dt * (e[:, :-1].sum(axis=1) + 0.5 * (1 + e[:, -1]))
        hits += np.count_nonzero((np.abs(b[:, -1]) < hz) & (np.abs(A - 1) < hw))
    area = 4 * hz * hw
    dens = hits / N / area
    se = math.sqrt(hits) / N / area
    est, est_se = math.e * dens, math.e * se
    assert abs(est - float(theta(1.0, 0.5))) < 3 * est_se


def test_psi_zero_below_running_integral():
    p = PsiParams(0, 0.1, 5.0, 0.5, 0.3, 0.02)
    assert np.all(psi(p, np.array([0.0, 0.1]), np.array([4.0, 5.0])) == 0)


def test_psi_nodes_identities_two_regime(bench_model):
    for i in range(2):
        nodes = psi_nodes(PsiParams.from_model(bench_model, i, 0.2, 3.0, 0.5))
        assert nodes.weights.sum() == pytest.approx(1, abs=1e-4)
        assert np.all(nodes.a_prime > 3.0)
        assert nodes.integrate(lambda z, a: (a < 3.0).astype(float)) == 0


def test_exponential_moment_value():
    m = validate_model([[0]], [0.05], [0.25], 0.02)
    nodes = psi_nodes(PsiParams.from_model(m, 0, 0.0, 0.0, 1.0))
    assert nodes.integrate(lambda z, a: np.exp(z)) == pytest.approx(1.030455, abs=1e-6)


def test_node_weights_carry_positive_density():
    p = PsiParams(0, 0.0, 0.0, 0.5, 0.4, 0.02)
    nodes = psi_nodes(p)
    k = int(np.argmax(nodes.weights))
    assert float(psi(p, nodes.z_prime[k], nodes.a_prime[k])) > 0
    assert np.all(nodes.weights >= 0)


@settings(max_examples=12)
@given(st.floats(-2, 2), st.floats(0.05, 2.0), st.integers(0, 1), st.floats(0, 50))
def test_normalization_and_moment_on_lattice(z, dt, i, a):
    model = validate_model([[-1, 1], [1, -1]], [0.05, 0.08], [0.2, 0.4], 0.02)
    nodes = psi_nodes(PsiParams.from_model(model, i, z, a, dt))
    mass, exp_moment = nodes.identities().values()
    assert abs(mass[0] - 1) < 1e-4
    assert abs(exp_moment[0] - exp_moment[1]) < 1e-4


@settings(max_examples=20)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(0.01, 3), st.floats(-0.6, 0.6))
def test_scaling_invariance(z, h, inc, zp):
    p = PsiParams(0, z, 1.0, 0.5, 0.3, 0.01)
    q = PsiParams(0, z + h, 1.0, 0.5, 0.3, 0.01)
    # density in w is invariant; psi itself carries the Jacobian c
    lhs = psi(p, zp, 1.0 + inc) / p.c
    rhs = psi(q, zp, 1.0 + inc * math.exp(h)) / q.c
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


def test_full_argument_reading_is_not_a_density():
    p = PsiParams(0, 0.0, 0.0, 0.5, 0.3, 0.02)
    alt = full_argument_identities(p)
    assert alt["mass"] == pytest.approx(2 * math.sqrt(p.t_prime), rel=1e-6)
    assert abs(alt["mass"] - 1) > 0.5


def test_bin_probabilities_sum_to_one():
    p = PsiParams(0, 0.0, 0.0, 0.5, 0.3, 0.02)
    P = bin_probabilities(p, [-np.inf, -0.1, 0, 0.1, np.inf], [0, 0.3, 0.5, 0.7, np.inf])
    assert P.shape == (4, 4)
    assert np.all(P >= 0)
    assert P.sum() == pytest.approx(1, abs=1e-6)


def test_chi_square_against_simulation(bench_model):
    res = chi_square_psi(bench_model, 1, 0.1, 2.0, 0.5, N=200_000, seed=17, bins=8)
    assert res.passed, res


def test_accuracy_error_on_impossible_tolerance():
    cfg = QuadratureConfig(tol=1e-15, zeta_panels=1, zeta_order=3, w_panels=1, w_order=3)
    with pytest.raises(AccuracyError):
        psi_nodes(PsiParams(0, 0.0, 0.0, 0.5, 0.3, 0.02), cfg)


def test_small_time_fallback_is_flagged():
    p = PsiParams(0, 0.0, 0.0, 1e-6, 0.2, 0.03)
    nodes = psi_nodes(p)
    assert nodes.fallback
    assert nodes.weights.sum() == pytest.approx(1)


def test_small_time_analytic_nodes_still_accurate():
    p = PsiParams(0, 0.0, 0.0, 1e-4, 0.2, 0.03)
    nodes = psi_nodes(p)
    assert not nodes.fallback
    mass, em = nodes.identities().values()
    assert abs(mass[0] - 1) < 1e-8 and abs(em[0] - em[1]) < 1e-8


def test_kink_expectation_matches_refined_rule():
    p = PsiParams(0, 0.2, 0.3, 0.5, 0.4, 0.02)
    ref = psi_nodes(p, QuadratureConfig(zeta_panels=32, w_panels=16))
    mid = psi_nodes(p, QuadratureConfig(zeta_panels=16))
    default = psi_nodes(p)
    for c0, c1, ci in [(0.5, -1, 0.8), (-0.3, 0.0, 1.0), (1.2, -1, -0.7)]:
        args = (np.array(c0), np.array(c1), ci)
        b = float(ref.expected_positive_part(*args))
        assert float(mid.expected_positive_part(*args)) == pytest.approx(b, abs=1e-6)
        # default panels trade ~2e-5 here for speed; engine prices move < 1e-5
        assert float(default.expected_positive_part(*args)) == pytest.approx(b, abs=3e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(zeta_order=1)
    with pytest.raises(ValueError):
        QuadratureConfig(tol=0)
