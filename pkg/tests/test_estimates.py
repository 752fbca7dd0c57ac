import numpy as np
import pytest
from hypothesis import given, strategies as st

from landaulab.coefficients import coefficients_from_values
from landaulab.estimates import (BarrierSpec, PreconditionError, barrier_rate_map, bootstrap_exponents, branch_point,
                                 certified_alpha0, certify_gaussian_supersolution, eta, exponent_P, exponent_Q,
                                 fixed_point_Kstar, holder_quotient, kappa_derivative, kappa_weight, p_gamma,
                                 search_beta, verify_decay_envelope, verify_gaussian_propagation,
                                 verify_polynomial_barrier)
from landaulab.solver import SolverConfig, run

from runs import BOUNDS, initial, kernels, params


@pytest.fixture(scope="module")
def short_run():
    f0 = initial(6.0, 32, "bimodal")
    return run(f0, BOUNDS, SolverConfig(snapshot_stride=10), params(), kernels=kernels(2, 6.0, 32), n_steps=60)


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
def test_exponent_continuous_at_branch(d, alpha):
    g = branch_point(d)
    left = exponent_P(d, alpha, g - 1e-13)
    assert exponent_P(d, alpha, g) == pytest.approx(left, abs=1e-11)


def test_exponent_values():
    assert exponent_P(3, 0.0, -1.0) == pytest.approx(-1.6)
    assert exponent_P(3, 1.0, -1.0) == pytest.approx(-2.2)
    assert exponent_P(3, 0.0, -1.5) == pytest.approx(-1.3)
    assert exponent_Q(-0.5) == 0.0 and exponent_Q(-1.5) == pytest.approx(0.5)
    with pytest.raises(PreconditionError):
        exponent_P(3, 0.0, -2.0)
    with pytest.raises(PreconditionError):
        exponent_P(3, 1.5, -1.0)


def test_kstar_is_the_crossing():
    K = fixed_point_Kstar(-1.0, 3, 1.0)
    assert K == pytest.approx(4.0795956, rel=1e-7)
    assert p_gamma(K, -1.0, 3, 1.0) == pytest.approx(K, rel=1e-12)
    for k in (1.01 * K, 2 * K, 50 * K):
        assert k > p_gamma(k, -1.0, 3, 1.0)


@pytest.mark.parametrize("gamma", [-0.5, -1.5, -1.9])
def test_kstar_without_crossing(gamma):
    # 2C <= 1: every K > 1 already beats p_gamma
    assert fixed_point_Kstar(gamma, 3, 0.4) == 1.0
    assert fixed_point_Kstar(gamma, 3, 0.5) == 1.0
    with pytest.raises(PreconditionError):
        fixed_point_Kstar(gamma, 3, 0.0)


@pytest.mark.parametrize("d,gamma", [(2, -0.5), (2, -1.9), (3, -1.0), (3, -1.9), (3, 0.0)])
def test_bootstrap_reaches_one(d, gamma):
    rep = bootstrap_exponents(d, gamma)
    a = rep.alpha_sequence
    assert a[0] == 0.0 and a[-1] == 1.0
    assert np.all(np.diff(a) > 0)
    assert rep.steps == len(a) - 1 and rep.min_gain > 0


@given(st.floats(0.02, 3.0), st.floats(0.1, 5.0), st.sampled_from([-0.5, -1.0, -1.7]))
def test_kappa_derivative_matches_difference(t, beta, gamma):
    if abs(t - 1.0) < 1e-3:
        return
    e = 1e-6
    fd = (kappa_weight(t + e, beta, gamma) - kappa_weight(t - e, beta, gamma)) / (2 * e)
    assert kappa_derivative(t, beta, gamma) == pytest.approx(fd, rel=1e-6)


def test_kappa_continuous_at_one():
    assert kappa_weight(1.0, 2.0, -1.0) == pytest.approx(kappa_weight(1.0 + 1e-12, 2.0, -1.0))
    with pytest.raises(PreconditionError):
        kappa_weight(-1.0, 1.0, -1.0)


@pytest.mark.parametrize("p", [4.5, 6.0, 12.0])
def test_eta_profile(p):
    r = np.linspace(0.0, 3.0, 30001)
    e = eta(r, p)
    assert np.all(e[r <= 0.5] == 2.0)
    np.testing.assert_allclose(e[r >= 1.0], r[r >= 1.0] ** -p, rtol=1e-14)
    assert np.all(np.diff(e) <= 1e-14)
    # C^2: second differences have no jumps at the joins
    h = r[1] - r[0]
    d2 = np.diff(e, 2) / h**2
    for join in (0.5, 1.0):
        k = int(round(join / h)) - 1
        assert abs(d2[k + 2] - d2[k - 2]) < 0.05 * (1 + abs(d2[k]))


def test_search_beta():
    mask = np.ones(4, bool)
    maps = [np.array([0.3, 2.7, -1.0, 0.0]), np.array([1.0, 2.5, 0.2, 0.1])]
    assert search_beta(maps, mask) == pytest.approx(2.7, rel=1e-9)
    assert search_beta([np.array([-1.0, -3.0, 0.0, -2.0])], mask) == 0.0
    mask[1] = False
    assert search_beta(maps, mask) == pytest.approx(1.0, rel=1e-9)


def test_barrier_spec_validation():
    with pytest.raises(PreconditionError):
        BarrierSpec("polynomial-lower", 4.0).validate(2)
    with pytest.raises(PreconditionError):
        BarrierSpec("other", 5.0).validate(2)
    BarrierSpec("polynomial-lower", 4.5).validate(2)


def test_polynomial_barrier_short_run():
    f0 = initial(8.0, 32, "polynomial-tail", c0=2.0, p=5.0)
    rec = run(f0, BOUNDS, SolverConfig(snapshot_stride=10), params(), kernels=kernels(2, 8.0, 32), n_steps=30)
    v = verify_polynomial_barrier(rec, BarrierSpec("polynomial-lower", 5.0), kernels=kernels(2, 8.0, 32))
    assert v.holds and v.details["beta"] > 0 and v.measured_constant > 0
    # the chosen beta makes every residual nonnegative
    maps = [barrier_rate_map(coefficients_from_values(s.values, kernels(2, 8.0, 32)), 5.0) for s in rec.snapshots]
    inner = rec.snapshots[0].vgrid.speed <= 2.0
    assert min(np.min((v.details["beta"] - m)[inner]) for m in maps) >= 0
    with pytest.raises(PreconditionError):
        verify_polynomial_barrier(rec, BarrierSpec("polynomial-lower", 5.0), c0=1e6)


def test_gaussian_certificate_and_gate(short_run):
    # the certification window |v| <= L/2 needs L = 8 to separate the c phi term
    pack = kernels(2, 8.0, 32)
    co = coefficients_from_values(initial(8.0, 32, "bimodal").values, pack)
    a0 = certified_alpha0(co, -1.0)
    assert 0.1 < a0 < 1.0
    assert certified_alpha0(coefficients_from_values(short_run.snapshots[0].values, kernels(2, 6.0, 32)), -1.0) == 0.0
    good = certify_gaussian_supersolution(co, a0, -1.0)
    assert good.success and good.margin > 0 and np.isfinite(good.R0)
    # a0 is the upper end of the certified set
    assert not certify_gaussian_supersolution(co, 1.01 * a0, -1.0).success
    bad = certify_gaussian_supersolution(co, 8.0, -1.0)
    assert not bad.success and bad.margin <= 0 and np.isfinite(bad.margin)
    with pytest.raises(PreconditionError):
        verify_gaussian_propagation(short_run, C0=10.0, alpha=2 * a0, alpha0=a0, kernels=kernels(2, 6.0, 32))


def test_decay_envelope_is_a_pure_measurement(short_run):
    v = verify_decay_envelope(short_run)
    K = v.measured_constant
    assert v.holds and K > 0 and v.worst_point.t > 0
    assert verify_decay_envelope(short_run, K0=K).holds
    tight = verify_decay_envelope(short_run, K0=0.99 * K)
    assert not tight.holds and tight.measured_constant == K
    first = short_run.snapshots[:1]
    with pytest.raises(PreconditionError):
        verify_decay_envelope(type(short_run)(**{**short_run.__dict__, "snapshots": first}))


def test_holder_preconditions_and_determinism(short_run):
    with pytest.raises(PreconditionError):
        holder_quotient(short_run, min_snapshots=50)
    with pytest.raises(PreconditionError):
        holder_quotient(short_run, t_min=-1.0)
    a = holder_quotient(short_run, alpha=0.1, n_pairs=3000, seed=4)
    b = holder_quotient(short_run, alpha=0.1, n_pairs=3000, seed=4)
    assert a.beta_fit == b.beta_fit and a.constant == b.constant
    assert 0 < a.beta_fit <= 1 and a.mode == "gaussian-weight mode"
    assert a.strata["dL_le_near"] >= 100
    assert holder_quotient(short_run, n_pairs=3000, seed=4).mode == "polynomial-weight mode"
