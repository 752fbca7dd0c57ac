import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from landaulab.coefficients import PotentialParams, coefficients_from_values, precompute_kernels
from landaulab.grid import DistributionField, PhaseGrid, VelocityGrid
from landaulab.hydro import HydroBounds, hydro_state
from landaulab.initial import make_initial, maxwellian_values
from landaulab.solver import (AdmissibilityError, CFLError, LandauOperator, MonotoneDiffusion, SolverConfig,
                              cfl_limit, check_discrete_maximum_principle, collision_step, face_fluxes,
                              flux_divergence, flux_sum, limit_fluxes, nondivergence_rhs, run,
                              selling_decomposition, shift_rows, transport_step)

PARAMS = PotentialParams.for_dim(2, -1.0)
BOUNDS = HydroBounds(0.25, 4.0, 50.0, 10.0)


def setup(N=32, L=6.0, preset="bimodal", **kw):
    vg = VelocityGrid(2, L, N)
    pack = precompute_kernels(vg, PotentialParams.for_dim(2, kw.pop("gamma", -1.0)))
    f = make_initial(PhaseGrid(vg), preset, **kw)
    return vg, pack, f


@given(arrays(float, (16, 16), elements=st.floats(0, 1)), st.sampled_from(["centered", "upwind"]))
def test_flux_divergence_conserves_mass(vals, adv):
    vg = VelocityGrid(2, 4.0, 16)
    vals[~vg.interior_mask(1)] = 0.0
    co = coefficients_from_values(vals, precompute_kernels(vg, PARAMS))
    q = flux_divergence(vals, co, adv)
    assert abs(q.sum()) <= 1e-12 * (1 + np.abs(q).sum())
    assert np.all(q[~vg.interior_mask(1)] == 0)


@given(arrays(float, (12, 12), elements=st.floats(0, 1)), arrays(float, (11, 12), elements=st.floats(-5, 5)),
       arrays(float, (12, 11), elements=st.floats(-5, 5)), st.floats(1e-3, 10))
def test_limiter_preserves_sign_and_mass(base, fx, fy, dt):
    vg = VelocityGrid(2, 3.0, 12)
    # the operator never puts flux on faces touching the outer layer
    for flux in (fx, fy.T):
        flux[[0, -1], :] = 0.0
        flux[:, [0, -1]] = 0.0
    limited, n = limit_fluxes(base, [fx, fy], dt, vg)
    new = base + dt * flux_sum(limited, vg)
    assert np.all(new >= -1e-12 * (1 + base.max()))
    assert abs(new.sum() - base.sum()) <= 1e-11 * (1 + base.sum() + dt * (np.abs(fx).sum() + np.abs(fy).sum()))
    for lf, f in zip(limited, (fx, fy)):
        assert np.all(np.abs(lf) <= np.abs(f) + 1e-15)


def test_limiter_inactive_for_small_steps():
    vg, pack, f = setup()
    co = coefficients_from_values(f.values, pack)
    fl = face_fluxes(f.values, co)
    limited, n = limit_fluxes(f.values + 1.0, fl, 1e-6, vg)
    assert n == 0
    for a, b in zip(limited, fl):
        np.testing.assert_array_equal(a, b)


def test_forms_agree_to_second_order():
    errs = []
    for N in (64, 128, 256):
        vg, pack, f = setup(N=N, L=8.0)
        co = coefficients_from_values(f.values, pack)
        inner = vg.speed <= 4.0
        diff = flux_divergence(f.values, co) - nondivergence_rhs(f.values, co)
        errs.append(np.max(np.abs(diff[inner])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8), orders


@pytest.mark.parametrize("form", ["divergence-flux", "non-divergence"])
def test_maxwellian_is_near_equilibrium(form):
    res = []
    for N in (32, 64):
        vg, pack, f = setup(N=N, L=8.0, preset="maxwellian")
        op = LandauOperator(vg, PARAMS, SolverConfig(form=form), pack)
        q = op.rhs(f.values)
        res.append(np.max(np.abs(q[vg.speed <= 4])) / np.max(f.values))
    assert res[1] < res[0] / 3.5


def test_cfl_limit_enforced():
    vg, pack, f = setup()
    co = coefficients_from_values(f.values, pack)
    with pytest.raises(CFLError):
        collision_step(f, co, SolverConfig(), PARAMS, pack, dt=2 * cfl_limit(co))
    with pytest.raises(CFLError):
        run(f, None, SolverConfig(dt=2 * cfl_limit(co), t_end=0.1), PARAMS, kernels=pack)


def test_rk2_is_second_order_in_time():
    vg, pack, f = setup()
    co = coefficients_from_values(f.values, pack)
    T = 16 * 0.25 * cfl_limit(co)
    sols = []
    for n in (16, 32, 64, 128):
        rec = run(f, None, SolverConfig(dt=T / n, t_end=T, snapshot_stride=n, positivity_limiter=False),
                  PARAMS, kernels=pack)
        sols.append(rec.snapshots[-1].values)
    e = [np.max(np.abs(a - b)) for a, b in zip(sols[:-1], sols[1:])]
    assert np.log2(e[0] / e[1]) > 1.8 and np.log2(e[1] / e[2]) > 1.8


def test_short_run_conserves_and_dissipates():
    vg, pack, f = setup()
    rec = run(f, BOUNDS, SolverConfig(snapshot_stride=50), PARAMS, kernels=pack, n_steps=200)
    mass = rec.trace_array("mass")
    ent = rec.trace_array("entropy")
    assert np.max(np.abs(mass - mass[0])) <= 1e-13 * mass[0]
    assert np.all(np.diff(ent) <= 1e-12 * np.abs(ent[:-1]))
    assert rec.clamps == 0
    assert [round(t / rec.dt) for t in rec.times] == [0, 50, 100, 150, 200]


def test_upwind_entropy_is_monotone_through_relaxation():
    # centered face values are second order but not entropy stable near equilibrium
    vg, pack, f = setup()
    rec = run(f, BOUNDS, SolverConfig(t_end=2.5, snapshot_stride=10**6, advection="upwind"), PARAMS, kernels=pack)
    ent = rec.trace_array("entropy")
    assert np.all(np.diff(ent) <= 1e-12 * np.abs(ent[:-1]))
    assert rec.clamps == 0


def test_frozen_run_matches_manual_steps():
    vg, pack, f = setup()
    co = coefficients_from_values(f.values, pack)
    cfg = SolverConfig(freeze_coefficients=True, snapshot_stride=5)
    rec = run(f, None, cfg, PARAMS, kernels=pack, n_steps=5)
    g = f
    for _ in range(5):
        g, _, _ = collision_step(g, co, cfg, PARAMS, pack, dt=rec.dt)
    np.testing.assert_allclose(rec.snapshots[-1].values, g.values, rtol=0, atol=1e-15)


def test_admissibility_gate():
    vg, pack, f = setup()
    with pytest.raises(AdmissibilityError):
        run(f, HydroBounds(2.0, 4.0, 50.0, 10.0), SolverConfig(), PARAMS, kernels=pack, n_steps=1)


@given(arrays(float, (8, 5), elements=st.floats(0, 1)), st.floats(-20, 20))
def test_shift_rows_conserves_and_is_periodic(vals, s):
    out = shift_rows(vals, np.full(5, s))
    np.testing.assert_allclose(out.sum(axis=0), vals.sum(axis=0), rtol=1e-12, atol=1e-12)
    back = shift_rows(shift_rows(vals, np.full(5, 8.0)), np.full(5, -8.0))
    np.testing.assert_allclose(back, vals, atol=1e-14)


def test_integer_shift_is_a_roll():
    vals = np.arange(24.0).reshape(6, 4)
    np.testing.assert_array_equal(shift_rows(vals, np.full(4, 2.0)), np.roll(vals, 2, axis=0))


def test_transport_and_inhomogeneous_run():
    vg = VelocityGrid(2, 6.0, 24)
    g = PhaseGrid(vg, 2.0, 8)
    f = make_initial(g, "maxwellian", density_modulation=0.2)
    with pytest.raises(ValueError):
        transport_step(make_initial(PhaseGrid(vg), "maxwellian"), 0.1)
    moved = transport_step(f, 0.05)
    assert moved.values.sum() == pytest.approx(f.values.sum(), rel=1e-13)
    pack = precompute_kernels(vg, PARAMS)
    rec = run(f, BOUNDS, SolverConfig(snapshot_stride=20), PARAMS, kernels=pack, n_steps=40)
    total = [hydro_state(s).mass.sum() for s in rec.snapshots]
    np.testing.assert_allclose(total, total[0], rtol=1e-12)
    # free streaming damps the density modulation
    rho = hydro_state(rec.snapshots[-1]).mass
    assert np.ptp(rho) < np.ptp(hydro_state(f).mass)


def spd(dim):
    return arrays(float, (dim, dim), elements=st.floats(-1, 1)).map(lambda m: m @ m.T + 1e-2 * np.eye(dim))


@given(spd(2))
def test_selling_2d(a):
    w, e = selling_decomposition(a[None])
    assert np.all(w >= 0)
    rec = np.einsum("mk,mkd,mke->mde", w, e.astype(float), e.astype(float))[0]
    np.testing.assert_allclose(rec, a, atol=1e-10 * np.abs(a).max())


@given(spd(3))
def test_selling_3d(a):
    w, e = selling_decomposition(a[None])
    assert np.all(w >= 0)
    rec = np.einsum("mk,mkd,mke->mde", w, e.astype(float), e.astype(float))[0]
    np.testing.assert_allclose(rec, a, atol=1e-10 * np.abs(a).max())


def test_monotone_diffusion_keeps_sign():
    vg, pack, f = setup(N=32, L=6.0, preset="maxwellian")
    co = coefficients_from_values(f.values, pack)
    op = MonotoneDiffusion(co.a_bar, vg)
    g = -maxwellian_values(vg, 1.0, 0.3)
    dt = 0.9 * op.max_stable_dt()
    for _ in range(200):
        g = g + dt * op.apply(g)
        assert g.max() <= 0.0


def test_monotone_diffusion_consistency():
    # on a quadratic, the stencil reproduces a : D^2 g exactly away from the boundary
    vg, pack, f = setup(N=32, L=6.0, preset="maxwellian")
    co = coefficients_from_values(f.values, pack)
    op = MonotoneDiffusion(co.a_bar, vg)
    v = vg.velocities
    g = v[0] ** 2 + 3 * v[0] * v[1] - v[1] ** 2
    ref = 2 * co.a_bar[0, 0] + 6 * co.a_bar[0, 1] - 2 * co.a_bar[1, 1]
    inner = vg.interior_mask(6)
    np.testing.assert_allclose(op.apply(g)[inner], ref[inner], rtol=1e-9)


def test_max_principle_rejects_positive_input():
    vg, pack, f = setup(N=16, L=4.0, preset="maxwellian")
    rec = run(f, None, SolverConfig(snapshot_stride=2), PARAMS, kernels=pack, n_steps=2)
    v = check_discrete_maximum_principle(rec, np.ones(vg.shape), kernels=pack)
    assert v.input_violation and not v.holds
    v = check_discrete_maximum_principle(rec, -f.values, kernels=pack)
    assert v.holds and v.max_ratio <= 0
    with pytest.raises(ValueError):
        check_discrete_maximum_principle(rec, -f.values, mode="other", kernels=pack)


@pytest.mark.parametrize("bad", [dict(form="x"), dict(advection="x"), dict(cfl_safety=0), dict(dt=-1.0),
                                 dict(snapshot_stride=0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SolverConfig(**bad)


def test_negative_field_rejected():
    vg = VelocityGrid(2, 4.0, 8)
    with pytest.raises(ValueError):
        DistributionField(PhaseGrid(vg), -np.ones(vg.shape))
