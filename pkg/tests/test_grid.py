import numpy as np
import pytest
from hypothesis import given, strategies as st

from landaulab.grid import (DistributionField, KineticCylinder, KineticPoint, PhaseGrid, VelocityGrid,
                            build_transform, cylinder_contains, enforce_support, galilean_shift,
                            galilean_shift_inverse, kinetic_transform, kinetic_transform_inverse, metric_dL,
                            metric_dL_arrays, metric_dP, support_cutoff)

finite = st.floats(-3, 3, allow_nan=False)


def point(d):
    return st.builds(lambda t, x, v: KineticPoint(t, np.array(x), np.array(v)),
                     st.floats(0, 2), st.lists(finite, min_size=d, max_size=d), st.lists(finite, min_size=d, max_size=d))


def test_cell_centered_nodes():
    g = VelocityGrid(2, 4.0, 8)
    assert g.spacing == 1.0
    np.testing.assert_allclose(g.nodes, np.arange(-3.5, 4.0, 1.0))
    assert g.shape == (8, 8) and g.cell_volume == 1.0
    assert g.velocities.shape == (2, 8, 8)
    assert g.nearest_index([0.4, -3.6]) == (4, 0)


@pytest.mark.parametrize("bad", [dict(dim=1, half_width=1, points_per_axis=8), dict(dim=2, half_width=-1, points_per_axis=8),
                                 dict(dim=2, half_width=1, points_per_axis=7)])
def test_grid_validation(bad):
    with pytest.raises(ValueError):
        VelocityGrid(**bad)


def test_phase_grid_shape():
    g = PhaseGrid(VelocityGrid(2, 4.0, 8), 1.0, 5)
    assert g.shape == (5, 8, 8) and not g.homogeneous
    assert g.dx == pytest.approx(0.2)
    with pytest.raises(ValueError):
        PhaseGrid(VelocityGrid(2, 4.0, 8), 1.0, None)


@pytest.mark.parametrize("dim,N", [(2, 32), (2, 64), (3, 16)])
def test_support_cutoff(dim, N):
    g = VelocityGrid(dim, 6.0, N)
    cut = support_cutoff(g)
    assert np.all((cut >= 0) & (cut <= 1))
    assert np.all(cut[~g.interior_mask(2)] == 0)
    assert np.all(cut[g.speed < 6.0 - 2 * g.spacing - max(4 * g.spacing, 0.75)] == 1)
    # radial monotonicity along an axis
    mid = (N // 2,) * (dim - 1)
    line = cut[(slice(N // 2, None),) + mid]
    assert np.all(np.diff(line) <= 1e-15)


def test_distribution_field_checks():
    g = PhaseGrid(VelocityGrid(2, 4.0, 16))
    vals = enforce_support(np.ones(g.shape), g.vgrid)
    f = DistributionField(g, vals)
    assert f.support_ok() and f.slices().shape == (1, 16, 16)
    with pytest.raises(ValueError):
        DistributionField(g, -np.ones(g.shape))
    with pytest.raises(ValueError):
        DistributionField(g, np.ones((4, 4)))


@given(point(2), point(2))
def test_galilean_shift_roundtrip(z0, z):
    assert galilean_shift_inverse(z0, galilean_shift(z0, z)).allclose(z, atol=1e-9)


@given(point(2), point(2), point(2))
def test_galilean_shift_is_group_action(a, b, z):
    left = galilean_shift(a, galilean_shift(b, z))
    right = galilean_shift(galilean_shift(a, b), z)
    assert left.allclose(right, atol=1e-9)


def test_cylinder_membership():
    Q = KineticCylinder(KineticPoint(1.0, [0.0, 0.0], [1.0, 0.0]), 0.5)
    assert cylinder_contains(Q, Q.center)
    assert cylinder_contains(Q, KineticPoint(0.9, [-0.1, 0.0], [1.1, 0.0]))
    assert not cylinder_contains(Q, KineticPoint(1.1, [0.0, 0.0], [1.0, 0.0]))   # future
    assert not cylinder_contains(Q, KineticPoint(0.9, [0.2, 0.0], [1.0, 0.0]))   # x outside r^3
    assert not cylinder_contains(Q, KineticPoint(0.9, [-0.1, 0.0], [1.6, 0.0]))  # v outside


@pytest.mark.parametrize("gamma", [-0.5, -1.0, -1.9])
@pytest.mark.parametrize("dim", [2, 3])
def test_transform_factors(gamma, dim):
    v0 = np.arange(1.0, dim + 1.0) * 2.0
    T = build_transform(v0, gamma)
    s = np.linalg.norm(v0)
    e = v0 / s
    np.testing.assert_allclose(T.matrix @ e, s ** (gamma / 2) * e)
    perp = np.zeros(dim)
    perp[0], perp[1] = -e[1], e[0]
    np.testing.assert_allclose(T.matrix @ perp, s ** (1 + gamma / 2) * perp, atol=1e-12)
    np.testing.assert_allclose(T.matrix @ T.inverse, np.eye(dim), atol=1e-12)
    assert T.determinant == pytest.approx(np.linalg.det(T.matrix))


def test_transform_needs_large_base():
    with pytest.raises(ValueError):
        build_transform([1.0, 0.0], -1.0)


@given(point(2), point(2), st.sampled_from([-0.5, -1.0, -1.5]))
def test_kinetic_transform_roundtrip(z0, z, gamma):
    z0 = KineticPoint(z0.t, z0.x, z0.v * 2.0)
    back = kinetic_transform_inverse(z0, kinetic_transform(z0, z, gamma), gamma)
    assert back.allclose(z, atol=1e-8)


@given(point(3), point(3))
def test_dP_symmetric_and_nonnegative(a, b):
    assert metric_dP(a, b) == pytest.approx(metric_dP(b, a), abs=1e-12)
    assert metric_dP(a, b) >= 0
    assert metric_dP(a, a) == 0


def test_dP_closed_form():
    z1 = KineticPoint(1.0, [1.0, 0.0], [1.0, 0.0])
    z2 = KineticPoint(0.0, [0.0, 0.0], [0.0, 0.0])
    # dt = 1, y = 1 - 1 * 1/2 = 1/2, dv = 1
    assert metric_dP(z1, z2) == pytest.approx(1.0 + 0.5 ** (1 / 3) + 1.0, rel=1e-15)


@given(point(2), point(2), st.integers(-3, 3))
def test_dP_scaling(a, b, k):
    r = 2.0**k
    da, db = (KineticPoint(r * r * z.t, r**3 * z.x, r * z.v) for z in (a, b))
    assert metric_dP(da, db) == pytest.approx(r * metric_dP(a, b), rel=1e-13, abs=1e-300)


def test_dL_matches_dP_at_low_speed():
    z1 = KineticPoint(0.3, [0.1, 0.0], [0.5, -0.2])
    z2 = KineticPoint(0.1, [0.0, 0.2], [-0.4, 0.3])
    assert metric_dL(z1, z2, -1.0) == pytest.approx(metric_dP(z1, z2), rel=1e-3)


@pytest.mark.parametrize("gamma", [-1.0, -1.5])
def test_dL_at_high_speed(gamma):
    a = KineticPoint(0.0, [0.0, 0.0], [6.0, 0.0])
    # perpendicular: the |v|^(1+g/2) weight cancels the transform
    perp = metric_dL(a, KineticPoint(0.0, [0.0, 0.0], [6.0, 0.1]), gamma)
    assert perp == pytest.approx(0.1, rel=1e-6)
    # parallel: the objective is |v_b| |dv|, smallest on the search ball edge
    par = metric_dL(a, KineticPoint(0.0, [0.0, 0.0], [6.1, 0.0]), gamma)
    assert par == pytest.approx((6.05 - 1.2) * 0.1, rel=1e-5)


def test_dL_arrays_vectorised():
    rng = np.random.default_rng(3)
    t, x, v = rng.random((2, 5)), rng.normal(size=(2, 5, 2)), 3 * rng.normal(size=(2, 5, 2))
    batch = metric_dL_arrays(t[0], x[0], v[0], t[1], x[1], v[1], -1.0)
    single = [metric_dL(KineticPoint(t[0, k], x[0, k], v[0, k]), KineticPoint(t[1, k], x[1, k], v[1, k]), -1.0)
              for k in range(5)]
    np.testing.assert_allclose(batch, single, rtol=1e-12)
