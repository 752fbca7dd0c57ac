"""Landau coefficients by zero-padded FFT convolution, plus bound certificates.

The three kernels are

* ``a``: ``(I - w w^T/|w|^2) |w|^(g+2)``  (homogeneous of degree ``g + 2``)
* ``b``: ``|w|^g w``                       (degree ``g + 1``)
* ``c``: ``|w|^g``                         (degree ``g``)

Every kernel entry on the offset lattice is the exact average of the kernel
over the lattice cell.  Cells near the singularity are integrated through
their faces: for ``K`` homogeneous of degree ``s``, ``div(w K) = (d + s) K``,
so the cell integral equals ``(1/(d+s))`` times the boundary flux of ``w K``,
whose integrand is smooth on every face.  Far cells use tensor Gauss-Legendre.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.fft
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .grid import DistributionField, KineticPoint, VelocityGrid, build_transform

#: calibrated constant for the divergence-identity tolerance ``C_ID * h^2``
#: (normalised residuals); ~10x the worst Maxwellian value for gamma in [-1.9, 0]
C_ID = 5.0

#: floor used by the lower-bound certificates
LOWER_FLOOR = 1e-3


class SupportError(ValueError):
    """The distribution does not vanish on the outer velocity layer."""


@dataclass(frozen=True)
class PotentialParams:
    gamma: float
    a_const: float
    b_const: float
    c_const: float

    @classmethod
    def for_dim(cls, dim: int, gamma: float, a_const: float = 1.0,
                b_const: Optional[float] = None, c_const: Optional[float] = None) -> "PotentialParams":
        """Defaults make ``b_i = -d_j a_ij`` and ``div b = c`` hold exactly."""
        if b_const is None:
            b_const = (dim - 1) * a_const
        if c_const is None:
            c_const = (dim - 1) * (dim + gamma) * a_const
        return cls(float(gamma), float(a_const), float(b_const), float(c_const))


def _check_gamma(gamma: float):
    if not -2.0 < gamma <= 0.0:
        raise ValueError(f"gamma must lie in (-2, 0], got {gamma}")


def sym_pairs(dim: int) -> list:
    """Upper-triangular index pairs, the storage order of matrix components."""
    return [(i, j) for i in range(dim) for j in range(i, dim)]


def landau_kernels(w: np.ndarray, gamma: float):
    """Pointwise kernels at velocities ``w`` (last axis = components).

    Returns ``(A, B, C)`` with shapes ``(..., d, d)``, ``(..., d)``, ``(...)``;
    the kernel constants are not applied.
    """
    w = np.asarray(w, dtype=float)
    d = w.shape[-1]
    r2 = np.sum(w * w, axis=-1)
    r = np.sqrt(r2)
    rg = r**gamma
    A = (r2 * rg)[..., None, None] * np.eye(d) - rg[..., None, None] * w[..., :, None] * w[..., None, :]
    B = rg[..., None] * w
    return A, B, rg


def _kernel_components(w: np.ndarray, gamma: float) -> np.ndarray:
    """Stack of all independent kernel components, shape ``(ncomp, ...)``.

    Order: a (upper triangle), b (d entries), c.
    """
    d = w.shape[-1]
    r2 = np.sum(w * w, axis=-1)
    rg = r2 ** (gamma / 2.0)
    comps = []
    for i, j in sym_pairs(d):
        comp = -rg * w[..., i] * w[..., j]
        if i == j:
            comp = comp + rg * r2
        comps.append(comp)
    for i in range(d):
        comps.append(rg * w[..., i])
    comps.append(rg)
    return np.stack(comps)


def _degrees(dim: int, gamma: float) -> np.ndarray:
    na = dim * (dim + 1) // 2
    return np.array([gamma + 2.0] * na + [gamma + 1.0] * dim + [gamma])


def _face_cell_integrals(centers: np.ndarray, gamma: float, order: int) -> np.ndarray:
    """Exact integrals of all kernel components over unit cells at ``centers``.

    ``centers``: (M, d) integer offsets.  Returns (ncomp, M).
    """
    M, d = centers.shape
    xg, wg = np.polynomial.legendre.leggauss(order)
    xg = xg / 2.0
    wg = wg / 2.0
    # tensor rule on a (d-1)-dimensional unit face
    fx = np.stack(np.meshgrid(*([xg] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    fw = np.prod(np.stack(np.meshgrid(*([wg] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1), axis=1)
    deg = _degrees(d, gamma)
    total = np.zeros((deg.size, M))
    for k in range(d):
        others = [a for a in range(d) if a != k]
        for sign in (-1.0, 1.0):
            c = centers[:, k] + sign * 0.5
            pts = np.empty((M, fx.shape[0], d))
            pts[..., k] = c[:, None]
            for col, a in enumerate(others):
                pts[..., a] = centers[:, a][:, None] + fx[None, :, col]
            vals = _kernel_components(pts, gamma)  # (ncomp, M, Q)
            face = vals @ fw  # (ncomp, M)
            total += face * (sign * c)[None, :]
    return total / (d + deg)[:, None]


def _gauss_cell_integrals(centers: np.ndarray, gamma: float, order: int) -> np.ndarray:
    M, d = centers.shape
    xg, wg = np.polynomial.legendre.leggauss(order)
    xg = xg / 2.0
    wg = wg / 2.0
    total = np.zeros((_degrees(d, gamma).size, M))
    for idx in np.ndindex(*([order] * d)):
        off = np.array([xg[i] for i in idx])
        wt = np.prod([wg[i] for i in idx])
        total += wt * _kernel_components(centers + off, gamma)
    return total


@lru_cache(maxsize=16)
def _unit_table(dim: int, gamma: float, N: int) -> np.ndarray:
    """Cell-averaged kernel components for unit spacing on the doubled lattice.

    Shape ``(ncomp, 2N, ..., 2N)`` in FFT (wrap-around) order.
    """
    offs = np.fft.fftfreq(2 * N, 1.0 / (2 * N)).astype(float)
    grids = np.meshgrid(*([offs] * dim), indexing="ij")
    centers = np.stack(grids, axis=-1).reshape(-1, dim)
    near_radius, face_order = (8, 24) if dim == 2 else (5, 14)
    near = np.max(np.abs(centers), axis=1) <= near_radius
    table = np.empty((_degrees(dim, gamma).size, centers.shape[0]))
    table[:, near] = _face_cell_integrals(centers[near], gamma, face_order)
    far = ~near
    if np.any(far):
        # chunk to bound memory in 3-D
        idx = np.nonzero(far)[0]
        for s in range(0, idx.size, 1 << 18):
            sel = idx[s:s + (1 << 18)]
            table[:, sel] = _gauss_cell_integrals(centers[sel], gamma, 4)
    table.setflags(write=False)
    return table.reshape((-1,) + (2 * N,) * dim)


@dataclass(frozen=True)
class KernelPack:
    """Scaled kernel tables on the doubled lattice and their spectra."""

    grid: VelocityGrid
    params: PotentialParams
    table: np.ndarray = field(repr=False)     # (ncomp, 2N, ..., 2N), constants applied
    spectrum: np.ndarray = field(repr=False)  # rfftn of table over the lattice axes

    @property
    def n_a(self) -> int:
        d = self.grid.dim
        return d * (d + 1) // 2


def precompute_kernels(grid: VelocityGrid, params: PotentialParams, workers: Optional[int] = None) -> KernelPack:
    _check_gamma(params.gamma)
    d, N, h = grid.dim, grid.points_per_axis, grid.spacing
    unit = _unit_table(d, float(params.gamma), N)
    deg = _degrees(d, params.gamma)
    na = d * (d + 1) // 2
    consts = np.array([params.a_const] * na + [params.b_const] * d + [params.c_const])
    # cell average at spacing h is h^s times the unit-spacing average
    scale = consts * h**deg
    table = unit * scale.reshape((-1,) + (1,) * d)
    axes = tuple(range(1, d + 1))
    spec = scipy.fft.rfftn(table, axes=axes, workers=workers)
    return KernelPack(grid, params, table, spec)


@dataclass
class CoefficientField:
    """``a_bar`` (d, d, *S), ``b_bar`` (d, *S), ``c_bar`` (*S) with ``S`` the field shape."""

    grid: VelocityGrid
    a_bar: np.ndarray
    b_bar: np.ndarray
    c_bar: np.ndarray

    def __add__(self, other: "CoefficientField") -> "CoefficientField":
        return CoefficientField(self.grid, self.a_bar + other.a_bar, self.b_bar + other.b_bar, self.c_bar + other.c_bar)

    def scaled(self, s: float) -> "CoefficientField":
        return CoefficientField(self.grid, s * self.a_bar, s * self.b_bar, s * self.c_bar)

    def a_nodes(self) -> np.ndarray:
        """``a_bar`` with the matrix axes moved last, shape ``(*S, d, d)``."""
        return np.moveaxis(self.a_bar, (0, 1), (-2, -1))

    def spectral_radius(self) -> float:
        a = self.a_bar
        if self.grid.dim == 2:
            half_tr = 0.5 * (a[0, 0] + a[1, 1])
            return float(np.max(half_tr + np.hypot(0.5 * (a[0, 0] - a[1, 1]), a[0, 1])))
        return float(np.max(np.linalg.eigvalsh(self.a_nodes())))


def _unpack(comps: np.ndarray, d: int):
    na = d * (d + 1) // 2
    shape = comps.shape[1:]
    a = np.empty((d, d) + shape)
    for n, (i, j) in enumerate(sym_pairs(d)):
        a[i, j] = comps[n]
        a[j, i] = comps[n]
    b = comps[na:na + d]
    c = comps[na + d]
    return a, b, c


def convolve_values(values: np.ndarray, kernels: KernelPack, workers: Optional[int] = None) -> np.ndarray:
    """All kernel components convolved with ``values`` (velocity axes last).

    Returns shape ``(ncomp,) + values.shape``.
    """
    g = kernels.grid
    d, N = g.dim, g.points_per_axis
    lead = values.shape[:-d]
    axes = tuple(range(values.ndim - d, values.ndim))
    padded_shape = (2 * N,) * d
    F = scipy.fft.rfftn(values, s=padded_shape, axes=axes, workers=workers)
    spec = kernels.spectrum.reshape((kernels.spectrum.shape[0],) + (1,) * len(lead) + kernels.spectrum.shape[1:])
    out_axes = tuple(a + 1 for a in axes)
    full = scipy.fft.irfftn(spec * F[None], s=padded_shape, axes=out_axes, workers=workers)
    window = (slice(None),) * (1 + len(lead)) + (slice(0, N),) * d
    return full[window] * g.cell_volume


def compute_coefficients(f: DistributionField, kernels: KernelPack, workers: Optional[int] = None,
                         check_support: bool = True) -> CoefficientField:
    if f.vgrid != kernels.grid:
        raise ValueError("field and kernel pack live on different velocity grids")
    if check_support and not f.support_ok():
        raise SupportError("f must vanish on the outermost velocity cell layer")
    comps = convolve_values(f.values, kernels, workers)
    a, b, c = _unpack(comps, f.vgrid.dim)
    return CoefficientField(f.vgrid, a, b, c)


def coefficients_from_values(values: np.ndarray, kernels: KernelPack, workers: Optional[int] = None) -> CoefficientField:
    a, b, c = _unpack(convolve_values(values, kernels, workers), kernels.grid.dim)
    return CoefficientField(kernels.grid, a, b, c)


def direct_coefficients_at(values: np.ndarray, kernels: KernelPack, index: Sequence[int]):
    """Brute-force lattice sum at one node with the same discrete kernels.

    ``values`` is a single velocity slice.  Returns ``(a, b, c)`` at ``index``.
    """
    g = kernels.grid
    d, N = g.dim, g.points_per_axis
    idx = np.indices(g.shape)
    offs = [(index[k] - idx[k]) % (2 * N) for k in range(d)]
    kv = kernels.table[(slice(None),) + tuple(offs)]
    comps = np.sum(kv * values[None], axis=tuple(range(1, d + 1))) * g.cell_volume
    a, b, c = _unpack(comps[:, None], d)
    return a[..., 0], b[..., 0], c[0]


# --------------------------------------------------------------------------
# identities and certificates


@dataclass
class BoundCertificate:
    inequality_id: str
    constant: float
    worst_point: Optional[np.ndarray]
    holds: bool
    details: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        wp = "" if self.worst_point is None else ";".join(repr(float(x)) for x in np.ravel(self.worst_point))
        return {"inequality_id": self.inequality_id, "constant": repr(float(self.constant)),
                "worst_v": wp, "holds": bool(self.holds)}


def _centered_diff(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(arr)
    src = [slice(None)] * arr.ndim
    lo, hi, mid = list(src), list(src), list(src)
    lo[axis], hi[axis], mid[axis] = slice(0, -2), slice(2, None), slice(1, -1)
    out[tuple(mid)] = (arr[tuple(hi)] - arr[tuple(lo)]) / (2.0 * h)
    return out


def divergence_residuals(coeffs: CoefficientField):
    """Normalised max residuals of ``d_j a_ij + b_i`` and ``div b - c`` on interior nodes.

    Each residual is divided by the max of the field it should reproduce.
    """
    g = coeffs.grid
    d, h = g.dim, g.spacing
    nsp = coeffs.c_bar.ndim - d  # leading spatial axes
    mask = g.interior_mask(1)
    res_a = np.zeros_like(coeffs.b_bar)
    for i in range(d):
        res_a[i] = coeffs.b_bar[i] + sum(_centered_diff(coeffs.a_bar[i, j], nsp + j, h) for j in range(d))
    res_c = sum(_centered_diff(coeffs.b_bar[i], nsp + i, h) for i in range(d)) - coeffs.c_bar
    ra = np.max(np.abs(res_a[(slice(None),) + (Ellipsis,)][..., mask]))
    rc = np.max(np.abs(res_c[..., mask]))
    bscale = np.max(np.abs(coeffs.b_bar))
    cscale = np.max(np.abs(coeffs.c_bar))
    ra = ra / bscale if bscale > 0 else ra
    rc = rc / cscale if cscale > 0 else rc
    worst = np.unravel_index(np.argmax(np.max(np.abs(res_a), axis=0)), res_a.shape[1:])
    return float(ra), float(rc), worst


def verify_divergence_identities(coeffs: CoefficientField, c_id: float = C_ID) -> BoundCertificate:
    ra, rc, worst = divergence_residuals(coeffs)
    h = coeffs.grid.spacing
    tol = c_id * h * h
    v = coeffs.grid.velocities[(slice(None),) + tuple(worst[-coeffs.grid.dim:])]
    return BoundCertificate(
        "divergence_identities", max(ra, rc), v, bool(ra <= tol and rc <= tol),
        {"residual_a_b": ra, "residual_b_c": rc, "tol": tol},
    )


def _sweep_nodes(coeffs: CoefficientField, radius: Optional[float]):
    """Flattened (a, v) over all x-slices for nodes with ``|v| <= radius``."""
    g = coeffs.grid
    if radius is None:
        radius = g.half_width / 2.0
    mask = g.speed <= radius
    a = coeffs.a_nodes()
    a = a.reshape((-1,) + g.shape + (g.dim, g.dim))
    sel = a[:, mask]  # (nx, M, d, d)
    v = g.velocities[:, mask].T  # (M, d)
    nx = sel.shape[0]
    return sel.reshape(-1, g.dim, g.dim), np.tile(v, (nx, 1)), mask


def _fan(dim: int, n: int = 16) -> np.ndarray:
    if dim == 2:
        th = np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    # Fibonacci points on the upper hemisphere (e and -e give the same ratio)
    k = np.arange(n) + 0.5
    z = k / n
    phi = np.pi * (1 + 5**0.5) * k
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def _perp_basis(v: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``v^perp`` for each row, shape (M, d-1, d)."""
    M, d = v.shape
    e = v / np.linalg.norm(v, axis=1, keepdims=True)
    if d == 2:
        return np.stack([-e[:, 1], e[:, 0]], axis=1)[:, None, :]
    helper = np.where(np.abs(e[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    u1 = np.cross(e, helper)
    u1 /= np.linalg.norm(u1, axis=1, keepdims=True)
    u2 = np.cross(e, u1)
    return np.stack([u1, u2], axis=1)


def certify_a_bounds(coeffs: CoefficientField, params: PotentialParams, radius: Optional[float] = None,
                     floor: float = LOWER_FLOOR) -> list:
    """Directional ratios of the diffusion matrix against ``(1 + |v|)^g`` and ``(1 + |v|)^(g+2)``.

    Four certificates: lower bound over all unit vectors, lower bound over
    vectors perpendicular to ``v``, upper bound over all unit vectors, upper
    bound along ``v``.  "All unit vectors" uses the 16-direction fan, the
    parallel/perpendicular directions and the exact extremal eigenvalues.
    """
    g = params.gamma
    a, v, _ = _sweep_nodes(coeffs, radius)
    s = np.linalg.norm(v, axis=1)
    e = v / s[:, None]
    lam = np.linalg.eigvalsh(a)
    fan = _fan(coeffs.grid.dim)
    fan_q = np.einsum("kd,mde,ke->mk", fan, a, fan)
    par = np.einsum("md,mde,me->m", e, a, e)
    P = _perp_basis(v)
    ap = np.einsum("mpd,mde,mqe->mpq", P, a, P)
    perp_eigs = np.linalg.eigvalsh(ap)
    perp_min, perp_max = perp_eigs[:, 0], perp_eigs[:, -1]
    all_min = np.minimum.reduce([lam[:, 0], fan_q.min(axis=1), par, perp_min])
    all_max = np.maximum.reduce([lam[:, -1], fan_q.max(axis=1), par, perp_max])
    w0 = (1.0 + s) ** g
    w2 = (1.0 + s) ** (g + 2.0)

    def cert(name, ratio, lower):
        k = int(np.argmin(ratio) if lower else np.argmax(ratio))
        c = float(ratio[k])
        ok = c >= floor if lower else bool(np.isfinite(c) and c > 0)
        return BoundCertificate(name, c, v[k], bool(ok and np.all(np.isfinite(ratio))))

    return [
        cert("a_lower_all", all_min / w0, True),
        cert("a_lower_perp", perp_min / w2, True),
        cert("a_upper_all", all_max / w2, False),
        cert("a_upper_par", par / w0, False),
    ]


def local_sup(values: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """``max f`` over ``B_rho(v)`` per node, ``rho = 1`` for ``|v| < 2`` else ``|v|^(-2/d)``,
    clamped below by one grid spacing.  ``values`` is a single velocity slice."""
    h, d = vgrid.spacing, vgrid.dim
    s = vgrid.speed
    rho = np.where(s < 2.0, 1.0, np.maximum(s, 2.0) ** (-2.0 / d))
    rho = np.maximum(rho, h)
    rc = np.floor(rho / h + 1e-9).astype(int)
    out = np.empty_like(values)
    for r in np.unique(rc):
        o = np.arange(-r, r + 1)
        fp = np.sqrt(sum(np.meshgrid(*([o**2] * d), indexing="ij"))) <= r + 1e-9
        filt = ndimage.maximum_filter(values, footprint=fp, mode="constant", cval=0.0)
        sel = rc == r
        out[sel] = filt[sel]
    return out


def certify_bc_bounds(coeffs: CoefficientField, f: DistributionField, params: PotentialParams,
                      radius: Optional[float] = None) -> list:
    """Ratios of ``c_bar`` and ``|b_bar|`` against their branch-dependent envelopes."""
    g = coeffs.grid
    d, gam = g.dim, params.gamma
    if radius is None:
        radius = g.half_width / 2.0
    mask = g.speed <= radius
    s = g.speed[mask]
    v = g.velocities[:, mask].T
    c_ratios, b_ratios = [], []
    c_exp = gam if gam >= -2.0 * d / (d + 2.0) else -2.0 - 2.0 * gam / d
    c_all = coeffs.c_bar.reshape((-1,) + g.shape)
    b_all = np.linalg.norm(coeffs.b_bar, axis=0).reshape((-1,) + g.shape)
    for k, sl in enumerate(f.slices()):
        sup = local_sup(sl, g)[mask]
        c_env = (1.0 + s) ** c_exp * (1.0 + sup) ** (-gam / d)
        if gam < -1.0:
            b_env = (1.0 + s) ** (gam + 1.0) * (1.0 + sup) ** (-(gam + 1.0) / d)
        else:
            b_env = (1.0 + s) ** (gam + 1.0)
        c_ratios.append(c_all[k][mask] / c_env)
        b_ratios.append(b_all[k][mask] / b_env)
    c_r = np.concatenate(c_ratios)
    b_r = np.concatenate(b_ratios)
    vv = np.tile(v, (len(c_ratios), 1))
    kc, kb = int(np.argmax(c_r)), int(np.argmax(b_r))
    branch_c = "c_upper_first" if gam >= -2.0 * d / (d + 2.0) else "c_upper_second"
    branch_b = "b_upper_soft" if gam < -1.0 else "b_upper_moderate"
    return [
        BoundCertificate(branch_c, float(c_r[kc]), vv[kc], bool(np.all(np.isfinite(c_r))), {"exponent": c_exp}),
        BoundCertificate(branch_b, float(b_r[kb]), vv[kb], bool(np.all(np.isfinite(b_r)))),
    ]


# --------------------------------------------------------------------------
# transformed coefficients


@dataclass
class TransformedCoefficients:
    samples: np.ndarray  # (M, d) points v of B_R
    A: np.ndarray        # (M, d, d)
    B: np.ndarray        # (M, d)
    C: np.ndarray        # (M,)


def _interpolators(coeffs: CoefficientField, x_index: int = 0):
    g = coeffs.grid
    d = g.dim
    axes = (g.nodes,) * d
    a = coeffs.a_bar.reshape((d, d, -1) + g.shape)[:, :, x_index]
    b = coeffs.b_bar.reshape((d, -1) + g.shape)[:, x_index]
    c = coeffs.c_bar.reshape((-1,) + g.shape)[x_index]
    stack = np.concatenate([a.reshape((d * d,) + g.shape), b, c[None]])
    vals = np.moveaxis(stack, 0, -1)
    return RegularGridInterpolator(axes, vals, method="linear")


def transformed_coefficients(coeffs: CoefficientField, z0: KineticPoint, params: PotentialParams, R: float,
                             samples: int = 7, x_index: int = 0):
    """``A = T^-1 a(v0 + T v) T^-1``, ``B = T^-1 b``, ``C = c`` on a lattice in ``B_R``.

    ``coeffs`` must come from the same ``f`` (the x-slice ``x_index`` is used;
    over ``Q_R`` the spatial extent is ``R^3`` so one slice suffices).  The
    transform is the identity for ``|v0| < 2``.  Returns the sampled fields
    and a certificate with the extremal eigenvalues of ``A``.
    """
    g = coeffs.grid
    d, gam = g.dim, params.gamma
    v0 = np.asarray(z0.v, dtype=float)
    speed = float(np.linalg.norm(v0))
    if speed >= 2.0:
        T = build_transform(v0, gam)
        Tm, Ti = T.matrix, T.inverse
        rmax = min(np.sqrt(z0.t), speed ** (-1.0 - gam / 2.0))
    else:
        Tm = Ti = np.eye(d)
        rmax = min(np.sqrt(z0.t), 1.0)
    if not 0.0 < R < rmax:
        raise ValueError(f"R must lie in (0, {rmax}), got {R}")
    u = np.linspace(-R, R, samples)
    lat = np.stack(np.meshgrid(*([u] * d), indexing="ij"), axis=-1).reshape(-1, d)
    lat = lat[np.linalg.norm(lat, axis=1) <= R * (1 + 1e-12)]
    pts = v0 + lat @ Tm.T
    if np.any(np.abs(pts) > g.nodes[-1]):
        raise ValueError("transformed cylinder leaves the velocity grid")
    vals = _interpolators(coeffs, x_index)(pts)
    a = vals[:, : d * d].reshape(-1, d, d)
    b = vals[:, d * d: d * d + d]
    c = vals[:, -1]
    A = Ti @ a @ Ti
    B = b @ Ti.T
    eig = np.linalg.eigvalsh(A)
    lam, Lam = float(eig[:, 0].min()), float(eig[:, -1].max())
    cert = BoundCertificate("transformed_ellipticity", lam, v0, lam > 0, {"lambda": lam, "Lambda": Lam, "R": R})
    return TransformedCoefficients(lat, A, B, c), cert


def certify_ellipticity_sweep(coeffs: CoefficientField, speeds: Sequence[float], params: PotentialParams,
                              direction=None, t0: float = 1.0, factor: float = 2.0) -> BoundCertificate:
    """Check that ``lambda`` and ``Lambda`` of ``A`` stay within ``factor`` across base speeds."""
    d = coeffs.grid.dim
    e = np.zeros(d)
    e[0] = 1.0
    if direction is not None:
        e = np.asarray(direction, float) / np.linalg.norm(direction)
    lams, Lams = [], []
    for sp in speeds:
        v0 = sp * e
        rmax = min(np.sqrt(t0), sp ** (-1.0 - params.gamma / 2.0)) if sp >= 2 else min(np.sqrt(t0), 1.0)
        z0 = KineticPoint(t0, np.zeros(d), v0)
        _, cert = transformed_coefficients(coeffs, z0, params, 0.5 * rmax)
        lams.append(cert.details["lambda"])
        Lams.append(cert.details["Lambda"])
    lams, Lams = np.array(lams), np.array(Lams)
    spread = max(lams.max() / lams.min(), Lams.max() / Lams.min()) if np.all(lams > 0) else np.inf
    return BoundCertificate(
        "transformed_ellipticity_sweep", float(spread), None, bool(np.all(lams > 0) and spread <= factor),
        {"speeds": list(map(float, speeds)), "lambda": lams.tolist(), "Lambda": Lams.tolist()},
    )
