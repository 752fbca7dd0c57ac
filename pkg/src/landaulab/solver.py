"""Time stepping for the Landau equation on the truncated velocity box.

Two discretisations of the collision operator are provided:

* ``divergence-flux``: ``div(a grad f + b f)`` assembled from face fluxes.
  Only faces between active (non-boundary) cells carry flux, so the total
  mass telescopes exactly.
* ``non-divergence``: ``a : D^2 f + c f`` with centred second differences.

The inhomogeneous mode adds free transport in one periodic x-direction
through Strang splitting with an exact semi-Lagrangian shift.
"""

from __future__ import annotations

import time as _time
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .coefficients import CoefficientField, KernelPack, PotentialParams, coefficients_from_values, precompute_kernels
from .grid import NEGATIVITY_RTOL, DistributionField, VelocityGrid
from .hydro import HydroBounds, check_admissible, moments

FORMS = ("divergence-flux", "non-divergence")


class CFLError(ValueError):
    pass


class AdmissibilityError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    form: str = "divergence-flux"
    dt: Union[float, str] = "auto"
    cfl_safety: float = 0.5
    t_end: float = 1.0
    snapshot_stride: int = 10
    freeze_coefficients: bool = False
    advection: str = "centered"
    positivity_limiter: bool = True
    check_admissibility: bool = True

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")
        if self.advection not in ("centered", "upwind"):
            raise ValueError("advection must be 'centered' or 'upwind'")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.dt != "auto" and not float(self.dt) > 0:
            raise ValueError("dt must be positive or 'auto'")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")


@dataclass
class RunRecord:
    config: SolverConfig
    params: PotentialParams
    snapshots: list = field(default_factory=list)  # DistributionField, increasing time
    trace: list = field(default_factory=list)      # dict per step (and step 0)
    clamps: int = 0
    limited: int = 0  # cells whose outgoing fluxes the positivity limiter scaled
    wall_time: float = 0.0
    dt: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def trace_array(self, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.trace])

    def config_dict(self) -> dict:
        return asdict(self.config)


# --------------------------------------------------------------------------
# stencils


def _sl(ndim: int, axis: int, s: slice) -> tuple:
    out = [slice(None)] * ndim
    out[axis] = s
    return tuple(out)


def _centered(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Centred difference with zero values outside the array."""
    out = np.zeros_like(f)
    n = f.ndim
    out[_sl(n, axis, slice(1, -1))] = f[_sl(n, axis, slice(2, None))] - f[_sl(n, axis, slice(0, -2))]
    out[_sl(n, axis, slice(0, 1))] = f[_sl(n, axis, slice(1, 2))]
    out[_sl(n, axis, slice(-1, None))] = -f[_sl(n, axis, slice(-2, -1))]
    return out / (2.0 * h)


def _second(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    n = f.ndim
    pad = np.zeros_like(f)
    pad[_sl(n, axis, slice(1, -1))] = (
        f[_sl(n, axis, slice(2, None))] - 2 * f[_sl(n, axis, slice(1, -1))] + f[_sl(n, axis, slice(0, -2))]
    )
    return pad / (h * h)


def _active_mask(vgrid: VelocityGrid) -> np.ndarray:
    return vgrid.interior_mask(1)


def face_fluxes(f: np.ndarray, co: CoefficientField, advection: str = "centered") -> list:
    """Face fluxes ``a_ij d_j f + b_i f`` per axis (length ``N - 1`` along that axis).

    Faces that touch the outer layer carry zero flux.
    """
    g = co.grid
    d, h = g.dim, g.spacing
    nd = f.ndim
    off = nd - d
    grads = [_centered(f, off + j, h) for j in range(d)]
    out = []
    for i in range(d):
        ax = off + i
        lo = _sl(nd, ax, slice(0, -1))
        hi = _sl(nd, ax, slice(1, None))
        flux = np.zeros(f[lo].shape)
        for j in range(d):
            a_face = 0.5 * (co.a_bar[i, j][lo] + co.a_bar[i, j][hi])
            if j == i:
                dj = (f[hi] - f[lo]) / h
            else:
                dj = 0.5 * (grads[j][lo] + grads[j][hi])
            flux += a_face * dj
        b_face = 0.5 * (co.b_bar[i][lo] + co.b_bar[i][hi])
        if advection == "upwind":
            # d_t f = d_i(b_i f) transports along -b
            f_face = np.where(b_face > 0, f[hi], f[lo])
        else:
            f_face = 0.5 * (f[lo] + f[hi])
        flux += b_face * f_face
        n = f.shape[ax]
        flux[_sl(nd, ax, slice(0, 1))] = 0.0
        flux[_sl(nd, ax, slice(n - 2, n - 1))] = 0.0
        for j in range(d):
            if j != i:
                flux[_sl(nd, off + j, slice(0, 1))] = 0.0
                flux[_sl(nd, off + j, slice(-1, None))] = 0.0
        out.append(flux)
    return out


def flux_sum(fluxes: list, vgrid: VelocityGrid) -> np.ndarray:
    """Discrete divergence of face fluxes."""
    d, h = vgrid.dim, vgrid.spacing
    nd = fluxes[0].ndim
    off = nd - d
    shape = list(fluxes[0].shape)
    shape[off] += 1
    out = np.zeros(shape)
    for i, flux in enumerate(fluxes):
        ax = off + i
        out[_sl(nd, ax, slice(1, -1))] += (flux[_sl(nd, ax, slice(1, None))] - flux[_sl(nd, ax, slice(0, -1))]) / h
    return out


def flux_divergence(f: np.ndarray, co: CoefficientField, advection: str = "centered") -> np.ndarray:
    """``div(a grad f + b f)`` with zero flux across faces that touch the outer layer."""
    return flux_sum(face_fluxes(f, co, advection), co.grid)


def limit_fluxes(base: np.ndarray, fluxes: list, dt: float, vgrid: VelocityGrid):
    """Scale each face flux by the limiter factor of its donor cell so ``base + dt * div F >= 0``.

    A cell's factor is ``min(1, base / (dt * outflow))``.  The flux through a
    face leaves exactly one cell, so the scaled update is still conservative.
    Returns ``(fluxes, number of limited cells)``.
    """
    d, h = vgrid.dim, vgrid.spacing
    nd = base.ndim
    off = nd - d
    out = np.zeros_like(base)
    for i, flux in enumerate(fluxes):
        ax = off + i
        # positive flux at face k+1/2 drains cell k+1, negative drains cell k
        out[_sl(nd, ax, slice(1, None))] += np.maximum(flux, 0.0) / h
        out[_sl(nd, ax, slice(0, -1))] += np.maximum(-flux, 0.0) / h
    need = dt * out
    theta = np.ones_like(base)
    lim = (need > base) & (need > 0)
    theta[lim] = np.maximum(base[lim], 0.0) / need[lim]
    limited = []
    for i, flux in enumerate(fluxes):
        ax = off + i
        donor = np.where(flux > 0, theta[_sl(nd, ax, slice(1, None))], theta[_sl(nd, ax, slice(0, -1))])
        limited.append(flux * donor)
    return limited, int(np.count_nonzero(lim))


def hessian_contraction(f: np.ndarray, a_bar: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """``a : D^2 f`` with centred second and cross differences (zero outside the box)."""
    d, h = vgrid.dim, vgrid.spacing
    off = f.ndim - d
    out = np.zeros_like(f)
    for i in range(d):
        out += a_bar[i, i] * _second(f, off + i, h)
        for j in range(i + 1, d):
            out += 2.0 * a_bar[i, j] * _centered(_centered(f, off + i, h), off + j, h)
    return out


def nondivergence_rhs(f: np.ndarray, co: CoefficientField, include_c: bool = True) -> np.ndarray:
    out = hessian_contraction(f, co.a_bar, co.grid)
    if include_c:
        out = out + co.c_bar * f
    out[..., ~_active_mask(co.grid)] = 0.0
    return out


def collision_rhs(f: np.ndarray, co: CoefficientField, config: SolverConfig) -> np.ndarray:
    if config.form == "divergence-flux":
        return flux_divergence(f, co, config.advection)
    return nondivergence_rhs(f, co)


def cfl_limit(co: CoefficientField) -> float:
    """Largest stable explicit step ``h^2 / (2 d max rho(a))``."""
    g = co.grid
    rho = co.spectral_radius()
    if rho <= 0:
        return np.inf
    return g.spacing**2 / (2 * g.dim * rho)


def _resolve_dt(co: CoefficientField, config: SolverConfig) -> float:
    limit = cfl_limit(co)
    if config.dt == "auto":
        return config.cfl_safety * limit
    dt = float(config.dt)
    if dt > limit * (1 + 1e-12):
        raise CFLError(f"dt={dt!r} exceeds the CFL limit {limit!r}")
    return dt


def _clamp(values: np.ndarray) -> int:
    vmax = float(np.max(values)) if values.size else 0.0
    bad = values < -NEGATIVITY_RTOL * max(vmax, 0.0)
    n = int(np.count_nonzero(bad))
    if n:
        values[bad] = 0.0
    return n


class LandauOperator:
    """Binds a kernel pack and a solver configuration."""

    def __init__(self, vgrid: VelocityGrid, params: PotentialParams, config: SolverConfig,
                 kernels: Optional[KernelPack] = None, workers: Optional[int] = None):
        self.vgrid = vgrid
        self.params = params
        self.config = config
        self.kernels = kernels if kernels is not None else precompute_kernels(vgrid, params, workers)
        self.workers = workers

    def coefficients(self, values: np.ndarray) -> CoefficientField:
        return coefficients_from_values(values, self.kernels, self.workers)

    def rhs(self, values: np.ndarray, frozen: Optional[CoefficientField] = None) -> np.ndarray:
        co = frozen if frozen is not None else self.coefficients(values)
        return collision_rhs(values, co, self.config)

    def stage(self, base: np.ndarray, values: np.ndarray, dt: float, co: CoefficientField):
        """``base + dt * Q(values)``; returns ``(new, limited cells)``."""
        cfg = self.config
        if cfg.form != "divergence-flux":
            return base + dt * nondivergence_rhs(values, co), 0
        fl = face_fluxes(values, co, cfg.advection)
        nlim = 0
        if cfg.positivity_limiter:
            fl, nlim = limit_fluxes(base, fl, dt, self.vgrid)
        return base + dt * flux_sum(fl, self.vgrid), nlim

    def step(self, values: np.ndarray, dt: float, co: Optional[CoefficientField] = None,
             frozen: Optional[CoefficientField] = None):
        """Explicit midpoint RK2; returns ``(new, limited cells)``.

        ``co`` may carry the already computed coefficients of ``values``.
        """
        if frozen is not None:
            co = co_half = frozen
        elif co is None:
            co = self.coefficients(values)
        half, n1 = self.stage(values, values, 0.5 * dt, co)
        if frozen is None:
            co_half = self.coefficients(half)
        new, n2 = self.stage(values, half, dt, co_half)
        return new, n1 + n2


def collision_step(f: DistributionField, coeffs: Optional[CoefficientField], config: SolverConfig,
                   params: PotentialParams, kernels: Optional[KernelPack] = None, dt: Optional[float] = None):
    """Advance ``f`` by one collision step; returns ``(field, clamps, limited cells)``.

    With ``config.freeze_coefficients`` the given ``coeffs`` are used at both
    stages; otherwise the midpoint coefficients are recomputed.
    """
    op = LandauOperator(f.vgrid, params, config, kernels)
    co = coeffs if coeffs is not None else op.coefficients(f.values)
    if dt is None:
        dt = _resolve_dt(co, config)
    elif dt > cfl_limit(co) * (1 + 1e-12):
        raise CFLError(f"dt={dt!r} exceeds the CFL limit {cfl_limit(co)!r}")
    frozen = co if config.freeze_coefficients else None
    new, nlim = op.step(f.values, dt, co, frozen)
    n = _clamp(new)
    return DistributionField(f.grid, new, f.time + dt), n, nlim


def shift_rows(values: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Periodic linear-interpolation shift along axis 0; ``shifts`` (in cells) broadcasts over the rest."""
    nx = values.shape[0]
    out = np.empty_like(values)
    flat_v = values.reshape(nx, -1)
    flat_o = out.reshape(nx, -1)
    s = np.broadcast_to(shifts, values.shape[1:]).reshape(-1)
    n = np.floor(s)
    frac = s - n
    snap = np.isclose(frac, 0.0, atol=1e-12) | np.isclose(frac, 1.0, atol=1e-12)
    n = np.where(np.isclose(frac, 1.0, atol=1e-12), n + 1, n).astype(int)
    frac = np.where(snap, 0.0, frac)
    k = np.arange(nx)[:, None]
    i0 = (k - n[None, :]) % nx
    i1 = (k - n[None, :] - 1) % nx
    cols = np.arange(flat_v.shape[1])[None, :]
    flat_o[:] = (1.0 - frac) * flat_v[i0, cols] + frac * flat_v[i1, cols]
    return out


def transport_step(f: DistributionField, dt: float) -> DistributionField:
    """Exact-characteristic shift ``f(x - v1 dt, v)`` with periodic linear interpolation."""
    if f.homogeneous:
        raise ValueError("transport_step needs an inhomogeneous field")
    shifts = f.vgrid.velocities[0] * dt / f.grid.dx
    return DistributionField(f.grid, shift_rows(f.values, shifts), f.time)


def _trace_row(t: float, values: np.ndarray, vgrid: VelocityGrid, clamps: int, limited: int) -> dict:
    m, e, s = moments(values, vgrid)
    return {"t": float(t), "mass": float(np.sum(m)), "energy": float(np.sum(e)), "entropy": float(np.sum(s)),
            "min_f": float(np.min(values)), "max_f": float(np.max(values)), "clamps": int(clamps), "limited": int(limited)}


def run(initial: DistributionField, bounds: Optional[HydroBounds], config: SolverConfig, params: PotentialParams,
        kernels: Optional[KernelPack] = None, workers: Optional[int] = None, n_steps: Optional[int] = None) -> RunRecord:
    """Evolve ``initial`` to ``config.t_end`` (or for ``n_steps`` steps).

    ``dt`` is fixed for the run: either the configured value or the auto value
    computed from the initial coefficients.  Frozen mode keeps the initial
    coefficients throughout.
    """
    if bounds is not None:
        rep = check_admissible(initial, bounds)
        if not rep.admissible:
            raise AdmissibilityError(f"initial data not admissible: {rep.failures}")
    t0 = _time.perf_counter()
    op = LandauOperator(initial.vgrid, params, config, kernels, workers)
    vals = initial.values.copy()
    co0 = op.coefficients(vals)
    dt = _resolve_dt(co0, config)
    if n_steps is None:
        n_steps = max(1, int(np.ceil(config.t_end / dt - 1e-9)))
        dt = config.t_end / n_steps
    frozen = co0 if config.freeze_coefficients else None
    rec = RunRecord(config, params, dt=dt)
    rec.snapshots.append(DistributionField(initial.grid, vals.copy(), initial.time))
    rec.trace.append(_trace_row(initial.time, vals, initial.vgrid, 0, 0))
    inhom = not initial.homogeneous
    shifts = initial.vgrid.velocities[0] * (0.5 * dt) / initial.grid.dx if inhom else None
    t = initial.time
    for k in range(1, n_steps + 1):
        if inhom:
            vals = shift_rows(vals, shifts)
        co = frozen
        if frozen is None:
            co = op.coefficients(vals)
            if dt > cfl_limit(co) * (1 + 1e-12):
                raise CFLError(f"step {k}: dt={dt!r} exceeds the CFL limit {cfl_limit(co)!r}")
        vals, nlim = op.step(vals, dt, co, frozen)
        if inhom:
            vals = shift_rows(vals, shifts)
        nclamp = _clamp(vals)
        rec.clamps += nclamp
        t = initial.time + k * dt
        rec.limited += nlim
        rec.trace.append(_trace_row(t, vals, initial.vgrid, nclamp, nlim))
        if config.check_admissibility and bounds is not None:
            rep = check_admissible(DistributionField(initial.grid, vals, t, check=False), bounds)
            if not rep.admissible:
                raise AdmissibilityError(f"admissibility lost at t={t!r}: {rep.failures}")
        if k % config.snapshot_stride == 0 or k == n_steps:
            rec.snapshots.append(DistributionField(initial.grid, vals.copy(), t))
    rec.wall_time = _time.perf_counter() - t0
    return rec


# --------------------------------------------------------------------------
# discrete maximum principle


def selling_decomposition(a: np.ndarray, max_iter: int = 200):
    """Obtuse-superbase (Selling) decomposition of SPD matrices.

    ``a``: (M, d, d).  Returns ``(weights, offsets)`` with shapes
    ``(M, K)`` and ``(M, K, d)`` (integer offsets) such that
    ``a = sum_k w_k e_k e_k^T`` and ``w_k >= 0``.  ``K = 3`` in 2-D, ``6`` in 3-D.
    """
    M, d, _ = a.shape
    if d == 2:
        base = np.array([[1, 0], [0, 1], [-1, -1]])
    else:
        base = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, -1, -1]])
    sb = np.broadcast_to(base, (M,) + base.shape).copy()
    pairs = [(i, j) for i in range(d + 1) for j in range(i + 1, d + 1)]
    rows = np.arange(M)
    for _ in range(max_iter):
        prods = np.stack([np.einsum("md,mde,me->m", sb[:, i], a, sb[:, j]) for i, j in pairs], axis=1)
        scale = np.einsum("mii->m", a)[:, None]
        pos = prods > 1e-14 * scale
        todo = np.any(pos, axis=1)
        if not np.any(todo):
            break
        which = np.argmax(pos, axis=1)
        for p, (i, j) in enumerate(pairs):
            sel = todo & (which == p)
            if not np.any(sel):
                continue
            bi = sb[sel, i].copy()
            if d == 2:
                k = 3 - i - j
                sb[sel, k] = bi - sb[sel, j]
            else:
                for k in range(4):
                    if k not in (i, j):
                        sb[sel, k] = sb[sel, k] + bi
            sb[sel, i] = -bi
    else:
        raise RuntimeError("Selling reduction did not terminate")
    weights, offsets = [], []
    for i, j in pairs:
        w = -np.einsum("md,mde,me->m", sb[:, i], a, sb[:, j])
        rest = [k for k in range(d + 1) if k not in (i, j)]
        if d == 2:
            e = sb[:, rest[0]]
            e = np.stack([-e[:, 1], e[:, 0]], axis=1)
        else:
            e = np.cross(sb[:, rest[0]], sb[:, rest[1]])
        weights.append(np.maximum(w, 0.0))
        offsets.append(e)
    del rows
    return np.stack(weights, axis=1), np.stack(offsets, axis=1)


class MonotoneDiffusion:
    """``a : D^2 g`` as ``sum_k w_k (g(v + h e_k) + g(v - h e_k) - 2 g(v)) / h^2``.

    Nonnegative weights make forward Euler sign preserving under
    ``dt <= h^2 / (2 max sum_k w_k)``.  Values outside the box are zero.
    """

    def __init__(self, a_bar: np.ndarray, vgrid: VelocityGrid):
        d = vgrid.dim
        shape = a_bar.shape[2:]
        a = np.moveaxis(a_bar, (0, 1), (-2, -1)).reshape(-1, d, d)
        self.shape = shape
        self.vgrid = vgrid
        self.weights, self.offsets = selling_decomposition(a)
        self.diag = 2.0 * self.weights.sum(axis=1)
        idx = np.indices(shape).reshape(len(shape), -1).T  # (M, nd)
        vdims = idx[:, -d:]
        self.lead = idx[:, :-d]
        N = vgrid.points_per_axis
        self._nbr = []
        for s in (1, -1):
            tgt = vdims[:, None, :] + s * self.offsets  # (M, K, d)
            inside = np.all((tgt >= 0) & (tgt < N), axis=-1)
            flat = np.zeros(inside.shape, dtype=np.int64)
            full = np.concatenate([np.broadcast_to(self.lead[:, None, :], tgt.shape[:2] + (self.lead.shape[1],)),
                                   np.clip(tgt, 0, N - 1)], axis=-1)
            flat = np.ravel_multi_index(tuple(np.moveaxis(full, -1, 0)), shape)
            self._nbr.append((flat, inside))

    def max_stable_dt(self) -> float:
        h = self.vgrid.spacing
        m = float(np.max(self.diag))
        return np.inf if m <= 0 else h * h / m

    def apply(self, g: np.ndarray) -> np.ndarray:
        h = self.vgrid.spacing
        flat = g.reshape(-1)
        acc = -self.diag * flat
        for nbr, inside in self._nbr:
            acc += np.sum(self.weights * np.where(inside, flat[nbr], 0.0), axis=1)
        return (acc / (h * h)).reshape(g.shape)


@dataclass
class MaxPrincipleVerdict:
    holds: bool
    input_violation: bool
    max_ratio: float   # max over the run of max(g) / ||g0||_inf
    worst_time: float


def check_discrete_maximum_principle(f_run: RunRecord, g0: np.ndarray, mode: str = "kinetic-FP",
                                     kernels: Optional[KernelPack] = None, safety: float = 0.9,
                                     tol: float = 1e-10) -> MaxPrincipleVerdict:
    """Evolve ``g`` by ``a : D^2 g`` (no ``c`` term, plus transport when inhomogeneous)
    with coefficients frozen on each inter-snapshot interval of ``f_run``."""
    if mode != "kinetic-FP":
        raise ValueError("only mode 'kinetic-FP' is supported")
    snaps = f_run.snapshots
    if not snaps:
        raise ValueError("run has no snapshots")
    grid = snaps[0].grid
    g = np.asarray(g0, dtype=float).copy()
    norm = float(np.max(np.abs(g)))
    if norm == 0.0:
        norm = 1.0
    if np.max(g) > 0:
        return MaxPrincipleVerdict(False, True, float(np.max(g)) / norm, snaps[0].time)
    pack = kernels if kernels is not None else precompute_kernels(grid.vgrid, f_run.params)
    worst, worst_t = 0.0, snaps[0].time
    inhom = not grid.homogeneous
    for s0, s1 in zip(snaps[:-1], snaps[1:]):
        co = coefficients_from_values(s0.values, pack)
        op = MonotoneDiffusion(co.a_bar, grid.vgrid)
        span = s1.time - s0.time
        n = max(1, int(np.ceil(span / (safety * op.max_stable_dt()))))
        dt = span / n
        for k in range(n):
            if inhom:
                g = shift_rows(g, grid.vgrid.velocities[0] * dt / grid.dx)
            g = g + dt * op.apply(g)
            r = float(np.max(g)) / norm
            if r > worst:
                worst, worst_t = r, s0.time + (k + 1) * dt
    return MaxPrincipleVerdict(bool(worst <= tol), False, worst, worst_t)
