"""Exponent calculus, barrier certificates and envelope verdicts for solver runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .coefficients import KernelPack, PotentialParams, coefficients_from_values, precompute_kernels
from .grid import KineticPoint, VelocityGrid, metric_dL_arrays
from .solver import RunRecord, hessian_contraction


class PreconditionError(ValueError):
    """Input data or parameters violate an operation's precondition."""


# --------------------------------------------------------------------------
# exponent calculus


def branch_point(d: int) -> float:
    return -2.0 * d / (d + 2.0)


def _check_gamma(gamma):
    if not -2.0 < gamma <= 0.0:
        raise PreconditionError(f"gamma must lie in (-2, 0], got {gamma}")


def exponent_P(d: int, alpha: float, gamma: float) -> float:
    """Decay exponent produced by one application of the local upper bound."""
    _check_gamma(gamma)
    if not 0.0 <= alpha <= 1.0:
        raise PreconditionError(f"alpha must lie in [0, 1], got {alpha}")
    if gamma >= branch_point(d):
        return -1.0 - d * (1.0 + alpha) / (d + 2.0)
    return -(d * (4.0 + gamma) + 2.0 + 2.0 * gamma + alpha * d) / (d + 2.0)


def exponent_Q(gamma: float) -> float:
    _check_gamma(gamma)
    return 0.0 if gamma >= -1.0 else -(1.0 + gamma)


def p_gamma(K, gamma: float, d: int, C: float):
    e = (d - gamma) / (d + 2.0)
    second = 1.0 if gamma > -1.0 else np.power(K, -(1.0 + gamma))
    return C * (np.power(K, e) + second)


def fixed_point_Kstar(gamma: float, d: int, C: float, rtol: float = 1e-13) -> float:
    """Threshold ``K* >= 1`` beyond which ``K > p_gamma(K)``.

    ``K - p_gamma(K)`` is convex, so there is at most one crossing in
    ``(1, inf)``; it exists iff ``1 <= p_gamma(1) = 2C``.  Without a crossing
    every ``K > 1`` already satisfies the inequality and ``1`` is returned.
    """
    _check_gamma(gamma)
    if not C > 0:
        raise PreconditionError("C must be positive")

    def g(K):
        return K - p_gamma(K, gamma, d, C)

    if g(1.0) >= 0.0:
        return 1.0
    lo, hi = 1.0, 2.0
    while g(hi) <= 0.0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    K = 0.5 * (lo + hi)
    if not 2.0 * K > p_gamma(2.0 * K, gamma, d, C):
        raise RuntimeError("separation K > p(K) failed at 2 K*")
    return K


@dataclass
class ExponentReport:
    gamma: float
    d: int
    alpha_sequence: list
    P_values: list
    steps: int
    K_star: float
    C_used: float
    gains: list = field(default_factory=list)

    @property
    def min_gain(self) -> float:
        return min(self.gains) if self.gains else float("inf")


def bootstrap_exponents(d: int, gamma: float, C: float = 1.0, max_steps: int = 10_000) -> ExponentReport:
    """Iterate ``alpha <- min(1, -P(d, alpha, gamma))`` from 0 until 1."""
    _check_gamma(gamma)
    alphas, Ps, gains = [0.0], [], []
    while alphas[-1] < 1.0:
        if len(Ps) >= max_steps:
            raise RuntimeError("bootstrap did not terminate")
        a = alphas[-1]
        P = exponent_P(d, a, gamma)
        Ps.append(P)
        gains.append(-P - a)
        alphas.append(min(1.0, -P))
    return ExponentReport(float(gamma), int(d), alphas, Ps, len(Ps), fixed_point_Kstar(gamma, d, C), float(C), gains)


def kappa_weight(t, beta: float, gamma: float):
    """Integrated dominator of ``c``: ``beta t^(1+g/2)/(1+g/2)`` then linear with slope ``beta``."""
    _check_gamma(gamma)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or beta <= 0:
        raise PreconditionError("need t >= 0 and beta > 0")
    k = 1.0 + gamma / 2.0
    out = np.where(t <= 1.0, beta / k * np.power(np.minimum(t, 1.0), k), beta / k + beta * (t - 1.0))
    return out if out.ndim else float(out)


def kappa_derivative(t, beta: float, gamma: float):
    t = np.asarray(t, dtype=float)
    out = np.where(t < 1.0, beta * np.power(np.where(t > 0, t, 1.0), gamma / 2.0), beta)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# verdict containers


@dataclass
class BarrierSpec:
    kind: str                     # "polynomial-lower" | "gaussian-upper"
    exponent: float               # p or alpha
    rate: Optional[float] = None  # beta or C
    R0: Optional[float] = None
    c_margin: Optional[float] = None

    def validate(self, d: int):
        if self.kind == "polynomial-lower":
            if not self.exponent > d + 2:
                raise PreconditionError(f"polynomial barrier needs p > d + 2 = {d + 2}")
        elif self.kind == "gaussian-upper":
            if not self.exponent > 0:
                raise PreconditionError("alpha must be positive")
        else:
            raise PreconditionError(f"unknown barrier kind {self.kind!r}")


@dataclass
class EnvelopeVerdict:
    holds: bool
    worst_point: Optional[KineticPoint]
    measured_constant: float
    details: dict = field(default_factory=dict)

    def as_json(self, inequality_id: str, parameters: dict) -> dict:
        wp = None
        if self.worst_point is not None:
            z = self.worst_point
            wp = {"t": z.t, "x": z.x.tolist(), "v": z.v.tolist()}
        return {"inequality_id": inequality_id, "holds": bool(self.holds),
                "constant": float(self.measured_constant), "worst_point": wp, "parameters": parameters}


def _point(snapshot, flat_index: int) -> KineticPoint:
    """KineticPoint for a flat index into ``snapshot.slices()``."""
    vg = snapshot.vgrid
    nx = snapshot.slices().shape[0]
    idx = np.unravel_index(flat_index, (nx,) + vg.shape)
    x = np.zeros(vg.dim)
    if not snapshot.homogeneous:
        x[0] = snapshot.grid.x_nodes[idx[0]]
    v = vg.velocities[(slice(None),) + tuple(idx[1:])]
    return KineticPoint(snapshot.time, x, v)


def _kernels(run: RunRecord, kernels: Optional[KernelPack]) -> KernelPack:
    if kernels is not None:
        return kernels
    return precompute_kernels(run.snapshots[0].vgrid, run.params)


# --------------------------------------------------------------------------
# polynomial lower barrier


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def _eta_slope(r, p, k, A):
    """``eta'`` on ``[1/2, 1]``: a blend of ``(r^-p)'`` and a nonpositive bump."""
    u = 2.0 * r - 1.0
    chi = u**k * (k + 1 - k * u)
    return -p * r ** (-p - 1.0) * chi - A * u**2 * (1 - u) ** 2


@lru_cache(maxsize=64)
def _eta_design(p: float):
    # sharpen the blend until its integral leaves room for a nonnegative bump weight
    for k in range(2, 400):
        r = 0.75 + 0.25 * _GL_X
        I = 0.25 * float(np.sum(_GL_W * _eta_slope(r, p, k, 0.0)))
        if I >= -1.0:
            return k, (I + 1.0) * 60.0
    raise ValueError(f"no monotone interpolant found for p={p}")


def eta(r, p: float):
    """Decreasing C^2 profile: 2 on [0, 1/2], r^-p on [1, inf).

    On ``[1/2, 1]`` the slope is ``chi (r^-p)' - A u^2 (1-u)^2`` with
    ``u = 2r - 1`` and a C^1 step ``chi``, so the slope is never positive and
    it matches ``(r^-p)'`` and its derivative at ``r = 1``.
    """
    r = np.asarray(r, dtype=float)
    k, A = _eta_design(float(p))
    rr = np.clip(r, 0.5, 1.0)
    # eta(r) = 2 + int_{1/2}^{r} slope
    half = 0.5 * (rr - 0.5)
    nodes = 0.5 + half[..., None] * (1.0 + _GL_X)
    mid = 2.0 + half * np.sum(_GL_W * _eta_slope(nodes, p, k, A), axis=-1)
    out = np.where(r <= 0.5, 2.0, np.where(r >= 1.0, np.power(np.maximum(r, 1.0), -p), mid))
    return out if out.ndim else float(out)


def barrier_rate_map(coeffs, p: float):
    """``-(a : D^2 eta + c eta) / eta`` per node, with the solver's discrete second differences."""
    vg = coeffs.grid
    e = eta(vg.speed, p)
    lhs = hessian_contraction(np.broadcast_to(e, coeffs.c_bar.shape).copy(), coeffs.a_bar, vg) + coeffs.c_bar * e
    return -lhs / e


def _subsolution_ok(rate_maps, mask, beta, tol):
    # residual of psi = e^{-beta t} eta is e^{-beta t} eta (beta - rate); compare in units of eta
    return all(np.min((beta - r)[..., mask]) >= -tol for r in rate_maps)


def search_beta(rate_maps, mask, tol: float = 0.0, rtol: float = 1e-10, max_doublings: int = 200) -> float:
    """Smallest ``beta`` with a nonnegative subsolution residual: doubling from 1, then bisection."""
    hi = 1.0
    n = 0
    while not _subsolution_ok(rate_maps, mask, hi, tol):
        hi *= 2.0
        n += 1
        if n > max_doublings:
            return float("inf")
    lo = 0.0
    if _subsolution_ok(rate_maps, mask, lo, tol):
        return 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _subsolution_ok(rate_maps, mask, mid, tol):
            hi = mid
        else:
            lo = mid
    return hi


def verify_polynomial_barrier(f_run: RunRecord, spec: BarrierSpec, c0: Optional[float] = None,
                              kernels: Optional[KernelPack] = None, tol: float = 0.0) -> EnvelopeVerdict:
    """Subsolution search for ``beta`` and the measured lower constant ``c1``.

    ``c1 = min f e^(beta t) (1 + |v|)^p`` over snapshots and ``1 <= |v| <= L/2``.
    """
    snaps = f_run.snapshots
    vg = snaps[0].vgrid
    spec.validate(vg.dim)
    p = spec.exponent
    half = vg.half_width / 2.0
    inner = vg.speed <= half
    weight = (1.0 + vg.speed) ** (-p)
    f0 = snaps[0].slices()
    measured_c0 = float(np.min(f0[..., inner] / weight[inner]))
    if c0 is not None and measured_c0 < c0 * (1 - 1e-12):
        raise PreconditionError(f"initial data below c0 (1+|v|)^-p: min ratio {measured_c0!r} < {c0!r}")
    if not measured_c0 > 0:
        raise PreconditionError("initial data must be positive on |v| <= L/2")
    pack = _kernels(f_run, kernels)
    rate_maps = [barrier_rate_map(coefficients_from_values(s.values, pack), p) for s in snaps]
    beta = search_beta(rate_maps, inner, tol) if spec.rate is None else float(spec.rate)
    res_min = min(float(np.min((beta - r)[..., inner])) for r in rate_maps)
    band = inner & (vg.speed >= 1.0)
    best, where = np.inf, None
    for s in snaps:
        ratio = s.slices() * np.exp(beta * s.time) / weight
        ratio = np.where(band, ratio, np.inf)
        k = int(np.argmin(ratio))
        if ratio.flat[k] < best:
            best, where = float(ratio.flat[k]), _point(s, k)
    holds = bool(np.isfinite(beta) and res_min >= -tol and best > 0)
    return EnvelopeVerdict(holds, where, best, {"beta": beta, "residual_min": res_min, "c0": measured_c0, "p": p})


# --------------------------------------------------------------------------
# Gaussian supersolution and propagation


@dataclass
class GaussianCertificate:
    success: bool
    alpha: float
    R0: float
    margin: float


def gaussian_lhs_ratio(coeffs, alpha: float) -> np.ndarray:
    """``(a : D^2 phi + c phi) / phi`` for ``phi = exp(-alpha |v|^2)``."""
    vg = coeffs.grid
    phi = np.exp(-alpha * vg.speed**2)
    lhs = hessian_contraction(np.broadcast_to(phi, coeffs.c_bar.shape).copy(), coeffs.a_bar, vg) + coeffs.c_bar * phi
    with np.errstate(divide="ignore", invalid="ignore"):
        return lhs / phi


def certify_gaussian_supersolution(coeffs, alpha: float, gamma: float,
                                   radius: Optional[float] = None, min_band: float = 0.25) -> GaussianCertificate:
    """Smallest node radius ``R0`` with ``a : D^2 phi + c phi <= -C |v|^(g+2) phi`` on ``R0 <= |v| <= radius``.

    Success also needs the certified band to cover at least ``min_band *
    radius``: past the admissible ``alpha`` the inequality first fails at the
    largest radii, and a band of one or two outer rings is not evidence.
    """
    vg = coeffs.grid
    if radius is None:
        radius = vg.half_width / 2.0
    ratio = gaussian_lhs_ratio(coeffs, alpha)
    s = vg.speed
    # phi may underflow far outside the window; those nodes are never inspected
    ratio = np.where(np.isfinite(ratio), ratio, np.inf)
    margin = -ratio / np.maximum(s, 1e-300) ** (gamma + 2.0)
    margin = margin.reshape((-1,) + vg.shape).min(axis=0)
    inside = s <= radius
    rs, ms = s[inside], margin[inside]
    order = np.argsort(rs)
    rs, ms = rs[order], ms[order]
    bad = np.nonzero(ms <= 0)[0]
    if bad.size == 0:
        start = 0
    else:
        start = bad[-1] + 1
        # all nodes at the failing radius are excluded
        while start < rs.size and rs[start] <= rs[bad[-1]] * (1 + 1e-12):
            start += 1
    if start >= rs.size or rs[start] > (1.0 - min_band) * radius:
        # report the worst margin over the band that had to certify
        return GaussianCertificate(False, alpha, float("inf"), float(np.min(ms[rs >= (1.0 - min_band) * radius])))
    return GaussianCertificate(True, alpha, float(rs[start]), float(np.min(ms[start:])))


def certified_alpha0(coeffs, gamma: float, radius: Optional[float] = None, rtol: float = 1e-4,
                     scan=None) -> float:
    """Largest ``alpha`` for which the Gaussian supersolution certifies.

    Small ``alpha`` can fail too: on the finite window ``|v| <= radius`` the
    ``c phi`` term may still dominate.  The certified set is located by a
    geometric scan and its upper end refined by bisection.  Returns 0 when
    no scanned ``alpha`` certifies.
    """
    if scan is None:
        scan = np.geomspace(1e-3, 10.0, 41)
    ok = [certify_gaussian_supersolution(coeffs, a, gamma, radius).success for a in scan]
    if not any(ok):
        return 0.0
    k = max(i for i, good in enumerate(ok) if good)
    if k == len(scan) - 1:
        return float(scan[-1])
    lo, hi = float(scan[k]), float(scan[k + 1])
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if certify_gaussian_supersolution(coeffs, mid, gamma, radius).success:
            lo = mid
        else:
            hi = mid
    return lo


def verify_gaussian_propagation(f_run: RunRecord, C0: float, alpha: float, alpha0: float,
                                kernels: Optional[KernelPack] = None) -> EnvelopeVerdict:
    """Measured ``C1`` with ``f <= C1 exp(-alpha |v|^2)`` and the supersolution bound.

    The growth rate ``C`` is ``max (a : D^2 phi + c phi)/phi`` over the run;
    ``R0`` comes from the supersolution certificate of the first snapshot;
    ``t0`` is when ``C0 e^(C t) phi`` overtakes ``sup f`` on ``B_R0``.  The
    bound is ``C0 exp(C min(t, t0))``.
    """
    snaps = f_run.snapshots
    vg = snaps[0].vgrid
    gamma = f_run.params.gamma
    if not alpha <= alpha0:
        raise PreconditionError(f"alpha={alpha!r} exceeds the certified alpha0={alpha0!r}; "
                                "run certify_gaussian_supersolution first")
    phi = np.exp(-alpha * vg.speed**2)
    inner = vg.speed <= vg.half_width / 2.0
    init_ratio = float(np.max(snaps[0].slices() / phi))
    if init_ratio > C0 * (1 + 1e-12):
        raise PreconditionError(f"initial data exceed C0 exp(-alpha|v|^2): ratio {init_ratio!r} > C0={C0!r}")
    pack = _kernels(f_run, kernels)
    growth = 0.0
    cert0 = None
    for s in snaps:
        co = coefficients_from_values(s.values, pack)
        growth = max(growth, float(np.max(gaussian_lhs_ratio(co, alpha)[..., inner])))
        if cert0 is None:
            cert0 = certify_gaussian_supersolution(co, alpha, gamma)
    if not cert0.success:
        raise PreconditionError("Gaussian supersolution does not certify at this alpha")
    R0 = cert0.R0
    fmax = max(float(np.max(s.values)) for s in snaps)
    growth = max(growth, 0.0)
    if growth > 0:
        t0 = max(0.0, np.log(fmax * np.exp(alpha * R0**2) / C0) / growth)
    else:
        t0 = 0.0
    per_slice, cumulative, bound = [], [], []
    run_max, worst = 0.0, None
    for s in snaps:
        ratio = np.where(inner, s.slices() / phi, -np.inf)
        k = int(np.argmax(ratio))
        c = float(ratio.flat[k])
        per_slice.append(c)
        if c >= run_max:
            run_max, worst = c, _point(s, k)
        cumulative.append(run_max)
        bound.append(C0 * np.exp(growth * min(s.time - snaps[0].time, t0)))
    C1 = cumulative[-1]
    t_end = snaps[-1].time - snaps[0].time
    holds = bool(np.isfinite(C1) and all(c <= b * (1 + 1e-9) for c, b in zip(cumulative, bound)))
    return EnvelopeVerdict(holds, worst, C1, {
        "times": [s.time for s in snaps], "C1_per_slice": per_slice, "C1_cumulative": cumulative,
        "bound": bound, "growth_C": growth, "R0": R0, "t0": float(t0), "sup_f": fmax,
        "regime_end": "t <= t0" if t_end <= t0 else "t > t0",
        "bound_ratio": float(np.exp(growth * min(t_end, t0))),
    })


# --------------------------------------------------------------------------
# decay envelope


def verify_decay_envelope(f_run: RunRecord, K0: Optional[float] = None) -> EnvelopeVerdict:
    """Smallest ``K0`` with ``f <= K0 (1 + t^(-d/2)) (1 + |v|)^-1`` on ``|v| <= L/2``.

    Snapshots at ``t = 0`` carry an infinite envelope and are skipped.
    """
    snaps = [s for s in f_run.snapshots if s.time > 0]
    if not snaps:
        raise PreconditionError("run has no snapshot with t > 0")
    vg = snaps[0].vgrid
    d = vg.dim
    inner = vg.speed <= vg.half_width / 2.0
    best, where = 0.0, None
    kdef = []
    for s in snaps:
        env = (1.0 + s.time ** (-d / 2.0)) / (1.0 + vg.speed)
        ratio = np.where(inner, s.slices() / env, 0.0)
        k = int(np.argmax(ratio))
        if ratio.flat[k] > best or where is None:
            best, where = float(ratio.flat[k]), _point(s, k)
        kdef.append(min(s.time ** (d / 2.0), 1.0) * float(np.max(s.values)))
    holds = bool(np.isfinite(best) and (K0 is None or best <= K0))
    return EnvelopeVerdict(holds, where, best, {"K_definition_trace": kdef, "K0": K0})


# --------------------------------------------------------------------------
# Hölder quotient


@dataclass
class HolderResult:
    beta_fit: float
    constant: float
    worst_pair: tuple
    mode: str
    strata: dict
    p99_over_median: dict


def _interpolator(snapshot):
    vg = snapshot.vgrid
    axes = (vg.nodes,) * vg.dim
    vals = snapshot.slices()
    if snapshot.homogeneous:
        return RegularGridInterpolator(axes, vals[0], bounds_error=False, fill_value=0.0), False
    X = snapshot.grid.x_period
    xs = np.append(snapshot.grid.x_nodes, X)
    ext = np.concatenate([vals, vals[:1]], axis=0)
    return RegularGridInterpolator((xs,) + axes, ext, bounds_error=False, fill_value=0.0), True


def sample_pairs(f_run: RunRecord, n_pairs: int, seed: int, t_min: float):
    """Stratified pairs (near, far, high-|v|) of kinetic points in the sampled snapshots."""
    snaps = [s for s in f_run.snapshots if s.time >= t_min]
    vg = snaps[0].vgrid
    d = vg.dim
    half = vg.half_width / 2.0
    rng = np.random.default_rng(seed)
    per = n_pairs // 3
    counts = {"near": per, "far": per, "high_v": n_pairs - 2 * per}

    def ball(n, rmin=0.0, rmax=half):
        u = rng.normal(size=(n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = (rmin**d + (rmax**d - rmin**d) * rng.random(n)) ** (1.0 / d)
        return u * r[:, None]

    inhom = not snaps[0].homogeneous
    X = snaps[0].grid.x_period if inhom else 0.0

    def xs(n):
        x = np.zeros((n, d))
        if inhom:
            x[:, 0] = rng.random(n) * X
        return x

    k1, v1, x1, k2, v2, x2, tag = [], [], [], [], [], [], []
    S = len(snaps)
    # near: same snapshot, small velocity offset
    n = counts["near"]
    a = rng.integers(0, S, n)
    va = ball(n)
    off = rng.normal(size=(n, d))
    off *= (0.05 * rng.random(n) / np.linalg.norm(off, axis=1))[:, None]
    vb = va + off
    vb = np.where(np.linalg.norm(vb, axis=1, keepdims=True) <= half, vb, va - off)
    xa = xs(n)
    k1 += [a]; v1 += [va]; x1 += [xa]; k2 += [a]; v2 += [vb]; x2 += [xa.copy()]; tag += [np.zeros(n, int)]
    n = counts["far"]
    k1 += [rng.integers(0, S, n)]; v1 += [ball(n)]; x1 += [xs(n)]
    k2 += [rng.integers(0, S, n)]; v2 += [ball(n)]; x2 += [xs(n)]; tag += [np.ones(n, int)]
    n = counts["high_v"]
    k1 += [rng.integers(0, S, n)]; v1 += [ball(n, 2.0)]; x1 += [xs(n)]
    k2 += [rng.integers(0, S, n)]; v2 += [ball(n, 2.0)]; x2 += [xs(n)]; tag += [np.full(n, 2)]
    cat = np.concatenate
    return snaps, cat(k1), cat(x1), cat(v1), cat(k2), cat(x2), cat(v2), cat(tag)


def holder_quotient(f_run: RunRecord, alpha: Optional[float] = None, betas: Optional[Sequence[float]] = None,
                    n_pairs: int = 12_000, seed: int = 0, t_min: Optional[float] = None,
                    spread: float = 10.0, min_snapshots: int = 5, near: float = 0.1) -> HolderResult:
    """Empirical Hölder exponent in the kinetic metric ``d_L``.

    ``beta_fit`` is the largest ``beta`` on the grid whose quotient keeps its
    99th percentile within ``spread`` times its median, measured on the pairs
    with ``d_L <= near``.  Pairs farther apart hit the ``min{1, .}`` cap and
    carry no information about ``beta``.  If no ``beta`` qualifies, the one
    with the smallest spread is taken.  With ``alpha=None`` the Gaussian
    weight is replaced by 1 ("polynomial-weight mode").
    """
    snaps_all = f_run.snapshots
    if t_min is None:
        pos = [s.time for s in snaps_all if s.time > 0]
        if not pos:
            raise PreconditionError("run has no snapshot with t > 0")
        t_min = min(pos)
    if t_min <= 0:
        raise PreconditionError("t_min must be positive")
    if sum(s.time >= t_min for s in snaps_all) < min_snapshots:
        raise PreconditionError(f"need at least {min_snapshots} snapshots with t >= t_min")
    if betas is None:
        betas = np.round(np.arange(0.05, 1.0001, 0.05), 10)
    gamma = f_run.params.gamma
    snaps, k1, x1, v1, k2, x2, v2, tag = sample_pairs(f_run, n_pairs, seed, t_min)
    t = np.array([s.time for s in snaps])
    vals1 = np.empty(len(k1))
    vals2 = np.empty(len(k2))
    for i, s in enumerate(snaps):
        interp, with_x = _interpolator(s)
        for k, x, v, out in ((k1, x1, v1, vals1), (k2, x2, v2, vals2)):
            sel = k == i
            if np.any(sel):
                pts = np.concatenate([x[sel, :1] % s.grid.x_period, v[sel]], axis=1) if with_x else v[sel]
                out[sel] = interp(pts)
    dl = metric_dL_arrays(t[k1], x1, v1, t[k2], x2, v2, gamma)
    keep = dl > 0
    num = np.abs(vals1 - vals2)[keep]
    dl = dl[keep]
    t1, t2 = t[k1][keep], t[k2][keep]
    if alpha is None:
        weight = np.ones_like(num)
        mode = "polynomial-weight mode"
    else:
        weight = np.exp(-alpha * np.sum(v1[keep] ** 2, axis=1)) + np.exp(-alpha * np.sum(v2[keep] ** 2, axis=1))
        mode = "gaussian-weight mode"
    close = dl <= near
    if np.count_nonzero(close) < 100:
        raise PreconditionError(f"only {np.count_nonzero(close)} pairs with d_L <= {near}")
    stats = {}
    beta_fit = None
    for b in betas:
        den = weight * np.minimum(1.0, (1.0 + t1 ** (-b / 2) + t2 ** (-b / 2)) * dl**b)
        q = (num / den)[close]
        med = float(np.median(q))
        p99 = float(np.percentile(q, 99))
        stats[float(b)] = p99 / med if med > 0 else float("inf")
        if stats[float(b)] <= spread:
            beta_fit = float(b)
    if beta_fit is None:
        beta_fit = min(stats, key=stats.get)
    b = beta_fit
    den = weight * np.minimum(1.0, (1.0 + t1 ** (-b / 2) + t2 ** (-b / 2)) * dl**b)
    q = num / den
    w = int(np.argmax(q))
    idx = np.nonzero(keep)[0][w]
    z1 = KineticPoint(float(t[k1[idx]]), x1[idx], v1[idx])
    z2 = KineticPoint(float(t[k2[idx]]), x2[idx], v2[idx])
    strata = {name: int(np.sum(tag[keep] == i)) for i, name in enumerate(("near", "far", "high_v"))}
    strata["dL_le_near"] = int(np.count_nonzero(close))
    return HolderResult(beta_fit, float(q[w]), (z1, z2), mode, strata, stats)
