"""Velocity/phase grids, distribution fields and kinetic geometry.

The velocity lattice is cell centred, so no node sits on ``v = 0`` where the
collision kernels are singular.  The spatial variable, when present, is a
single periodic coordinate ``x in [0, X)`` carried by the first velocity
component in the transport term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

#: tolerance used when deciding that a field is "nonnegative"
NEGATIVITY_RTOL = 1e-12


class MetricConvergenceError(RuntimeError):
    """Raised when the inner minimisation of ``metric_dL`` does not converge."""


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centred lattice on ``[-L, L]^d``."""

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.points_per_axis < 4 or self.points_per_axis % 2:
            raise ValueError("points_per_axis must be an even integer >= 4")
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "points_per_axis", int(self.points_per_axis))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @cached_property
    def nodes(self) -> np.ndarray:
        """1-D node coordinates ``-L + (k + 1/2) h``."""
        h = self.spacing
        return -self.half_width + (np.arange(self.points_per_axis) + 0.5) * h

    @cached_property
    def velocities(self) -> np.ndarray:
        """Array of shape ``(d, N, ..., N)`` holding the node velocities."""
        axes = np.meshgrid(*([self.nodes] * self.dim), indexing="ij")
        return np.stack(axes)

    @cached_property
    def speed(self) -> np.ndarray:
        return np.sqrt(np.sum(self.velocities**2, axis=0))

    def interior_mask(self, layers: int = 1) -> np.ndarray:
        """True on nodes that are not within ``layers`` cells of the box edge."""
        n = self.points_per_axis
        idx = np.arange(n)
        ok1 = (idx >= layers) & (idx < n - layers)
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(self.dim):
            sl = [None] * self.dim
            sl[ax] = slice(None)
            mask &= ok1[tuple(sl)]
        return mask

    def ball_mask(self, radius: float) -> np.ndarray:
        return self.speed <= radius

    def nearest_index(self, v) -> tuple:
        """Index of the node closest to velocity ``v``."""
        v = np.asarray(v, dtype=float)
        k = np.floor((v + self.half_width) / self.spacing).astype(int)
        k = np.clip(k, 0, self.points_per_axis - 1)
        return tuple(int(i) for i in k)


@dataclass(frozen=True)
class PhaseGrid:
    """A velocity grid optionally paired with a periodic 1-D spatial lattice."""

    vgrid: VelocityGrid
    x_period: Optional[float] = None
    x_points: Optional[int] = None

    def __post_init__(self):
        if (self.x_period is None) != (self.x_points is None):
            raise ValueError("x_period and x_points must be given together")
        if self.x_period is not None:
            if self.x_period <= 0 or self.x_points < 1:
                raise ValueError("x_period must be positive and x_points >= 1")
            object.__setattr__(self, "x_period", float(self.x_period))
            object.__setattr__(self, "x_points", int(self.x_points))

    @property
    def homogeneous(self) -> bool:
        return self.x_period is None

    @property
    def dx(self) -> float:
        return self.x_period / self.x_points

    @cached_property
    def x_nodes(self) -> np.ndarray:
        if self.homogeneous:
            return np.zeros(1)
        return np.arange(self.x_points) * self.dx

    @property
    def shape(self) -> tuple:
        if self.homogeneous:
            return self.vgrid.shape
        return (self.x_points,) + self.vgrid.shape


def homogeneous_grid(dim: int, L: float, N: int) -> PhaseGrid:
    return PhaseGrid(VelocityGrid(dim, L, N))


def support_cutoff(vgrid: VelocityGrid, taper: Optional[float] = None) -> np.ndarray:
    """Smooth radial cutoff, 1 inside and exactly 0 on the outer two cell layers.

    The transition is the standard ``exp(-1/s)`` partition of unity over a
    band of width ``taper`` (default ``max(4h, L/8)``) ending at ``L - 2h``.
    """
    h = vgrid.spacing
    outer = vgrid.half_width - 2.0 * h
    if taper is None:
        taper = max(4.0 * h, vgrid.half_width / 8.0)
    inner = outer - taper
    s = np.clip((vgrid.speed - inner) / taper, 0.0, 1.0)

    def _bump(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    cut = _bump(1.0 - s) / (_bump(1.0 - s) + _bump(s))
    # the box corners lie outside the ball, the outer layer needs its own zeroing
    cut[~vgrid.interior_mask(2)] = 0.0
    return cut


@dataclass
class DistributionField:
    """Nonnegative density ``f`` on a phase grid at time ``time``.

    ``values`` has shape ``vgrid.shape`` (homogeneous) or
    ``(Nx,) + vgrid.shape`` (inhomogeneous).
    """

    grid: PhaseGrid
    values: np.ndarray
    time: float = 0.0
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        if self.check:
            vmax = float(np.max(np.abs(self.values))) if self.values.size else 0.0
            if np.any(self.values < -NEGATIVITY_RTOL * vmax):
                raise ValueError("distribution values must be nonnegative")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("distribution values must be finite")

    @property
    def vgrid(self) -> VelocityGrid:
        return self.grid.vgrid

    @property
    def homogeneous(self) -> bool:
        return self.grid.homogeneous

    def slices(self) -> np.ndarray:
        """Values with a leading x axis (length 1 for homogeneous fields)."""
        if self.homogeneous:
            return self.values[None]
        return self.values

    def copy(self) -> "DistributionField":
        return DistributionField(self.grid, self.values.copy(), self.time, check=False)

    def support_ok(self) -> bool:
        """True if the outermost velocity cell layer is identically zero."""
        outer = ~self.vgrid.interior_mask(1)
        return not np.any(self.slices()[:, outer] != 0.0)


def enforce_support(values: np.ndarray, vgrid: VelocityGrid, taper: Optional[float] = None) -> np.ndarray:
    """Multiply ``values`` (velocity axes last) by the smooth support cutoff."""
    return values * support_cutoff(vgrid, taper)


# --------------------------------------------------------------------------
# kinetic geometry


@dataclass(frozen=True)
class KineticPoint:
    t: float
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=float)))
        if self.x.shape != self.v.shape:
            raise ValueError("x and v must have the same dimension")

    @classmethod
    def origin(cls, dim: int) -> "KineticPoint":
        return cls(0.0, np.zeros(dim), np.zeros(dim))

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.t], self.x, self.v])

    def allclose(self, other: "KineticPoint", **kw) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), **kw))


def galilean_shift(z0: KineticPoint, z: KineticPoint) -> KineticPoint:
    """``S_{z0}(t, x, v) = (t0 + t, x0 + x + t v0, v0 + v)``."""
    return KineticPoint(z0.t + z.t, z0.x + z.x + z.t * z0.v, z0.v + z.v)


def galilean_shift_inverse(z0: KineticPoint, z: KineticPoint) -> KineticPoint:
    s = z.t - z0.t
    return KineticPoint(s, z.x - z0.x - s * z0.v, z.v - z0.v)


@dataclass(frozen=True)
class KineticCylinder:
    center: KineticPoint
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")


def cylinder_contains(Q: KineticCylinder, z: KineticPoint) -> bool:
    """Membership in ``(t0 - r^2, t0] x {|x - x0 - (t - t0) v0| < r^3} x B_r(v0)``."""
    z0, r = Q.center, Q.radius
    s = z.t - z0.t
    if not (-r * r < s <= 0.0):
        return False
    if np.linalg.norm(z.x - z0.x - s * z0.v) >= r**3:
        return False
    return bool(np.linalg.norm(z.v - z0.v) < r)


@dataclass(frozen=True)
class AnisotropicTransform:
    """Linear map stretching ``v0``-perpendicular directions by ``|v0|^(1+g/2)``
    and the ``v0`` direction by ``|v0|^(g/2)``."""

    base_velocity: np.ndarray
    gamma: float

    @property
    def dim(self) -> int:
        return self.base_velocity.size

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.base_velocity))

    @property
    def parallel_factor(self) -> float:
        return self.speed ** (self.gamma / 2.0)

    @property
    def perpendicular_factor(self) -> float:
        return self.speed ** (1.0 + self.gamma / 2.0)

    @cached_property
    def matrix(self) -> np.ndarray:
        e = self.base_velocity / self.speed
        P = np.outer(e, e)
        return self.parallel_factor * P + self.perpendicular_factor * (np.eye(self.dim) - P)

    @cached_property
    def inverse(self) -> np.ndarray:
        e = self.base_velocity / self.speed
        P = np.outer(e, e)
        return P / self.parallel_factor + (np.eye(self.dim) - P) / self.perpendicular_factor

    @property
    def determinant(self) -> float:
        return self.perpendicular_factor ** (self.dim - 1) * self.parallel_factor


def build_transform(v0, gamma: float) -> AnisotropicTransform:
    v0 = np.asarray(v0, dtype=float)
    if not -2.0 < gamma < 0.0:
        raise ValueError(f"gamma must lie in (-2, 0), got {gamma}")
    if np.linalg.norm(v0) < 2.0:
        raise ValueError("the anisotropic transform needs |v0| >= 2 (use the Galilean shift below that)")
    return AnisotropicTransform(v0, float(gamma))


def _transform_matrix(v0: np.ndarray, gamma: float) -> np.ndarray:
    if np.linalg.norm(v0) < 2.0:
        return np.eye(v0.size)
    return build_transform(v0, gamma).matrix


def kinetic_transform(z0: KineticPoint, z: KineticPoint, gamma: float) -> KineticPoint:
    """``(t0 + t, x0 + T x + t v0, v0 + T v)``; ``T = I`` when ``|v0| < 2``."""
    T = _transform_matrix(z0.v, gamma)
    return KineticPoint(z0.t + z.t, z0.x + T @ z.x + z.t * z0.v, z0.v + T @ z.v)


def kinetic_transform_inverse(z0: KineticPoint, z: KineticPoint, gamma: float) -> KineticPoint:
    T = _transform_matrix(z0.v, gamma)
    s = z.t - z0.t
    x = np.linalg.solve(T, z.x - z0.x - s * z0.v)
    v = np.linalg.solve(T, z.v - z0.v)
    return KineticPoint(s, x, v)


def metric_dP(z1: KineticPoint, z2: KineticPoint) -> float:
    """Closed-form kinetic distance
    ``|dt|^(1/2) + |dx - dt (v1 + v2)/2|^(1/3) + |dv|``."""
    dt = z1.t - z2.t
    y = z1.x - z2.x - dt * (z1.v + z2.v) / 2.0
    return float(np.sqrt(abs(dt)) + np.linalg.norm(y) ** (1.0 / 3.0) + np.linalg.norm(z1.v - z2.v))


# d_L ---------------------------------------------------------------------
#
# After the transform based at z = (tb, xb, vb), the closed-form distance of
# the images only depends on vb: the time gap is unchanged and the Galilean
# drift cancels in the x-combination.  So the minimisation runs over base
# velocities only; tb and xb are free.


def _dl_objective(vb, dt, y, dv, gamma):
    """Vectorised ``w(vb) * d_P`` of the transformed pair; leading axes broadcast."""
    s = np.linalg.norm(vb, axis=-1)
    big = s >= 2.0
    s_safe = np.where(big, s, 2.0)
    e = vb / np.where(s > 0, s, 1.0)[..., None]

    def tinv_norm(u):
        par = np.sum(u * e, axis=-1)
        perp2 = np.maximum(np.sum(u * u, axis=-1) - par**2, 0.0)
        aniso = np.sqrt(par**2 * s_safe ** (-gamma) + perp2 * s_safe ** (-2.0 - gamma))
        return np.where(big, aniso, np.sqrt(np.sum(u * u, axis=-1)))

    weight = np.where(big, s_safe ** (1.0 + gamma / 2.0), 1.0)
    val = np.sqrt(np.abs(dt)) + np.cbrt(tinv_norm(y)) + tinv_norm(dv)
    return weight * val


def metric_dL_arrays(t1, x1, v1, t2, x2, v2, gamma: float, rtol: float = 1e-6,
                     coarse: int = 9, max_iter: int = 20000) -> np.ndarray:
    """Vectorised ``d_L`` for ``P`` pairs (``x*, v*`` of shape ``(P, d)``).

    Base velocities are searched in the ball of radius ``2|v1 - v2| + 1`` about
    the midpoint: a coarse lattice first, then a compass search that halves
    its step until it drops below ``rtol`` times the ball radius.
    """
    t1 = np.atleast_1d(np.asarray(t1, float))
    t2 = np.atleast_1d(np.asarray(t2, float))
    x1, x2, v1, v2 = (np.atleast_2d(np.asarray(a, float)) for a in (x1, x2, v1, v2))
    P, d = v1.shape
    dt = t1 - t2
    dv = v1 - v2
    y = x1 - x2 - dt[:, None] * (v1 + v2) / 2.0
    mid = (v1 + v2) / 2.0
    rad = 2.0 * np.linalg.norm(dv, axis=1) + 1.0

    def obj(vb):
        # vb: (P, K, d)
        return _dl_objective(vb, dt[:, None], y[:, None, :], dv[:, None, :], gamma)

    # coarse candidates: cube lattice clipped to the ball, the endpoints,
    # the midpoint and the ball point closest to the origin
    g = np.linspace(-1.0, 1.0, coarse)
    lat = np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d)
    lat = lat[np.linalg.norm(lat, axis=1) <= 1.0]
    cand = mid[:, None, :] + rad[:, None, None] * lat[None]
    mnorm = np.linalg.norm(mid, axis=1)
    toward0 = np.where(
        (mnorm > rad)[:, None],
        mid * (1.0 - rad / np.where(mnorm > 0, mnorm, 1.0))[:, None],
        0.0,
    )
    cand = np.concatenate([cand, v1[:, None], v2[:, None], toward0[:, None]], axis=1)
    vals = obj(cand)
    best = np.argmin(vals, axis=1)
    x = cand[np.arange(P), best]
    fx = vals[np.arange(P), best]

    dirs = np.concatenate([np.eye(d), -np.eye(d)])
    step = rad / (coarse - 1)
    tol = rtol * rad
    it = 0
    act = np.nonzero(step > tol)[0]
    while act.size:
        it += 1
        if it > max_iter:
            raise MetricConvergenceError(f"d_L refinement did not converge for {act.size} pairs")
        xa, sa, ma, ra = x[act], step[act], mid[act], rad[act]
        trial = xa[:, None, :] + sa[:, None, None] * dirs[None]
        # stay inside the search ball
        off = trial - ma[:, None, :]
        nrm = np.linalg.norm(off, axis=-1)
        scale = np.where(nrm > ra[:, None], ra[:, None] / np.where(nrm > 0, nrm, 1.0), 1.0)
        trial = ma[:, None, :] + off * scale[..., None]
        tv = _dl_objective(trial, dt[act, None], y[act, None, :], dv[act, None, :], gamma)
        k = np.argmin(tv, axis=1)
        rows = np.arange(act.size)
        tbest = tv[rows, k]
        improve = tbest < fx[act] * (1.0 - 1e-15)
        x[act[improve]] = trial[rows[improve], k[improve]]
        fx[act[improve]] = tbest[improve]
        step[act[~improve]] /= 2.0
        act = act[step[act] > tol[act]]
    return fx


def metric_dL(z1: KineticPoint, z2: KineticPoint, gamma: float, rtol: float = 1e-6) -> float:
    """Transform-deformed kinetic distance (weight ``|v|^(1+g/2)``, 1 for ``|v| < 2``)."""
    out = metric_dL_arrays([z1.t], z1.x[None], z1.v[None], [z2.t], z2.x[None], z2.v[None], gamma, rtol=rtol)
    return float(out[0])
