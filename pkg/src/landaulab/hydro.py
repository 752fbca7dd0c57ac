"""Mass, energy and entropy densities and the admissibility gate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import DistributionField, VelocityGrid

ENTROPY_FLOOR = 1e-300


@dataclass(frozen=True)
class HydroState:
    """Midpoint-rule moments; arrays of length ``Nx`` (length 1 when homogeneous)."""

    mass: np.ndarray
    energy: np.ndarray
    entropy: np.ndarray

    def scalar(self):
        """``(mass, energy, entropy)`` as floats for homogeneous fields."""
        if self.mass.size != 1:
            raise ValueError("scalar() requires a single x-node")
        return float(self.mass[0]), float(self.energy[0]), float(self.entropy[0])


@dataclass(frozen=True)
class HydroBounds:
    m0: float
    M0: float
    E0: float
    H0: float

    def __post_init__(self):
        if not 0 < self.m0 <= self.M0:
            raise ValueError("need 0 < m0 <= M0")


@dataclass
class AdmissibilityReport:
    admissible: bool
    failures: list = field(default_factory=list)  # (x_index, reason)


def f_log_f(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values, dtype=float)
    pos = values > ENTROPY_FLOOR
    out[pos] = values[pos] * np.log(values[pos])
    return out


def moments(values: np.ndarray, vgrid: VelocityGrid):
    """Mass, energy, entropy over the trailing velocity axes of ``values``."""
    d = vgrid.dim
    axes = tuple(range(values.ndim - d, values.ndim))
    w = vgrid.cell_volume
    mass = np.sum(values, axis=axes) * w
    energy = np.sum(values * vgrid.speed**2, axis=axes) * w
    entropy = np.sum(f_log_f(values), axis=axes) * w
    return mass, energy, entropy


def hydro_state(f: DistributionField) -> HydroState:
    m, e, s = moments(f.slices(), f.vgrid)
    return HydroState(np.atleast_1d(m), np.atleast_1d(e), np.atleast_1d(s))


def momentum(f: DistributionField) -> np.ndarray:
    d = f.vgrid.dim
    axes = tuple(range(1, d + 1))
    vel = f.vgrid.velocities
    return np.stack([np.sum(f.slices() * vel[i], axis=axes) for i in range(d)], axis=-1) * f.vgrid.cell_volume


def check_admissible(f: DistributionField, bounds: HydroBounds):
    state = hydro_state(f)
    failures = []
    for k in range(state.mass.size):
        m, e, s = state.mass[k], state.energy[k], state.entropy[k]
        if m < bounds.m0:
            failures.append((k, f"mass {m!r} < m0 {bounds.m0!r}"))
        if m > bounds.M0:
            failures.append((k, f"mass {m!r} > M0 {bounds.M0!r}"))
        if e > bounds.E0:
            failures.append((k, f"energy {e!r} > E0 {bounds.E0!r}"))
        if s > bounds.H0:
            failures.append((k, f"entropy {s!r} > H0 {bounds.H0!r}"))
    return AdmissibilityReport(not failures, failures)
