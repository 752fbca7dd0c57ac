"""Initial-data presets; every preset is multiplied by the support cutoff."""

from __future__ import annotations

import numpy as np

from .grid import DistributionField, PhaseGrid, support_cutoff

PRESETS = ("maxwellian", "bimodal", "spike", "polynomial-tail", "gaussian-envelope")


def maxwellian_values(vgrid, mass=1.0, temperature=1.0, drift=None):
    d = vgrid.dim
    u = np.zeros(d) if drift is None else np.asarray(drift, float)
    r2 = np.sum((vgrid.velocities - u.reshape((d,) + (1,) * d)) ** 2, axis=0)
    return mass * (2 * np.pi * temperature) ** (-d / 2) * np.exp(-r2 / (2 * temperature))


def bimodal_values(vgrid, mass=1.0, temperature=0.5, separation=1.5):
    d = vgrid.dim
    e = np.zeros(d)
    e[0] = separation
    return 0.5 * (maxwellian_values(vgrid, mass, temperature, e) + maxwellian_values(vgrid, mass, temperature, -e))


def spike_values(vgrid, mass=1.0, center=None):
    """Mass ``mass`` in the single cell nearest ``center`` (default: just off the origin)."""
    out = np.zeros(vgrid.shape)
    c = np.zeros(vgrid.dim) if center is None else np.asarray(center, float)
    out[vgrid.nearest_index(c)] = mass / vgrid.cell_volume
    return out


def polynomial_tail_values(vgrid, c0=1.0, p=5.0):
    return c0 * (1.0 + vgrid.speed) ** (-p)


def gaussian_envelope_values(vgrid, amplitude=0.5, alpha=0.05):
    return amplitude * np.exp(-alpha * vgrid.speed**2)


def make_initial(grid: PhaseGrid, preset: str, density_modulation: float = 0.0,
                 cutoff: bool = True, **kw) -> DistributionField:
    """Build a field from a preset.  Inhomogeneous grids get ``1 + eps sin(2 pi x/X)`` density."""
    vg = grid.vgrid
    makers = {"maxwellian": maxwellian_values, "bimodal": bimodal_values, "spike": spike_values,
              "polynomial-tail": polynomial_tail_values, "gaussian-envelope": gaussian_envelope_values}
    if preset not in makers:
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    v = makers[preset](vg, **kw)
    if cutoff and preset != "spike":
        v = v * support_cutoff(vg)
    if not grid.homogeneous:
        rho = 1.0 + density_modulation * np.sin(2 * np.pi * grid.x_nodes / grid.x_period)
        v = rho.reshape((-1,) + (1,) * vg.dim) * v[None]
    return DistributionField(grid, v)
