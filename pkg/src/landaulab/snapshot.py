"""``.lfs`` snapshot files: one JSON header line, then little-endian float64 data."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import DistributionField, PhaseGrid, VelocityGrid

LAYOUT = "row-major-x-then-v"


def _header(grid: PhaseGrid, gamma, t, extra=None) -> dict:
    vg = grid.vgrid
    h = {"dim": vg.dim, "L": vg.half_width, "N": vg.points_per_axis,
         "Nx": grid.x_points, "X": grid.x_period,
         "gamma": None if gamma is None else float(gamma), "t": float(t), "layout": LAYOUT}
    if extra:
        h.update(extra)
    return h


def write_array(path, grid: PhaseGrid, data: np.ndarray, gamma=None, t=0.0, extra=None):
    header = _header(grid, gamma, t, extra)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_array(path):
    """Return ``(header, grid, flat float64 array)``."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode())
    if header.get("layout") != LAYOUT:
        raise ValueError(f"unsupported layout {header.get('layout')!r}")
    vg = VelocityGrid(int(header["dim"]), float(header["L"]), int(header["N"]))
    grid = PhaseGrid(vg, header.get("X"), header.get("Nx"))
    data = np.frombuffer(raw[nl + 1:], dtype="<f8").astype(float)
    return header, grid, data


def write_field(path, f: DistributionField, gamma=None):
    write_array(path, f.grid, f.values, gamma, f.time)


def read_field(path):
    """Return ``(DistributionField, header)``."""
    header, grid, data = read_array(path)
    n = int(np.prod(grid.shape))
    if data.size != n:
        raise ValueError(f"expected {n} values, found {data.size}")
    return DistributionField(grid, data.reshape(grid.shape), float(header["t"])), header


def write_coefficients(prefix, grid: PhaseGrid, coeffs, gamma, t=0.0):
    """Write ``<prefix>_a.lfs`` (d(d+1)/2 planes), ``_b.lfs`` (d planes), ``_c.lfs``."""
    from .coefficients import sym_pairs

    d = grid.vgrid.dim
    a = np.stack([coeffs.a_bar[i, j] for i, j in sym_pairs(d)])
    paths = []
    for tag, arr, planes in (("a", a, len(sym_pairs(d))), ("b", coeffs.b_bar, d), ("c", coeffs.c_bar[None], 1)):
        # planes lead, then x, then v
        p = Path(f"{prefix}_{tag}.lfs")
        write_array(p, grid, arr, gamma, t, {"planes": planes})
        paths.append(p)
    return paths
