"""Relaxation of two counter-streaming bumps toward a Maxwellian.

Run with ``python demos/relaxation.py``.  Mass stays fixed to rounding and
the distance to the Maxwellian with the same moments shrinks.  The entropy
falls monotonically with upwind face values for the drift term.  With the
default second-order centered face values it falls too, until late in the
relaxation where it creeps up by an amount that vanishes as the grid is
refined.
"""

import numpy as np

from landaulab import (HydroBounds, PhaseGrid, PotentialParams, SolverConfig, VelocityGrid, hydro_state,
                       make_initial, precompute_kernels, run)
from landaulab.initial import maxwellian_values

vg = VelocityGrid(2, 6.0, 48)
params = PotentialParams.for_dim(2, -1.0)
pack = precompute_kernels(vg, params)
f0 = make_initial(PhaseGrid(vg), "bimodal")
bounds = HydroBounds(0.25, 4.0, 50.0, 10.0)

rec = run(f0, bounds, SolverConfig(t_end=2.0, snapshot_stride=200), params, kernels=pack)
print(f"{'t':>6} {'mass':>18} {'entropy':>12} {'|f - M|_1':>10}")
for s in rec.snapshots:
    m, e, h = hydro_state(s).scalar()
    # energy is the second moment, so the matching temperature is e / (d m)
    M = maxwellian_values(vg, m, e / (vg.dim * m))
    gap = np.sum(np.abs(s.values - M)) * vg.cell_volume
    print(f"{s.time:6.3f} {m:18.15f} {h:12.6f} {gap:10.4f}")

for adv in ("centered", "upwind"):
    r = rec if adv == "centered" else run(f0, bounds, SolverConfig(t_end=2.0, snapshot_stride=10**6, advection=adv),
                                          params, kernels=pack)
    ent = r.trace_array("entropy")
    rise = float(np.max(ent - np.minimum.accumulate(ent)))
    print(f"{adv:>8}: largest entropy rise above its running minimum {rise:.2e}, clamps {r.clamps}")
