"""Velocity tails: the decay envelope and the Gaussian upper bound.

The decay constant K0 is the smallest number with
f <= K0 (1 + t^(-d/2)) (1 + |v|)^-1 on the inner window.  The Gaussian
certificate finds the largest alpha whose barrier exp(-alpha |v|^2) is a
supersolution in the far field, and the propagation check compares the
measured constant with the predicted growth.
"""

import numpy as np

from landaulab import (PhaseGrid, PotentialParams, SolverConfig, VelocityGrid, make_initial, precompute_kernels,
                       run)
from landaulab.coefficients import coefficients_from_values
from landaulab.estimates import certified_alpha0, verify_decay_envelope, verify_gaussian_propagation

vg = VelocityGrid(2, 8.0, 48)
params = PotentialParams.for_dim(2, -1.0)
pack = precompute_kernels(vg, params)
f0 = make_initial(PhaseGrid(vg), "bimodal")
rec = run(f0, None, SolverConfig(t_end=1.0, snapshot_stride=50), params, kernels=pack)

env = verify_decay_envelope(rec)
print(f"K0 = {env.measured_constant:.4f}, attained at t = {env.worst_point.t:.3f}, |v| = "
      f"{np.linalg.norm(env.worst_point.v):.3f}")

alpha0 = certified_alpha0(coefficients_from_values(f0.values, pack), params.gamma)
print(f"certified alpha0 of the initial data: {alpha0:.4f}")
C0 = float(np.max(f0.values / np.exp(-alpha0 * vg.speed**2)))
try:
    g = verify_gaussian_propagation(rec, C0=C0, alpha=alpha0, alpha0=alpha0, kernels=pack)
    print(f"C1 = {g.measured_constant:.4f} vs bound {g.details['bound'][-1]:.4f}; holds: {g.holds}")
except ValueError as exc:
    print("Gaussian propagation not checked:", exc)
