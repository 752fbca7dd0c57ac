"""Empirical Hölder exponent in the kinetic distance d_L.

For a relaxing bimodal run we sample close pairs of kinetic points and
find the largest beta whose quotient |f(z1) - f(z2)| / (w d_L^beta) keeps
its tail within a fixed multiple of its median.  The spread table shows
how the quotient degrades as beta grows.
"""

from landaulab import (PhaseGrid, PotentialParams, SolverConfig, VelocityGrid, make_initial, precompute_kernels,
                       run)
from landaulab.coefficients import coefficients_from_values
from landaulab.estimates import certified_alpha0, holder_quotient

vg = VelocityGrid(2, 8.0, 64)
params = PotentialParams.for_dim(2, -1.0)
pack = precompute_kernels(vg, params)
f0 = make_initial(PhaseGrid(vg), "bimodal")
rec = run(f0, None, SolverConfig(t_end=0.3, snapshot_stride=40), params, kernels=pack)

alpha = certified_alpha0(coefficients_from_values(f0.values, pack), params.gamma)
res = holder_quotient(rec, alpha=alpha, n_pairs=6000, seed=1)
print(f"{res.mode}, alpha = {alpha:.3f}; pairs per stratum: {res.strata}")
for b, s in res.p99_over_median.items():
    print(f"  beta {b:4.2f}: p99/median {s:6.2f}")
print(f"beta_fit = {res.beta_fit}, constant = {res.constant:.3g}")
