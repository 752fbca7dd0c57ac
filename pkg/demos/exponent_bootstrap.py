"""The decay exponent bootstrap and the fixed-point threshold K*.

Starting from alpha = 0, each application of the local upper bound
improves the velocity decay exponent until it saturates at 1.  Below the
branch point -2d/(d+2) the exponent formula changes, but the two branches
meet continuously.
"""

from landaulab.estimates import bootstrap_exponents, branch_point, exponent_P, fixed_point_Kstar

for d in (2, 3):
    print(f"d = {d}: branch point {branch_point(d):+.4f}")
    for gamma in (0.0, -0.5, -1.0, -1.5, -1.9):
        rep = bootstrap_exponents(d, gamma)
        seq = ", ".join(f"{a:.3f}" for a in rep.alpha_sequence)
        print(f"  gamma {gamma:+.1f}: {rep.steps} steps, min gain {rep.min_gain:.3f}, alpha: {seq}")
    g = branch_point(d)
    jump = abs(exponent_P(d, 0.5, g) - exponent_P(d, 0.5, g - 1e-12))
    print(f"  jump of P across the branch point: {jump:.1e}")

for C in (0.25, 0.5, 1.0, 4.0):
    print(f"K*(gamma=-1, d=3, C={C}) = {fixed_point_Kstar(-1.0, 3, C):.10f}")
