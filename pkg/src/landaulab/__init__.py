"""Numerical laboratory for the Landau collision operator with gamma in (-2, 0]."""

__version__ = "0.1.0"

from .grid import (DistributionField, KineticCylinder, KineticPoint, PhaseGrid, VelocityGrid, galilean_shift,
                   homogeneous_grid, kinetic_transform, metric_dL, metric_dP)
from .coefficients import (CoefficientField, PotentialParams, compute_coefficients, precompute_kernels,
                           verify_divergence_identities)
from .hydro import HydroBounds, HydroState, check_admissible, hydro_state
from .initial import make_initial
from .solver import RunRecord, SolverConfig, run
from .estimates import (BarrierSpec, EnvelopeVerdict, bootstrap_exponents, fixed_point_Kstar, holder_quotient,
                        verify_decay_envelope, verify_gaussian_propagation, verify_polynomial_barrier)

__all__ = [name for name in dir() if not name.startswith("_")]
