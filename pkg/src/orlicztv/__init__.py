"""Generalized Orlicz energies on regular grids.

The package provides a small calculus of convex spatial integrands
phi(x, t) (powers, double-phase, variable exponents, and their powers),
integral modulars with the norms they induce, discrete gradient energies
with quadratic fidelity or fixed boundary data, minimizers for the smooth
and nonsmooth regimes, and a sweep harness that drives the powered
energies toward their p -> 1 limits.
"""

from .errors import NumericalError
from .fields import (Grid, ScalarField, VectorField, constant_field,
                     coordinates, dirichlet_grid, divergence, gradient,
                     inner, magnitude, norm_l1, norm_l2, ramp_field,
                     random_lipschitz_field, read_field_csv, read_pgm,
                     smoothstep_field, step_field, total_variation,
                     write_field_csv, write_pgm)
from .phi import (ConditionReport, DoublePhasePhi, PhiFunction,
                  PowerComposedPhi, PowerPhi, VariableExponentPhi,
                  check_almost_decreasing, check_almost_increasing,
                  check_unit_normalization, power_compose)
from .modular import luxemburg_norm, modular, sobolev_norm
from .solvers import (BoundaryValueSpec, DenoiseSpec, DoublePhaseLimitSpec,
                      SolveReport, SolverOpts, VariableExponentLimitSpec,
                      energy, solve_primal_dual, solve_smooth)
from .harness import (DEFAULT_SCHEDULE, SweepConfig, SweepPredicates,
                      SweepReport, SweepRow, default_double_phase_sweep,
                      default_variable_exponent_sweep, holder_exponent,
                      run_sweep, write_sweep_csv, young_correction)

__version__ = "0.1.0"

__all__ = [
    "NumericalError",
    "Grid", "ScalarField", "VectorField", "dirichlet_grid", "coordinates",
    "gradient", "divergence", "magnitude", "total_variation", "inner",
    "norm_l1", "norm_l2", "constant_field", "step_field", "ramp_field",
    "smoothstep_field", "random_lipschitz_field", "read_field_csv",
    "write_field_csv", "read_pgm", "write_pgm",
    "PhiFunction", "PowerPhi", "DoublePhasePhi", "VariableExponentPhi",
    "PowerComposedPhi", "power_compose", "ConditionReport",
    "check_unit_normalization", "check_almost_increasing",
    "check_almost_decreasing",
    "modular", "luxemburg_norm", "sobolev_norm",
    "BoundaryValueSpec", "DenoiseSpec", "DoublePhaseLimitSpec",
    "VariableExponentLimitSpec", "SolverOpts", "SolveReport", "energy",
    "solve_smooth", "solve_primal_dual",
    "SweepConfig", "SweepPredicates", "SweepRow", "SweepReport",
    "young_correction", "holder_exponent", "run_sweep", "write_sweep_csv",
    "DEFAULT_SCHEDULE", "default_double_phase_sweep",
    "default_variable_exponent_sweep",
]
