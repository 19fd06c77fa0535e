"""Transformed stationary Navier-Stokes solver on a MAC grid."""

from .boundary import BoundaryData, ProfileKind, build_boundary_data, poiseuille
from .solver import (
    FieldDiagnostics,
    FluidState,
    FluidSystem,
    SolverOptions,
    SolverReport,
    field_diagnostics,
    flux_through_slice,
    parity_residual,
    picard_step,
    sample_velocity,
    solve_navier_stokes,
    velocity_h1_norm,
    velocity_norm,
)

__all__ = [
    "BoundaryData",
    "FieldDiagnostics",
    "FluidState",
    "FluidSystem",
    "ProfileKind",
    "SolverOptions",
    "SolverReport",
    "build_boundary_data",
    "field_diagnostics",
    "flux_through_slice",
    "parity_residual",
    "picard_step",
    "poiseuille",
    "sample_velocity",
    "solve_navier_stokes",
    "velocity_h1_norm",
    "velocity_norm",
]
