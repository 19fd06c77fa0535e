"""Shared, session-scoped solver runs (each one costs seconds)."""

import numpy as np
import pytest

from beamfsi.beam import BeamGrid, BeamProfile, BoundaryConditionKind
from beamfsi.coupling import FsiConfig, cutoff_for, reference_domain
from beamfsi.fluid import FluidSystem, SolverOptions, solve_navier_stokes
from beamfsi.fluid.boundary import ProfileKind
from beamfsi.geometry import transform_matrices

COARSE = (24, 12, 12)
DIRECT = SolverOptions(linear_method="direct")


def fluid_run(profile=ProfileKind.SYMMETRIC_POISEUILLE, gamma=0.002, h_amp=0.0, resolution=COARSE, options=DIRECT):
    cfg = FsiConfig(resolution=resolution, profile_kind=profile, gamma=gamma)
    domain = reference_domain(cfg)
    grid = cfg.beam_grid
    h = BeamProfile(grid, h_amp * (1 - grid.nodes**2) ** 2, BoundaryConditionKind.CLAMPED) if h_amp else None
    matrices = transform_matrices(h, cutoff_for(cfg), domain)
    bc = cfg.boundary_data
    system = FluidSystem(domain, matrices, bc, 1.0, options)
    state, report = solve_navier_stokes(matrices, bc, system=system)
    return cfg, matrices, state, report


@pytest.fixture(scope="session")
def symmetric_run():
    return fluid_run()


@pytest.fixture(scope="session")
def asymmetric_run():
    return fluid_run(ProfileKind.ASYMMETRIC_BUMP, gamma=1.0)


@pytest.fixture(scope="session")
def deformed_run():
    return fluid_run(ProfileKind.ASYMMETRIC_BUMP, gamma=1.0, h_amp=0.03)


@pytest.fixture(scope="session")
def beam_grid():
    return BeamGrid(41)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
