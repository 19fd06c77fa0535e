import numpy as np
import pytest
from scipy import integrate

from beamfsi.errors import ParityUndefined, ValidationError
from beamfsi.fluid import (
    FluidSystem,
    ProfileKind,
    SolverOptions,
    build_boundary_data,
    field_diagnostics,
    flux_through_slice,
    parity_residual,
    picard_step,
    poiseuille,
    solve_navier_stokes,
    velocity_norm,
)
from beamfsi.fluid.boundary import bump_profile
from beamfsi.fluid.mms import run_mms
from beamfsi.fluid.solver import face_planes
from beamfsi.geometry import ChannelSpec, CutoffFunction, Obstacle, build_reference_domain, transform_matrices

from . import oracles
from .conftest import DIRECT, fluid_run


class TestBoundaryData:
    def test_poiseuille_unit_flux(self):
        val, _ = integrate.dblquad(lambda z, y: poiseuille(y, z), -1, 1, -1, 1, epsabs=1e-13)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_bump_keeps_unit_flux(self):
        val, _ = integrate.dblquad(lambda z, y: bump_profile(y, z, 0.5), -1, 1, -1, 1, epsabs=1e-13)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_zero_gamma_zero_data(self):
        g = build_boundary_data(0.0, "asymmetric", 0.5).velocity_function(3.0)
        x = np.array([-3.0, 3.0, 0.0])
        assert not np.any(g(0, x, np.zeros(3), np.zeros(3)))

    def test_kind_parse_and_validation(self):
        assert ProfileKind.parse("AsymmetricBump") is ProfileKind.ASYMMETRIC_BUMP
        with pytest.raises(ValidationError):
            ProfileKind.parse("plug")
        with pytest.raises(ValidationError):
            build_boundary_data(-1.0)
        with pytest.raises(ValidationError):
            build_boundary_data(1.0, "asymmetric", 2.0)

    def test_symmetric_flag(self):
        assert build_boundary_data(1.0).is_symmetric
        assert not build_boundary_data(1.0, "asymmetric", 0.5).is_symmetric


@pytest.fixture(scope="module")
def loop_case():
    """Small channel with a stair-step obstacle solved by the loop oracle and the package."""
    channel, ob = ChannelSpec(1.5), Obstacle(0.3, 0.2, 4.0)
    domain = build_reference_domain(channel, ob, (16, 8, 8))
    assert domain.solid.any()
    gamma = 3.0
    bc = build_boundary_data(gamma, "asymmetric", 0.5)
    oracle = oracles.LoopMac(domain.solid, channel.R, gamma, bc.inlet, bc.outlet)
    matrices = transform_matrices(None, CutoffFunction.for_obstacle(ob, channel), domain)
    return domain, bc, oracle, matrices


def _package_to_oracle(state, oracle):
    layout = state.layout
    u = np.zeros(len(oracle.unknowns))
    for (c, idx), k in oracle.unknowns.items():
        pad = tuple(i if e == c else i + 1 for e, i in enumerate(idx))
        u[k] = state.x[layout.unknown_offsets[c] + layout.components[c].index[pad]]
    return u


class TestUntransformedOracle:
    def test_unknown_count(self, loop_case):
        domain, bc, oracle, matrices = loop_case
        state = picard_step(matrices, None, bc, domain=domain, options=DIRECT)
        assert state.layout.n_unknown == len(oracle.unknowns)
        assert state.layout.n_cells == len(oracle.cells)

    def test_stokes_step_matches(self, loop_case):
        domain, bc, oracle, matrices = loop_case
        state = picard_step(matrices, None, bc, domain=domain, options=DIRECT)
        u_ref, p_ref = oracle.solve()
        scale = np.max(np.abs(u_ref))
        assert np.max(np.abs(_package_to_oracle(state, oracle) - u_ref)) <= 1e-12 * scale
        assert np.max(np.abs(state.pressure - p_ref)) <= 1e-12 * max(1.0, np.max(np.abs(p_ref)))

    def test_oseen_step_matches(self, loop_case):
        domain, bc, oracle, matrices = loop_case
        stokes = picard_step(matrices, None, bc, domain=domain, options=DIRECT)
        oseen = picard_step(matrices, stokes, bc, options=DIRECT)
        u0, _ = oracle.solve()
        u_ref, p_ref = oracle.solve(oracle.averaged_velocity(u0))
        scale = np.max(np.abs(u_ref))
        assert np.max(np.abs(_package_to_oracle(oseen, oracle) - u_ref)) <= 1e-12 * scale
        assert np.max(np.abs(oseen.pressure - p_ref)) <= 1e-12 * max(1.0, np.max(np.abs(p_ref)))


class TestSolveNavierStokes:
    def test_zero_data(self):
        cfg, matrices, state, report = fluid_run(gamma=0.0)
        assert report.picard_iterations == 1
        assert not np.any(state.x) and not np.any(state.pressure)

    def test_nonlinear_residual_reached(self, asymmetric_run):
        cfg, matrices, state, report = asymmetric_run
        assert report.final_nonlinear_residual <= cfg.fluid_tol
        assert state.system.residual(state) <= cfg.fluid_tol

    def test_linear_response(self):
        norms = [velocity_norm(fluid_run(gamma=g)[2]) for g in (0.002, 0.004)]
        assert 1.9 <= norms[1] / norms[0] <= 2.1

    def test_iterative_matches_direct(self):
        _, _, direct, _ = fluid_run(ProfileKind.ASYMMETRIC_BUMP, gamma=0.5, h_amp=0.02)
        _, _, krylov, _ = fluid_run(ProfileKind.ASYMMETRIC_BUMP, gamma=0.5, h_amp=0.02,
                                    options=SolverOptions(linear_method="iterative"))
        scale = np.max(np.abs(direct.x))
        assert np.max(np.abs(krylov.x - direct.x)) <= 1e-8 * scale

    def test_needs_domain(self, symmetric_run):
        _, matrices, state, _ = symmetric_run
        with pytest.raises(ValidationError):
            solve_navier_stokes(matrices, build_boundary_data(1.0))

    def test_options_validation(self):
        with pytest.raises(ValidationError):
            SolverOptions(relaxation=0.0)
        with pytest.raises(ValidationError):
            SolverOptions(linear_method="cg")

    def test_viscosity_positive(self, symmetric_run):
        cfg, matrices, state, _ = symmetric_run
        with pytest.raises(ValidationError):
            FluidSystem(state.layout.domain, matrices, cfg.boundary_data, eta=0.0)


class TestFlux:
    @pytest.mark.parametrize("name", ["symmetric_run", "asymmetric_run", "deformed_run"])
    def test_every_slice_carries_gamma(self, name, request):
        cfg, _, state, _ = request.getfixturevalue(name)
        fluxes = np.array([flux_through_slice(state, x) for x in face_planes(state)])
        assert np.max(np.abs(fluxes - cfg.gamma)) <= 1e-8 * cfg.gamma

    def test_off_plane_rejected(self, symmetric_run):
        with pytest.raises(ValidationError):
            flux_through_slice(symmetric_run[2], 0.01)

    def test_discrete_divergence_free(self, deformed_run):
        cfg, matrices, state, _ = deformed_run
        diag = field_diagnostics(state, matrices, 0.9)
        assert diag.div_residual <= 1e-9 * cfg.gamma / min(state.layout.spacing)
        assert diag.sobolev_norms["W1"] > 0


class TestParity:
    def test_symmetric_state_even(self, symmetric_run):
        cfg, _, state, _ = symmetric_run
        assert parity_residual(state) <= 10 * cfg.fluid_tol

    def test_asymmetric_state_breaks_parity(self, asymmetric_run):
        assert parity_residual(asymmetric_run[2]) > 1e-3

    def test_odd_grid_undefined(self):
        cfg, _, state, _ = fluid_run(resolution=(24, 12, 13))
        with pytest.raises(ParityUndefined):
            parity_residual(state)



class TestManufactured:
    def test_second_order_decay(self):
        coarse, fine = run_mms((16, 8, 8)), run_mms((32, 16, 16))
        assert coarse.velocity_error / fine.velocity_error >= 3.0
        assert fine.pressure_error < coarse.pressure_error
