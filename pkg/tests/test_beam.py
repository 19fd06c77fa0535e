import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamfsi.beam import (
    EMBEDDING_BOUNDS,
    BeamGrid,
    BeamProfile,
    BoundaryConditionKind,
    RestoringForce,
    admits_bc,
    beam_energy,
    beam_norms,
    beam_operators,
    embedding_constant,
    fd_weights,
    full_h4_norm,
    norm_equivalence_check,
    norm_H4,
    random_admissible_profile,
    solve_beam,
)
from beamfsi.errors import GridMismatch, InvalidLoad, NonConvergence, ValidationError

from . import oracles

CL, HI = BoundaryConditionKind.CLAMPED, BoundaryConditionKind.HINGED
BCS = [CL, HI]


class TestGridAndTypes:
    def test_odd_node_count_required(self):
        with pytest.raises(ValidationError):
            BeamGrid(40)
        with pytest.raises(ValidationError):
            BeamGrid(7)

    def test_trapezoid_weights_integrate_constants(self):
        g = BeamGrid(21)
        assert g.weights.sum() == pytest.approx(2.0, abs=1e-14)
        assert g.nodes[10] == 0.0

    def test_profile_shape_checked(self):
        with pytest.raises(GridMismatch):
            BeamProfile(BeamGrid(11), np.zeros(12), CL)

    def test_profile_is_read_only(self):
        h = BeamProfile.zeros(BeamGrid(11), CL)
        with pytest.raises(ValueError):
            h.values[3] = 1.0

    def test_bc_parse(self):
        assert BoundaryConditionKind.parse("Hinged") is HI
        with pytest.raises(ValidationError):
            BoundaryConditionKind.parse("free")

    @pytest.mark.parametrize("kw", [dict(kind="cubic"), dict(kind="linear", stiffness=-1.0),
                                    dict(kind="saturating", stiffness=1.0, saturation=0.0)])
    def test_restoring_force_validation(self, kw):
        with pytest.raises(ValidationError):
            RestoringForce(**kw)

    def test_saturating_potential_is_antiderivative(self):
        f = RestoringForce.saturating(3.0, 0.4)
        h = np.linspace(-5, 5, 2001)
        dF = np.gradient(f.potential(h), h)
        assert np.max(np.abs(dF[5:-5] - f.f(h)[5:-5])) < 1e-4
        assert f.potential(0.0) == 0.0
        assert np.isfinite(f.potential(1e6))


class TestOperators:
    def test_fd_weights_classical_stencils(self):
        np.testing.assert_allclose(fd_weights([-1, 0, 1], 2), [1, -2, 1], atol=1e-13)
        np.testing.assert_allclose(fd_weights([-2, -1, 0, 1, 2], 4), [1, -4, 6, -4, 1], atol=1e-12)

    @pytest.mark.parametrize("bc", BCS)
    def test_fourth_difference_exact_on_quartic(self, bc):
        grid = BeamGrid(41)
        exact = oracles.clamped_quartic if bc is CL else oracles.hinged_quartic
        h = exact(grid.nodes)
        ops = beam_operators(grid, bc)
        np.testing.assert_allclose(ops.L4 @ h[1:-1], 1.0, atol=1e-9)

    @pytest.mark.parametrize("bc", BCS)
    def test_inverse_is_positive(self, bc):
        # clamped and hinged beams both have positive Green's functions
        L = beam_operators(BeamGrid(61), bc).L4
        assert np.min(np.linalg.inv(L)) > 0


class TestSolveBeam:
    @pytest.mark.parametrize("bc", BCS)
    def test_zero_load_zero_solution(self, bc):
        grid = BeamGrid(51)
        h = solve_beam(np.zeros(grid.n_nodes), RestoringForce.zero(), bc, grid)
        assert np.all(h.values == 0.0)

    @pytest.mark.parametrize("bc,exact,peak", [(CL, oracles.clamped_quartic, 1 / 24), (HI, oracles.hinged_quartic, 5 / 24)])
    def test_unit_load_closed_form(self, bc, exact, peak):
        grid = BeamGrid(201)
        h = solve_beam(np.ones(grid.n_nodes), RestoringForce.zero(), bc, grid)
        assert np.max(np.abs(h.values - exact(grid.nodes))) <= 1e-8
        assert np.max(np.abs(h.values)) == pytest.approx(peak, rel=1e-9)

    @pytest.mark.parametrize("bc", BCS)
    def test_linear_spring_against_collocation(self, bc):
        grid = BeamGrid(161)
        load = lambda y: 1.0 + 0.5 * np.cos(np.pi * y)  # noqa: E731
        h = solve_beam(load(grid.nodes), RestoringForce.linear(50.0), bc, grid)
        ref = oracles.bvp_beam(load, 50.0, bc.value, grid.nodes)
        # second-order stencil error dominates
        assert np.max(np.abs(h.values - ref)) < 2e-4 * np.max(np.abs(ref))

    def test_saturating_spring_converges(self):
        grid = BeamGrid(81)
        f = RestoringForce.saturating(200.0, 0.01)
        h = solve_beam(np.full(grid.n_nodes, 5.0), f, CL, grid)
        ops = beam_operators(grid, CL)
        r = ops.L4 @ h.interior + f.f(h.interior) - 5.0
        assert np.max(np.abs(r)) < 1e-9

    def test_nonfinite_load_rejected(self):
        grid = BeamGrid(21)
        g = np.ones(grid.n_nodes)
        g[4] = np.nan
        with pytest.raises(InvalidLoad):
            solve_beam(g, RestoringForce.zero(), CL, grid)

    def test_wrong_load_length(self):
        with pytest.raises(GridMismatch):
            solve_beam(np.ones(5), RestoringForce.zero(), CL, BeamGrid(21))

    def test_iteration_cap(self):
        grid = BeamGrid(41)
        with pytest.raises(NonConvergence):
            solve_beam(np.full(grid.n_nodes, 1e3), RestoringForce.saturating(1e6, 1e-3), CL, grid, tol=1e-14, max_iter=1)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0.0, 5.0), min_size=3, max_size=3), st.sampled_from(BCS))
    def test_comparison_principle(self, coeffs, bc):
        """A non-negative load gives a non-negative deflection."""
        grid = BeamGrid(61)
        y = grid.nodes
        g = coeffs[0] + coeffs[1] * y**2 + coeffs[2] * (1 + np.sin(3 * y))
        h = solve_beam(g, RestoringForce.linear(1.0), bc, grid)
        assert np.min(h.values) >= -1e-14

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-3.0, 3.0), st.floats(0.1, 4.0), st.sampled_from(BCS))
    def test_linearity_in_load(self, a, b, bc):
        grid = BeamGrid(41)
        g1, g2 = np.ones(grid.n_nodes), grid.nodes**2
        f = RestoringForce.linear(2.0)
        h = solve_beam(a * g1 + b * g2, f, bc, grid)
        h1, h2 = solve_beam(g1, f, bc, grid), solve_beam(g2, f, bc, grid)
        np.testing.assert_allclose(h.values, a * h1.values + b * h2.values, atol=1e-12)


class TestEnergy:
    def test_zero_state(self):
        grid = BeamGrid(21)
        assert beam_energy(BeamProfile.zeros(grid, CL), RestoringForce.linear(3.0), np.zeros(grid.n_nodes)) == 0.0

    def test_clamped_quartic_energy(self):
        grid = BeamGrid(401)
        h = BeamProfile(grid, oracles.clamped_quartic(grid.nodes), CL)
        assert beam_energy(h, RestoringForce.zero(), np.ones(grid.n_nodes)) == pytest.approx(
            oracles.clamped_energy_exact(), rel=1e-4)
        assert oracles.clamped_energy_exact() == pytest.approx(-1 / 45, rel=1e-12)

    @pytest.mark.parametrize("bc", BCS)
    def test_solution_minimizes_energy(self, bc):
        grid = BeamGrid(61)
        f = RestoringForce.saturating(5.0, 0.1)
        g = 1 + grid.nodes
        h = solve_beam(g, f, bc, grid)
        e0 = beam_energy(h, f, g)
        rng = np.random.default_rng(1)
        for _ in range(100):
            d = random_admissible_profile(rng, grid, bc, amplitude=10 ** rng.uniform(-3, 0))
            assert beam_energy(h + d, f, g) >= e0 - 1e-13

    def test_grid_mismatch(self):
        h = BeamProfile.zeros(BeamGrid(21), CL)
        with pytest.raises(GridMismatch):
            beam_energy(h, RestoringForce.zero(), np.ones(23))


class TestNorms:
    def test_zero(self):
        n = beam_norms(BeamProfile.zeros(BeamGrid(21), HI))
        assert n == {"norm_H": 0.0, "norm_H4": 0.0, "norm_inf": 0.0}

    def test_quartic_bump_norms(self):
        grid = BeamGrid(401)
        h = BeamProfile(grid, (1 - grid.nodes**2) ** 2, CL)
        n = beam_norms(h)
        assert n["norm_H"] == pytest.approx(np.sqrt(25.6), rel=1e-3)
        assert n["norm_H4"] == pytest.approx(24 * np.sqrt(2), rel=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(BCS))
    def test_embedding_inequality(self, seed, bc):
        grid = BeamGrid(101)
        h = random_admissible_profile(np.random.default_rng(seed), grid, bc)
        n = h.norms()
        assert n["norm_inf"] <= EMBEDDING_BOUNDS[bc] * n["norm_H"]


class TestEmbeddingConstant:
    @pytest.mark.parametrize("bc,name", [(CL, "clamped"), (HI, "hinged")])
    def test_matches_green_function_diagonal(self, bc, name):
        res = embedding_constant(bc, BeamGrid(401))
        assert res.s_discrete == pytest.approx(oracles.sharp_embedding(name), rel=1e-2)
        assert res.s_discrete < res.s_paper_bound
        assert res.argmax == 0.0

    @pytest.mark.parametrize("bc", BCS)
    def test_maximizer_attains_constant(self, bc):
        res = embedding_constant(bc, BeamGrid(101))
        n = res.maximizer.norms()
        assert n["norm_H"] == pytest.approx(1.0, rel=1e-10)
        assert n["norm_inf"] == pytest.approx(res.s_discrete, rel=1e-10)

    @pytest.mark.parametrize("bc", BCS)
    def test_second_order_refinement(self, bc):
        s = [embedding_constant(bc, BeamGrid(n)).s_discrete for n in (51, 101, 201)]
        ratio = (s[0] - s[1]) / (s[1] - s[2])
        assert 3.5 < ratio < 4.5


class TestNormEquivalence:
    def test_parabola_rejected_for_both_bcs(self):
        grid = BeamGrid(101)
        v = 1 - grid.nodes**2
        assert not admits_bc(v, grid, CL)
        assert not admits_bc(v, grid, HI)

    def test_exact_profiles_admitted(self):
        grid = BeamGrid(101)
        assert admits_bc(oracles.clamped_quartic(grid.nodes), grid, CL)
        assert admits_bc(oracles.hinged_quartic(grid.nodes), grid, HI)
        assert not admits_bc(oracles.hinged_quartic(grid.nodes), grid, CL)

    def test_full_norm_dominates(self):
        grid = BeamGrid(201)
        h = BeamProfile(grid, (1 - grid.nodes**2) ** 2, CL)
        assert full_h4_norm(h) / norm_H4(h) >= 1.0

    @pytest.mark.parametrize("bc", BCS)
    def test_sampled_constants(self, bc):
        eq = norm_equivalence_check(bc, BeamGrid(101), n_samples=100, seed=3)
        assert eq.counterexample_rejected
        assert 1.0 <= eq.c_lower <= eq.c_upper < 10.0

    @pytest.mark.parametrize("bc", BCS)
    def test_random_profiles_admissible(self, bc):
        grid = BeamGrid(101)
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert admits_bc(random_admissible_profile(rng, grid, bc).values, grid, bc)
