"""Fixed-point coupling of the fluid solve, lift extraction and beam solve.

The map h_bar -> h sends a beam profile to the solution of
h'''' + f(h) = L(h_bar), where L(h_bar) is the lift of the flow in the
domain deformed by h_bar.  ``solve_fsi`` iterates
h_{k+1} = (1 - rho) h_k + rho map(h_k) from h_0 = 0.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .beam import BeamGrid, BeamProfile, BoundaryConditionKind, RestoringForce, norm_H4, random_admissible_profile, solve_beam
from .errors import (
    ConfigNotSymmetric,
    InadmissibleProfile,
    NonConvergence,
    SolverError,
    ValidationError,
)
from .fluid import BoundaryData, FluidState, SolverOptions, build_boundary_data, parity_residual, solve_navier_stokes, velocity_norm
from .fluid.boundary import ProfileKind
from .fluid.solver import FluidSystem, SolverReport, sample_velocity
from .geometry import (
    ChannelSpec,
    CutoffFunction,
    Deformation,
    Obstacle,
    ReferenceDomain,
    build_reference_domain,
    clearance,
    transform_matrices,
)
from .lift import LiftMethod, LiftProfile, compute_lift_profile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FsiConfig:
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    obstacle: Obstacle = field(default_factory=Obstacle)
    bc: BoundaryConditionKind = BoundaryConditionKind.CLAMPED
    restoring: RestoringForce = field(default_factory=RestoringForce)
    eta: float = 1.0
    gamma: float = 0.002
    resolution: tuple = (48, 24, 24)
    beam_nodes: int = 41
    profile_kind: ProfileKind = ProfileKind.SYMMETRIC_POISEUILLE
    bump_s: float = 0.5
    omega: float = 1.25
    fluid_tol: float = 1e-9
    linear_tol: float = 1e-11
    beam_tol: float = 1e-10
    coupling_tol: float = 1e-8
    relaxation: float = 1.0
    max_outer: int = 50
    max_picard: int = 50
    picard_relaxation: float = 1.0
    lift_method: LiftMethod = LiftMethod.RESIDUAL
    linear_method: str = "auto"
    direct_threshold: int = 15000
    cutoff_margin: float = 0.2
    cutoff_band: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryConditionKind.parse(self.bc))
        object.__setattr__(self, "profile_kind", ProfileKind.parse(self.profile_kind))
        object.__setattr__(self, "lift_method", LiftMethod.parse(self.lift_method))
        object.__setattr__(self, "resolution", tuple(int(v) for v in self.resolution))
        for name in ("fluid_tol", "linear_tol", "beam_tol", "coupling_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if not (0.0 < self.relaxation <= 1.0):
            raise ValidationError("relaxation must lie in (0, 1]")
        if not (self.gamma >= 0.0 and np.isfinite(self.gamma)):
            raise ValidationError("gamma must be finite and >= 0")
        if not self.eta > 0:
            raise ValidationError("viscosity eta must be positive")
        if self.max_outer < 1:
            raise ValidationError("max_outer must be >= 1")
        self.obstacle.validate(self.channel)
        zmax = max(self.obstacle.Z_plus, self.obstacle.Z_minus)
        if not (1.0 < self.omega < 1.0 / zmax):
            raise ValidationError(f"omega must lie in (1, {1 / zmax:g}), got {self.omega}")
        BeamGrid(self.beam_nodes)

    def with_(self, **kw) -> "FsiConfig":
        return replace(self, **kw)

    def refined(self) -> "FsiConfig":
        return replace(self, resolution=tuple(2 * n for n in self.resolution))

    @property
    def beam_grid(self) -> BeamGrid:
        return BeamGrid(self.beam_nodes)

    @property
    def boundary_data(self) -> BoundaryData:
        return build_boundary_data(self.gamma, self.profile_kind, self.bump_s)

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions(nonlinear_tol=self.fluid_tol, max_picard=self.max_picard, relaxation=self.picard_relaxation,
                             linear_tol=self.linear_tol, linear_method=self.linear_method,
                             direct_threshold=self.direct_threshold)


_DOMAINS: dict = {}


def reference_domain(cfg: FsiConfig) -> ReferenceDomain:
    key = (cfg.channel, cfg.obstacle, cfg.resolution)
    if key not in _DOMAINS:
        if len(_DOMAINS) > 8:
            _DOMAINS.clear()
        _DOMAINS[key] = build_reference_domain(cfg.channel, cfg.obstacle, cfg.resolution)
    return _DOMAINS[key]


def cutoff_for(cfg: FsiConfig) -> CutoffFunction:
    return CutoffFunction.for_obstacle(cfg.obstacle, cfg.channel, cfg.cutoff_margin, cfg.cutoff_band)


@dataclass
class MapResult:
    h: BeamProfile
    state: FluidState
    lift: LiftProfile
    report: SolverReport


def fsi_map(h_bar: BeamProfile, cfg: FsiConfig, warm: Optional[FluidState] = None) -> MapResult:
    """One evaluation of the coupling map: fluid on Omega(h_bar), lift, beam."""
    cl = clearance(h_bar, cfg.obstacle, cfg.omega)
    if not cl.admissible:
        raise InadmissibleProfile(f"max|h| = {np.max(np.abs(h_bar.values)):.4g} violates the clearance bound {cl.bound:.4g}")
    domain = reference_domain(cfg)
    matrices = transform_matrices(h_bar, cutoff_for(cfg), domain)
    bc = cfg.boundary_data
    system = FluidSystem(domain, matrices, bc, cfg.eta, cfg.solver_options)
    state, report = solve_navier_stokes(matrices, bc, cfg.eta, system=system, initial=warm)
    lift = compute_lift_profile(state, matrices, cfg.obstacle, h_bar.grid, cfg.eta, cfg.lift_method)
    h = solve_beam(lift.values, cfg.restoring, cfg.bc, h_bar.grid, cfg.beam_tol)
    return MapResult(h, state, lift, report)


@dataclass
class Equilibrium:
    h: BeamProfile
    state: FluidState
    lift: LiftProfile
    history: list
    contraction_estimate: float
    iterations: int
    fixed_point_residual: float
    converged: bool
    relaxation: float
    fluid_reports: list = field(default_factory=list, repr=False)
    wall_time: float = 0.0

    @property
    def ratios(self) -> list:
        return [b / a if a > 0 else 0.0 for a, b in zip(self.history[:-1], self.history[1:])]

    def summary(self) -> dict:
        n = self.h.norms()
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "contraction_estimate": self.contraction_estimate,
            "fixed_point_residual": self.fixed_point_residual,
            "relaxation": self.relaxation,
            "h_norm_H": n["norm_H"],
            "h_norm_H4": n["norm_H4"],
            "h_norm_inf": n["norm_inf"],
            "lift_norm_inf": self.lift.norm_inf,
            "velocity_norm": velocity_norm(self.state),
            "history": list(self.history),
        }


def solve_fsi(cfg: FsiConfig, h_init: Optional[BeamProfile] = None, verify: bool = True,
              growth_patience: int = 3) -> Equilibrium:
    """Relaxed fixed-point iteration from h_0 = 0 (or ``h_init``)."""
    t0 = time.perf_counter()
    grid = cfg.beam_grid
    h = BeamProfile.zeros(grid, cfg.bc) if h_init is None else h_init
    rho = cfg.relaxation
    history, reports = [], []
    warm = None
    growth = 0
    result = None
    for k in range(1, cfg.max_outer + 1):
        result = fsi_map(h, cfg, warm)
        warm = result.state
        reports.append(result.report)
        h_new = BeamProfile(grid, (1 - rho) * h.values + rho * result.h.values, cfg.bc)
        inc = norm_H4(h_new - h)
        history.append(inc)
        log.info("outer %d: increment %.3e", k, inc)
        h = h_new
        if inc <= cfg.coupling_tol:
            break
        if len(history) >= 2 and history[-1] >= history[-2]:
            growth += 1
            if growth > growth_patience:
                raise NonConvergence(f"coupling increments keep growing (last ratio {history[-1] / history[-2]:.3g}); "
                                     f"gamma = {cfg.gamma:g} lies outside the contraction regime")
            rho *= 0.5
            log.info("increment grew, relaxation halved to %g", rho)
        else:
            growth = 0
    else:
        raise NonConvergence(f"coupling did not converge in {cfg.max_outer} iterations (last increment {history[-1]:.3e})")
    ratios = [b / a for a, b in zip(history[:-1], history[1:]) if a > 0]
    M = float(max(ratios)) if ratios else 0.0
    state, lift = result.state, result.lift
    residual = inc / rho if rho > 0 else inc
    if verify:
        check = fsi_map(h, cfg, warm)
        residual = norm_H4(check.h - h)
        state, lift = check.state, check.lift
    return Equilibrium(h, state, lift, history, M, len(history), float(residual), True, rho, reports,
                       time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Sweeps and checks
# ---------------------------------------------------------------------------


def pull_back_points(points: np.ndarray, h_from: BeamProfile, h_to: BeamProfile, cutoff: CutoffFunction,
                     iterations: int = 30) -> np.ndarray:
    """Reference points of Omega(h_to) that map to the images of ``points`` under phi_{h_from}."""
    target = Deformation(h_from, cutoff).map_point(points)
    dto = Deformation(h_to, cutoff)
    out = target.copy()
    x, y, Z = target[:, 0], target[:, 1], target[:, 2]
    hy = dto.h_of(y)
    z = Z.copy()
    # scalar Newton for z + xi(x, z) h(y) = Z; converges since 1 + d_z xi h > 0
    for _ in range(iterations):
        g = z + cutoff(x, z) * hy - Z
        if np.max(np.abs(g), initial=0.0) < 1e-14:
            break
        _, gz = cutoff.gradient(x, z)
        z = z - g / (1.0 + gz * hy)
    out[:, 2] = z
    return out


@dataclass
class SweepRow:
    gamma: float
    h_norm_H4: float
    velocity_norm: float
    lift_inf: float
    contraction: float
    iterations: int
    lipschitz_h: float = float("nan")
    lipschitz_u: float = float("nan")


def gamma_sweep(cfg: FsiConfig, gammas) -> list:
    """Equilibria along increasing gamma with difference quotients between neighbours."""
    gammas = [float(g) for g in gammas]
    if any(b <= a for a, b in zip(gammas[:-1], gammas[1:])):
        raise ValidationError("gammas must be strictly increasing")
    rows, eqs = [], []
    domain = reference_domain(cfg)
    cutoff = cutoff_for(cfg)
    centers = np.stack([v.ravel() for v in np.meshgrid(*domain.centers, indexing="ij")], axis=1)[domain.fluid.ravel()]
    for i, g in enumerate(gammas):
        eq = solve_fsi(cfg.with_(gamma=g))
        row = SweepRow(g, norm_H4(eq.h), velocity_norm(eq.state), eq.lift.norm_inf, eq.contraction_estimate, eq.iterations)
        if i > 0:
            prev = eqs[-1]
            dg = g - gammas[i - 1]
            row.lipschitz_h = norm_H4(eq.h - prev.h) / dg
            u_prev = sample_velocity(prev.state, centers)
            u_new = sample_velocity(eq.state, pull_back_points(centers, prev.h, eq.h, cutoff))
            row.lipschitz_u = float(np.sqrt(domain.cell_volume * np.sum((u_new - u_prev) ** 2)) / dg)
        rows.append(row)
        eqs.append(eq)
    return rows


def find_gamma_threshold(cfg: FsiConfig, gamma_start: float = 0.01, max_doublings: int = 12) -> float:
    """Double gamma until the coupled or fluid iteration fails; return the last convergent gamma."""
    last = 0.0
    g = gamma_start
    for _ in range(max_doublings):
        try:
            solve_fsi(cfg.with_(gamma=g), verify=False)
        except (SolverError, InadmissibleProfile) as exc:
            log.info("gamma %g failed: %s", g, exc)
            return last
        last = g
        g *= 2.0
    return last


@dataclass
class SymmetryReport:
    h_inf: float
    lift_inf: float
    parity_residual: float
    passed: bool
    thresholds: dict
    resolution: tuple
    refined: Optional["SymmetryReport"] = None
    decreasing: Optional[dict] = None

    def as_dict(self) -> dict:
        out = {
            "resolution": list(self.resolution),
            "h_inf": self.h_inf,
            "lift_inf": self.lift_inf,
            "parity_residual": self.parity_residual,
            "pass": self.passed,
            "thresholds": dict(self.thresholds),
        }
        if self.refined is not None:
            out["refined"] = self.refined.as_dict()
            out["decreasing"] = dict(self.decreasing)
        return out


def check_symmetric_config(cfg: FsiConfig):
    if cfg.profile_kind is not ProfileKind.SYMMETRIC_POISEUILLE:
        raise ConfigNotSymmetric("inflow profile is not even in z")
    if not cfg.obstacle.is_z_symmetric():
        raise ConfigNotSymmetric("obstacle is not symmetric under z -> -z")
    domain = reference_domain(cfg)
    if cfg.resolution[2] % 2 or not domain.is_z_symmetric():
        raise ConfigNotSymmetric("solid mask is not symmetric under z -> -z")


def symmetry_check(cfg: FsiConfig, h_tol: float = 1e-6, refine: bool = True) -> SymmetryReport:
    """Run the coupled solve on a symmetric configuration and measure the symmetry defects."""
    check_symmetric_config(cfg)
    thresholds = {"h_inf": h_tol, "lift_inf": 10 * cfg.fluid_tol, "parity_residual": 10 * cfg.fluid_tol}
    eq = solve_fsi(cfg)
    rep = SymmetryReport(float(np.max(np.abs(eq.h.values))), eq.lift.norm_inf, parity_residual(eq.state), False,
                         thresholds, cfg.resolution)
    rep.passed = (rep.h_inf <= h_tol and rep.lift_inf <= thresholds["lift_inf"]
                  and rep.parity_residual <= thresholds["parity_residual"])
    if refine:
        fine = symmetry_check(cfg.refined(), h_tol, refine=False)
        rep.refined = fine
        rep.decreasing = {
            "h_inf": fine.h_inf < rep.h_inf,
            "lift_inf": fine.lift_inf < rep.lift_inf,
            "parity_residual": fine.parity_residual < rep.parity_residual,
        }
        rep.passed = rep.passed and fine.passed and all(rep.decreasing.values())
    return rep


def uniqueness_probe(cfg: FsiConfig, seed: int = 0, amplitude: float = 0.01):
    """Equilibria from h_0 = 0 and from a random admissible start; returns both and their H4 distance."""
    rng = np.random.default_rng(seed)
    start = random_admissible_profile(rng, cfg.beam_grid, cfg.bc)
    start = start.scaled(amplitude / max(np.max(np.abs(start.values)), 1e-300))
    a = solve_fsi(cfg)
    b = solve_fsi(cfg, h_init=start)
    return a, b, norm_H4(a.h - b.h)
