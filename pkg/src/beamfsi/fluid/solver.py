"""Stationary transformed Navier-Stokes solve by Picard iteration.

The linearized problem at each step is

    -eta div(A grad U) + (B^T W . grad) U + B grad P = f,    div(B^T U) = 0,

with W the previous iterate, on the MAC layout of the reference domain.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import NonConvergence, ParityUndefined, ValidationError
from ..geometry import Deformation, ReferenceDomain, TransformMatrices
from .boundary import BoundaryData
from .linsolve import SaddleSolver
from .mac import MacLayout
from .operators import AdvectionBuilder, divergence_operator, viscous_operator

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    nonlinear_tol: float = 1e-9
    max_picard: int = 50
    relaxation: float = 1.0
    linear_tol: float = 1e-11
    linear_method: str = "auto"
    direct_threshold: int = 15000
    upwind: bool = False

    def __post_init__(self):
        if not (self.nonlinear_tol > 0 and self.linear_tol > 0):
            raise ValidationError("solver tolerances must be positive")
        if not (0.0 < self.relaxation <= 1.0):
            raise ValidationError("Picard relaxation must lie in (0, 1]")
        if self.linear_method not in ("auto", "direct", "iterative"):
            raise ValidationError(f"unknown linear method {self.linear_method!r}")


@dataclass
class FluidState:
    """Velocity on padded MAC arrays and pressure at cell centres (zero in solid cells)."""

    system: "FluidSystem" = field(repr=False)
    x: np.ndarray = field(repr=False)  # unknown face values
    pressure: np.ndarray = field(repr=False)  # fluid-cell values, zero mean
    gamma: float = 0.0

    @property
    def layout(self) -> MacLayout:
        return self.system.layout

    @property
    def padded(self) -> np.ndarray:
        return self.system.E @ self.x + self.system.e0

    @property
    def U(self):
        """Padded component arrays (U1, U2, U3)."""
        return self.layout.split_padded(self.padded)

    @property
    def U_interior(self):
        return tuple(self.layout.interior(c, u) for c, u in enumerate(self.U))

    @property
    def P(self) -> np.ndarray:
        return self.layout.cell_field(self.pressure)

    def shifted_pressure(self, offset: float) -> "FluidState":
        return FluidState(self.system, self.x, self.pressure + offset, self.gamma)


@dataclass
class SolverReport:
    picard_iterations: int = 0
    final_nonlinear_residual: float = 0.0
    linear_solver_residuals: list = field(default_factory=list)
    linear_iterations: list = field(default_factory=list)
    increments: list = field(default_factory=list)
    wall_time: float = 0.0

    def as_dict(self, include_time: bool = True) -> dict:
        out = {
            "picard_iterations": self.picard_iterations,
            "final_nonlinear_residual": self.final_nonlinear_residual,
            "linear_solver_residuals": list(self.linear_solver_residuals),
            "linear_iterations": list(self.linear_iterations),
            "increments": list(self.increments),
        }
        if include_time:
            out["wall_time"] = self.wall_time
        return out


_LAYOUTS: dict = {}


def layout_for(domain: ReferenceDomain) -> MacLayout:
    key = id(domain)
    cached = _LAYOUTS.get(key)
    if cached is None or cached[0] is not domain:
        if len(_LAYOUTS) > 8:
            _LAYOUTS.clear()
        cached = (domain, MacLayout(domain))
        _LAYOUTS[key] = cached
    return cached[1]


class FluidSystem:
    """Assembled operators for one (domain, matrices, boundary data, viscosity)."""

    def __init__(self, domain: ReferenceDomain, matrices: TransformMatrices, bc: BoundaryData, eta: float = 1.0,
                 options: SolverOptions = SolverOptions(), body_force: Optional[Callable] = None):
        if not eta > 0:
            raise ValidationError("viscosity eta must be positive")
        self.domain, self.matrices, self.bc, self.eta, self.options = domain, matrices, bc, float(eta), options
        self.layout = layout = layout_for(domain)
        deform: Deformation = matrices.deformation
        self.rows = layout.unknown_rows()
        self.E = layout.extension
        Kfull = viscous_operator(layout, deform, self.eta)[self.rows]
        self.K = (Kfull @ self.E).tocsr()
        Dfull = divergence_operator(layout, deform)
        self.D_full = Dfull
        self.D = (Dfull @ self.E).tocsr()
        self.G = (-self.D.T).tocsr()
        if deform.is_identity:
            amg_op = self.K
        else:
            amg_op = (viscous_operator(layout, deform, self.eta, diagonal_only=True)[self.rows] @ self.E).tocsr()
        self.advection = AdvectionBuilder(layout, deform, upwind=options.upwind)
        self.e0 = layout.dirichlet_vector(self._boundary_function())
        self.f_stokes = -(Kfull @ self.e0)
        if body_force is not None:
            self.f_stokes = self.f_stokes + self._sample_force(body_force)
        c = -(Dfull @ self.e0)
        self.c = c - c.mean()  # compatibility with the constant pressure mode
        self.solver = SaddleSolver(self.D, self.G, self.eta, amg_op, method=options.linear_method,
                                   direct_threshold=options.direct_threshold, rtol=options.linear_tol)

    # -- data ----------------------------------------------------------------

    def _boundary_function(self):
        bc = self.bc
        if bc.custom is not None or bc.gamma == 0.0:
            return bc.velocity_function(self.domain.channel.R)
        # rescale inlet/outlet profiles to exactly unit discrete flux
        _, yc, zc = self.domain.centers
        dx, dy, dz = self.domain.spacing
        Y, Z = np.meshgrid(yc, zc, indexing="ij")
        open_in = ~self.domain.solid[0]
        open_out = ~self.domain.solid[-1]
        s_in = 1.0 / np.sum(bc.inlet(Y, Z)[open_in] * dy * dz)
        s_out = 1.0 / np.sum(bc.outlet(Y, Z)[open_out] * dy * dz)
        return bc.velocity_function(self.domain.channel.R, s_in, s_out)

    def _sample_force(self, force):
        parts = []
        for c, comp in enumerate(self.layout.components):
            pts = comp.points()[comp.unknown_flat]
            parts.append(np.asarray(force(c, pts[:, 0], pts[:, 1], pts[:, 2]), dtype=float))
        return np.concatenate(parts)

    @property
    def rhs_scale(self) -> float:
        return float(np.linalg.norm(np.concatenate([self.f_stokes, self.c])))

    # -- assembly ------------------------------------------------------------

    def oseen(self, advecting_padded: Optional[np.ndarray]):
        """Operator F and right-hand side f with advection frozen at W."""
        if advecting_padded is None or not np.any(advecting_padded):
            return self.K, self.f_stokes
        W = self.layout.split_padded(advecting_padded)
        adv = self.advection.matrix(W)
        F = (self.K + adv @ self.E).tocsr()
        f = self.f_stokes - adv @ self.e0
        return F, f

    def residual(self, state: FluidState) -> float:
        """Relative residual of the nonlinear system at ``state``."""
        F, f = self.oseen(state.padded)
        rm = F @ state.x + self.G @ state.pressure - f
        rc = self.D @ state.x - self.c
        r = float(np.linalg.norm(np.concatenate([rm, rc])))
        scale = self.rhs_scale
        return r / scale if scale > 0 else r

    def zero_state(self) -> FluidState:
        return FluidState(self, np.zeros(self.layout.n_unknown), np.zeros(self.layout.n_cells), self.bc.gamma)

    def state_from(self, other: Optional[FluidState]) -> FluidState:
        """Warm start: reuse unknown values when the layout matches."""
        if other is None or other.layout is not self.layout:
            return self.zero_state()
        return FluidState(self, other.x.copy(), other.pressure.copy(), self.bc.gamma)


def _solve_linear(system: FluidSystem, advecting: Optional[FluidState], warm: Optional[FluidState]):
    F, f = system.oseen(None if advecting is None else advecting.padded)
    x0 = None
    if warm is not None and warm.layout is system.layout:
        x0 = np.concatenate([warm.x, warm.pressure])
    u, p, info = system.solver.solve(F, f, system.c, x0=x0)
    p = p - p.mean()
    return FluidState(system, u, p, system.bc.gamma), info


def picard_step(matrices: TransformMatrices, advecting: Optional[FluidState], bc: BoundaryData,
                body_force: Optional[Callable] = None, domain: Optional[ReferenceDomain] = None, eta: float = 1.0,
                options: SolverOptions = SolverOptions(), system: Optional[FluidSystem] = None) -> FluidState:
    """One linear solve with advection frozen at ``advecting`` (None means zero)."""
    if system is None:
        if domain is None:
            if advecting is None:
                raise ValidationError("picard_step needs a domain or an advecting state")
            domain = advecting.layout.domain
        system = FluidSystem(domain, matrices, bc, eta, options, body_force)
    state, _ = _solve_linear(system, advecting, advecting)
    return state


def solve_navier_stokes(matrices: TransformMatrices, bc: BoundaryData, eta: float = 1.0, nonlinear_tol: Optional[float] = None,
                        domain: Optional[ReferenceDomain] = None, options: SolverOptions = SolverOptions(),
                        initial: Optional[FluidState] = None, body_force: Optional[Callable] = None,
                        system: Optional[FluidSystem] = None):
    """Picard iteration until the relative nonlinear residual is below tolerance."""
    t0 = time.perf_counter()
    if nonlinear_tol is not None:
        options = SolverOptions(**{**options.__dict__, "nonlinear_tol": float(nonlinear_tol)})
    if system is None:
        if domain is None:
            raise ValidationError("solve_navier_stokes needs the reference domain")
        system = FluidSystem(domain, matrices, bc, eta, options, body_force)
    report = SolverReport()
    state = system.state_from(initial)
    omega = options.relaxation
    res = np.inf
    for it in range(1, options.max_picard + 1):
        new, info = _solve_linear(system, state, state)
        report.linear_solver_residuals.append(info.relative_residual)
        report.linear_iterations.append(info.iterations)
        if omega < 1.0:
            new = FluidState(system, (1 - omega) * state.x + omega * new.x,
                             (1 - omega) * state.pressure + omega * new.pressure, system.bc.gamma)
        report.increments.append(float(np.linalg.norm(new.x - state.x)))
        state = new
        res = system.residual(state)
        log.debug("Picard %d: residual %.3e", it, res)
        if res <= options.nonlinear_tol:
            report.picard_iterations = it
            report.final_nonlinear_residual = res
            report.wall_time = time.perf_counter() - t0
            return state, report
        if not np.isfinite(res):
            break
    raise NonConvergence(f"Picard iteration stalled at residual {res:.3e} after {options.max_picard} steps "
                         f"(gamma = {bc.gamma:g} may exceed the contraction regime)")


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def flux_through_slice(state: FluidState, x0: float) -> float:
    """Integral of (B^T U)_1 = det J U1 over the x-face plane at x0."""
    layout = state.layout
    xf = layout.components[0].coords[0]
    i = int(np.argmin(np.abs(xf - x0)))
    dx, dy, dz = layout.spacing
    if abs(xf[i] - x0) > 1e-9 * dx:
        raise ValidationError(f"x0 = {x0} is not on a face plane")
    _, yc, zc = layout.domain.centers
    Y, Z = np.meshgrid(yc, zc, indexing="ij")
    _, _, d = state.system.matrices.deformation.coefficients(np.full_like(Y, xf[i]), Y, Z)
    U1 = state.U[0][i, 1:-1, 1:-1]
    return float(np.sum(d * U1) * dy * dz)


def face_planes(state: FluidState) -> np.ndarray:
    return state.layout.components[0].coords[0]


def velocity_norm(state: FluidState) -> float:
    """Discrete L2 norm of the velocity over the channel (face control volumes)."""
    vol = state.layout.domain.cell_volume
    return float(np.sqrt(vol * sum(np.sum(u**2) for u in state.U_interior)))


def velocity_h1_norm(state: FluidState) -> float:
    layout = state.layout
    vol = layout.domain.cell_volume
    total = velocity_norm(state) ** 2
    for u in state.U_interior:
        for e in range(3):
            if u.shape[e] > 1:
                total += vol * np.sum((np.diff(u, axis=e) / layout.spacing[e]) ** 2)
    return float(np.sqrt(total))


def sample_velocity(state: FluidState, pts: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of each velocity component at reference points (N x 3)."""
    out = []
    for comp, u in zip(state.layout.components, state.U):
        f = RegularGridInterpolator(comp.coords, u, method="linear", bounds_error=False, fill_value=None)
        out.append(f(pts))
    return np.stack(out, axis=-1)


@dataclass
class FieldDiagnostics:
    div_residual: float
    parity_residual: float
    sobolev_norms: dict


def parity_residual(state: FluidState) -> float:
    """Largest defect of u1, u2, p even and u3 odd under z -> -z."""
    layout = state.layout
    nz = layout.shape[2]
    if nz % 2 or not layout.domain.is_z_symmetric():
        raise ParityUndefined("parity needs an even z-resolution and a z-symmetric mask")
    U1, U2, U3 = state.U_interior
    P = state.P
    defects = (
        np.max(np.abs(U1 - U1[:, :, ::-1]), initial=0.0),
        np.max(np.abs(U2 - U2[:, :, ::-1]), initial=0.0),
        np.max(np.abs(U3 + U3[:, :, ::-1]), initial=0.0),
        np.max(np.abs(P - P[:, :, ::-1]), initial=0.0),
    )
    return float(max(defects))


def field_diagnostics(state: FluidState, matrices: TransformMatrices, sigma: float) -> FieldDiagnostics:
    layout = state.layout
    D = divergence_operator(layout, matrices.deformation)
    div = float(np.max(np.abs(D @ state.padded), initial=0.0))
    par = parity_residual(state)
    q = 2.0 + sigma
    vol = layout.domain.cell_volume
    w1 = w2 = 0.0
    for u in state.U_interior:
        for e in range(3):
            d1 = np.diff(u, axis=e) / layout.spacing[e]
            w1 += np.sum(np.abs(d1) ** q)
            d2 = np.diff(u, n=2, axis=e) / layout.spacing[e] ** 2
            w2 += np.sum(np.abs(d2) ** q)
    return FieldDiagnostics(div, par, {"W1": float((vol * w1) ** (1 / q)), "W2": float((vol * w2) ** (1 / q))})
