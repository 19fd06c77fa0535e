"""Vertical lift per unit span from the fluid stress on the obstacle.

Sign convention: positive lift points in +z, the direction in which it
pushes the beam.

Two evaluations are offered:

``residual``
    The discrete z-momentum equation is not imposed on the obstacle faces.
    Its residual there (viscous plus pressure part) is the force density
    the body exerts on the fluid, so the lift per y-slab is minus its sum
    times dx dz.  This is the discrete counterpart of testing the stress
    against an indicator of the obstacle boundary.

``surface``
    Trapezoid rule over 128 points of each section curve.  Because U = 0
    on the reference surface, grad U = (dU/dn) n; the normal derivative is
    a second-order one-sided difference of trilinearly interpolated
    velocities and the pressure is extrapolated linearly from two probes.
    The transformed stress [eta (G + G^T) - P I] M n0 with G = grad U J^{-1}
    is integrated, using det J = 1 on the obstacle surface.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .beam import BeamGrid
from .errors import InterpolationOutOfDomain, ValidationError
from .fluid.mac import DIRICHLET
from .fluid.operators import viscous_operator
from .fluid.solver import FluidState, sample_velocity
from .geometry import Obstacle, TransformMatrices


class LiftMethod(enum.Enum):
    SURFACE = "surface"
    RESIDUAL = "residual"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"surfacequadrature": "surface", "residualbased": "residual"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValidationError(f"unknown lift method {value!r}") from None


@dataclass(frozen=True)
class LiftProfile:
    grid: BeamGrid
    values: np.ndarray
    method: LiftMethod
    extended: np.ndarray = field(repr=False)

    @property
    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values)))

    @classmethod
    def zeros(cls, grid: BeamGrid, method=LiftMethod.RESIDUAL):
        ext = np.zeros(grid.n_nodes, dtype=bool)
        ext[[0, -1]] = True
        return cls(grid, np.zeros(grid.n_nodes), LiftMethod.parse(method), ext)


def _to_nodes(ys, values, grid: BeamGrid):
    """Linear interpolation to beam nodes; nodes outside [ys[0], ys[-1]] take the nearest value."""
    y = grid.nodes
    out = np.interp(y, ys, values)
    extended = (y < ys[0]) | (y > ys[-1])
    extended[[0, -1]] = True
    return out, extended


def obstacle_z_faces(state: FluidState) -> np.ndarray:
    """Mask of interior z-faces (unpadded shape nx, ny, nz+1) that touch a solid cell."""
    comp = state.layout.components[2]
    kind = comp.kind[1:-1, 1:-1, :]
    mask = kind == DIRICHLET
    mask[:, :, [0, -1]] = False
    return mask


def slab_lift_residual(state: FluidState) -> tuple:
    """Lift per y-slab from the z-momentum residual on obstacle faces."""
    system = state.system
    layout = state.layout
    comp = layout.components[2]
    off = layout.offsets[2]
    K3 = viscous_operator(layout, system.matrices.deformation, system.eta)[off : off + comp.size]
    # pressure-gradient block for component 3: G = -D^T with zero pressure in solid cells
    G3 = -(system.D_full[:, off : off + comp.size]).T
    r = K3 @ state.padded + G3 @ state.pressure
    r = r.reshape(comp.shape)[1:-1, 1:-1, :]
    mask = obstacle_z_faces(state)
    dx, _, dz = layout.spacing
    per_slab = -np.sum(np.where(mask, r, 0.0), axis=(0, 2)) * dx * dz
    return layout.domain.centers[1], per_slab


def _masked_pressure(state: FluidState, pts: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of cell pressure using fluid cells only."""
    layout = state.layout
    xc, yc, zc = layout.domain.centers
    h = layout.spacing
    P = state.P
    fluid = layout.domain.fluid
    out = np.empty(len(pts))
    base = []
    for a, c in enumerate((xc, yc, zc)):
        t = (pts[:, a] - c[0]) / h[a]
        i0 = np.clip(np.floor(t).astype(int), 0, len(c) - 2)
        base.append((i0, np.clip(t - i0, 0.0, 1.0)))
    num = np.zeros(len(pts))
    den = np.zeros(len(pts))
    for dxi in (0, 1):
        for dyi in (0, 1):
            for dzi in (0, 1):
                ii = base[0][0] + dxi
                jj = base[1][0] + dyi
                kk = base[2][0] + dzi
                w = (
                    (base[0][1] if dxi else 1 - base[0][1])
                    * (base[1][1] if dyi else 1 - base[1][1])
                    * (base[2][1] if dzi else 1 - base[2][1])
                )
                ok = fluid[ii, jj, kk]
                num += np.where(ok, w * P[ii, jj, kk], 0.0)
                den += np.where(ok, w, 0.0)
    if np.any(den < 0.25):
        raise InterpolationOutOfDomain("pressure probe has too little fluid support; refine the grid")
    out[:] = num / den
    return out


def surface_lift_at(state: FluidState, matrices: TransformMatrices, obstacle: Obstacle, y: float, eta: float,
                    n_samples: int = 128) -> float:
    layout = state.layout
    dx, dy, dz = layout.spacing
    delta = 1.5 * np.hypot(dx, dz)
    sec = obstacle.section(y, n_samples)
    q = obstacle.q
    a, b = float(obstacle.a(y)), float(obstacle.b(y))
    da, db = float(obstacle.da(y)), float(obstacle.db(y))
    # 3D gradient of the level function, scaled so that the in-plane part has unit length
    gx = q * np.sign(sec.x) * np.abs(sec.x / a) ** (q - 1) / a
    gz = q * np.sign(sec.z) * np.abs(sec.z / b) ** (q - 1) / b
    gy = -q * (np.abs(sec.x / a) ** q * da / a + np.abs(sec.z / b) ** q * db / b)
    gxz = np.hypot(gx, gz)
    gvec = np.stack([gx, gy, gz], axis=1) / gxz[:, None]
    n0 = gvec / np.linalg.norm(gvec, axis=1)[:, None]
    base = np.stack([sec.x, np.full_like(sec.x, y), sec.z], axis=1)
    p1, p2 = base + delta * n0, base + 2 * delta * n0
    R = layout.domain.channel.R
    for pp in (p1, p2):
        if np.any(np.abs(pp[:, 0]) >= R) or np.any(np.abs(pp[:, 2]) >= 1.0):
            raise InterpolationOutOfDomain("surface probes leave the channel")
        cells = [np.clip(((pp[:, k] + (R if k == 0 else 1.0)) / layout.spacing[k]).astype(int), 0, layout.shape[k] - 1) for k in range(3)]
        if np.any(layout.domain.solid[cells[0], cells[1], cells[2]]):
            raise InterpolationOutOfDomain("surface probe falls inside the solid mask; refine the grid")
    u1, u2 = sample_velocity(state, p1), sample_velocity(state, p2)
    dudn = (4 * u1 - u2) / (2 * delta)  # U = 0 on the surface
    P0 = 2 * _masked_pressure(state, p1) - _masked_pressure(state, p2)
    p, r, d = matrices.deformation.coefficients(base[:, 0], base[:, 1], base[:, 2])
    _, M, _, _ = _mats(p, r, np.ones_like(d))
    Jinv = np.swapaxes(M, -1, -2)
    grad = dudn[:, :, None] * n0[:, None, :]
    G = grad @ Jinv
    stress = eta * (G + np.swapaxes(G, -1, -2)) - P0[:, None, None] * np.eye(3)
    traction = stress @ (M @ gvec[:, :, None])[..., 0][:, :, None]
    fz = traction[:, 2, 0]
    # arclength weights of the trapezoid rule on the closed curve
    seg = np.hypot(np.roll(sec.x, -1) - sec.x, np.roll(sec.z, -1) - sec.z)
    w = 0.5 * (seg + np.roll(seg, 1))
    return float(np.sum(w * fz))


def _mats(p, r, d):
    from .geometry import matrices_from_coefficients

    return matrices_from_coefficients(p, r, d)


def compute_lift_profile(state: FluidState, matrices: TransformMatrices, obstacle: Obstacle, grid: BeamGrid,
                         eta: float, method="residual") -> LiftProfile:
    method = LiftMethod.parse(method)
    if state.gamma == 0.0 and not np.any(state.x) and not np.any(state.pressure):
        return LiftProfile.zeros(grid, method)
    if method is LiftMethod.RESIDUAL:
        ys, slab = slab_lift_residual(state)
        values, extended = _to_nodes(ys, slab, grid)
    else:
        y = grid.nodes
        inner = (y > -1.0) & (y < 1.0)
        vals = np.array([surface_lift_at(state, matrices, obstacle, yi, eta) for yi in y[inner]])
        values, extended = _to_nodes(y[inner], vals, grid)
    return LiftProfile(grid, values, method, extended)


@dataclass(frozen=True)
class LiftScaling:
    c_gamma: float
    gamma_variation: float  # (max - min) / max of ||L|| / gamma over the sweep
    c_lip: float


def lift_scaling_report(gamma_lifts, pair_lifts=()) -> LiftScaling:
    """Bounds of ||L||/gamma over a sweep and Lipschitz quotients over profile pairs.

    ``gamma_lifts``: iterable of (gamma, LiftProfile) with gamma > 0.
    ``pair_lifts``: iterable of (gamma, h1, h2, L1, L2) with BeamProfiles h1 != h2.
    """
    from .beam import norm_H4

    ratios = [lift.norm_inf / g for g, lift in gamma_lifts if g > 0]
    if len(ratios) < 3:
        raise ValidationError("lift scaling needs at least three positive gamma values")
    quotients = []
    for g, h1, h2, l1, l2 in pair_lifts:
        dh = norm_H4(h1 - h2)
        if dh == 0.0:
            raise ValidationError("Lipschitz quotient needs distinct profiles")
        quotients.append(np.max(np.abs(l1.values - l2.values)) / (g * dh))
    rmax, rmin = max(ratios), min(ratios)
    return LiftScaling(float(rmax), float((rmax - rmin) / rmax) if rmax > 0 else 0.0,
                       float(max(quotients)) if quotients else float("nan"))
