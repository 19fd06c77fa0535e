"""Manufactured solution on the obstacle-free channel.

The exact velocity is the curl of a smooth vector potential, hence exactly
divergence free; the body force follows symbolically from the strong form
-eta Lap u + (u . grad) u + grad p.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy

from ..geometry import ChannelSpec, CutoffFunction, Obstacle, build_reference_domain, transform_matrices
from .boundary import BoundaryData
from .solver import FluidSystem, SolverOptions, solve_navier_stokes


@lru_cache(maxsize=4)
def manufactured_fields(eta: float = 1.0, amplitude: float = 1.0):
    """Return numpy callables (u(c, x, y, z), p(x, y, z), f(c, x, y, z))."""
    x, y, z = sympy.symbols("x y z")
    psi = (
        sympy.sin(0.7 * x + 0.3) * sympy.cos(1.1 * y) * sympy.sin(0.9 * z + 0.2),
        sympy.cos(0.5 * x) * sympy.sin(0.8 * y + 0.1) * sympy.cos(1.3 * z),
        sympy.sin(0.6 * x + 0.4) * sympy.sin(1.2 * y) * sympy.cos(0.7 * z),
    )
    X = (x, y, z)
    u = [
        amplitude * (sympy.diff(psi[2], y) - sympy.diff(psi[1], z)),
        amplitude * (sympy.diff(psi[0], z) - sympy.diff(psi[2], x)),
        amplitude * (sympy.diff(psi[1], x) - sympy.diff(psi[0], y)),
    ]
    p = sympy.cos(x) * sympy.sin(y) * z
    f = []
    for c in range(3):
        lap = sum(sympy.diff(u[c], v, 2) for v in X)
        adv = sum(u[k] * sympy.diff(u[c], X[k]) for k in range(3))
        f.append(-eta * lap + adv + sympy.diff(p, X[c]))
    u_num = [sympy.lambdify(X, e, "numpy") for e in u]
    f_num = [sympy.lambdify(X, e, "numpy") for e in f]
    p_num = sympy.lambdify(X, p, "numpy")

    def uf(c, xx, yy, zz):
        return np.broadcast_to(u_num[c](xx, yy, zz), np.shape(xx)).astype(float)

    def ff(c, xx, yy, zz):
        return np.broadcast_to(f_num[c](xx, yy, zz), np.shape(xx)).astype(float)

    def pf(xx, yy, zz):
        return np.broadcast_to(p_num(xx, yy, zz), np.shape(xx)).astype(float)

    return uf, pf, ff


@dataclass(frozen=True)
class MmsResult:
    resolution: tuple
    h: float
    velocity_error: float  # discrete L2 over unknown faces
    velocity_max_error: float
    pressure_error: float  # discrete L2 after removing the mean


def run_mms(resolution, R: float = 1.5, eta: float = 1.0, options: SolverOptions = SolverOptions()) -> MmsResult:
    uf, pf, ff = manufactured_fields(eta)
    channel = ChannelSpec(R)
    domain = build_reference_domain(channel, None, resolution)
    cutoff = CutoffFunction.for_obstacle(Obstacle(0.3, 0.2, 4.0), channel)
    matrices = transform_matrices(None, cutoff, domain)
    bc = BoundaryData(1.0, custom=uf)
    system = FluidSystem(domain, matrices, bc, eta, options, body_force=ff)
    state, _ = solve_navier_stokes(matrices, bc, eta, system=system)
    err, err_max = 0.0, 0.0
    for c, comp in enumerate(state.layout.components):
        pts = comp.points()[comp.unknown_flat]
        exact = uf(c, pts[:, 0], pts[:, 1], pts[:, 2])
        num = state.x[state.layout.unknown_offsets[c] : state.layout.unknown_offsets[c + 1]]
        err += np.sum((num - exact) ** 2)
        err_max = max(err_max, float(np.max(np.abs(num - exact))))
    vol = domain.cell_volume
    xc, yc, zc = domain.centers
    Xc, Yc, Zc = np.meshgrid(xc, yc, zc, indexing="ij")
    pe = pf(Xc, Yc, Zc).ravel()
    pe = pe - pe.mean()
    perr = float(np.sqrt(vol * np.sum((state.pressure - pe) ** 2)))
    return MmsResult(tuple(resolution), domain.spacing[0], float(np.sqrt(vol * err)), err_max, perr)
