"""Sparse operators of the transformed Stokes/Oseen system on the MAC layout.

All operators act on the concatenated padded velocity vector; rows are
later restricted to unknown nodes and columns folded through the extension
matrix.  Arrays are flattened in C order so a 1D operator along axis k of a
(n0, n1, n2) array is ``kron`` of identities with the operator in slot k.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from ..geometry import Deformation
from .mac import DIRICHLET, ComponentLayout, MacLayout


def along(op: sp.spmatrix, axis: int, shape) -> sp.csr_matrix:
    """Lift a 1D operator to act along ``axis`` of a C-ordered 3D array."""
    mats = [sp.identity(n, format="csr") for n in shape]
    mats[axis] = sp.csr_matrix(op)
    return sp.kron(mats[0], sp.kron(mats[1], mats[2], format="csr"), format="csr")


def forward_diff(n: int) -> sp.csr_matrix:
    """(n-1) x n operator u[i+1] - u[i]."""
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def midpoint_average(n: int) -> sp.csr_matrix:
    return sp.diags([0.5 * np.ones(n - 1), 0.5 * np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def central_diff(n: int, h: float) -> sp.csr_matrix:
    """n x n first derivative: central inside, one-sided at both ends."""
    m = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1], m[i, i + 1] = -0.5 / h, 0.5 / h
    m[0, 0], m[0, 1] = -1 / h, 1 / h
    m[n - 1, n - 2], m[n - 1, n - 1] = -1 / h, 1 / h
    return m.tocsr()


def _mesh(coords):
    X, Y, Z = np.meshgrid(*coords, indexing="ij")
    return X, Y, Z


def _a_entry(p, r, d, i, j):
    """Entry (i, j) of A = [[d,0,-p],[0,d,-r],[-p,-r,(1+p^2+r^2)/d]]."""
    if i == j:
        return d if i < 2 else (1 + p**2 + r**2) / d
    pair = {i, j}
    if pair == {0, 1}:
        return np.zeros_like(p)
    return -p if 0 in pair else -r


def viscous_component(comp: ComponentLayout, spacing, deform: Deformation, eta: float, diagonal_only=False) -> sp.csr_matrix:
    """-eta div(A grad u_c) on the padded grid of one component (flux form)."""
    shape = comp.shape
    coords = comp.coords
    total = sp.csr_matrix((comp.size, comp.size))
    for d in range(3):
        nd = shape[d]
        dual = list(coords)
        dual[d] = 0.5 * (coords[d][1:] + coords[d][:-1])
        p, r, det = deform.coefficients(*_mesh(dual))
        Dd = along(forward_diff(nd), d, shape) / spacing[d]
        DdT = Dd.T
        a_dd = _a_entry(p, r, det, d, d).ravel()
        total = total + DdT @ sp.diags(eta * a_dd) @ Dd
        if diagonal_only or deform.is_identity:
            continue
        for e in range(3):
            if e == d:
                continue
            a_de = _a_entry(p, r, det, d, e).ravel()
            if not np.any(a_de):
                continue
            Ce = along(central_diff(shape[e], spacing[e]), e, shape)
            Avd = along(midpoint_average(nd), d, shape)
            total = total + DdT @ sp.diags(eta * a_de) @ (Avd @ Ce)
    return total.tocsr()


def viscous_operator(layout: MacLayout, deform: Deformation, eta: float, diagonal_only=False) -> sp.csr_matrix:
    return sp.block_diag(
        [viscous_component(c, layout.spacing, deform, eta, diagonal_only) for c in layout.components], format="csr"
    )


class AdvectionBuilder:
    """Frozen advection (B^T W . grad) u_c with W given on the padded arrays."""

    def __init__(self, layout: MacLayout, deform: Deformation, upwind: bool = False):
        self.layout = layout
        self.upwind = upwind
        self.points = []
        self.coef = []
        self.grads = []
        for comp in layout.components:
            pts = comp.points()[comp.unknown_flat]
            self.points.append(pts)
            self.coef.append(deform.coefficients(pts[:, 0], pts[:, 1], pts[:, 2]))
            sel = sp.csr_matrix(
                (np.ones(comp.unknown_flat.size), (np.arange(comp.unknown_flat.size), comp.unknown_flat)),
                shape=(comp.unknown_flat.size, comp.size),
            )
            g = []
            for e in range(3):
                h = layout.spacing[e]
                n = comp.shape[e]
                if upwind:
                    fwd = along(sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n)) / h, e, comp.shape)
                    bwd = along(sp.diags([np.ones(n), -np.ones(n - 1)], [0, -1], shape=(n, n)) / h, e, comp.shape)
                    g.append((sel @ fwd, sel @ bwd))
                else:
                    g.append(sel @ along(central_diff(n, h), e, comp.shape))
            self.grads.append(g)

    def velocity_at(self, padded_W, c: int):
        """Advecting velocity (B^T W) at the unknown nodes of component c."""
        pts = self.points[c]
        W = []
        for k, comp in enumerate(self.layout.components):
            interp = RegularGridInterpolator(comp.coords, padded_W[k], method="linear", bounds_error=False, fill_value=None)
            W.append(interp(pts))
        p, r, d = self.coef[c]
        return d * W[0], d * W[1], -p * W[0] - r * W[1] + W[2]

    def matrix(self, padded_W) -> sp.csr_matrix:
        """Rows: unknowns (component blocks); columns: concatenated padded vector."""
        blocks = []
        for c, comp in enumerate(self.layout.components):
            vel = self.velocity_at(padded_W, c)
            m = sp.csr_matrix((comp.unknown_flat.size, comp.size))
            for e in range(3):
                if self.upwind:
                    fwd, bwd = self.grads[c][e]
                    pos = np.maximum(vel[e], 0.0)
                    neg = np.minimum(vel[e], 0.0)
                    m = m + sp.diags(pos) @ bwd + sp.diags(neg) @ fwd
                else:
                    m = m + sp.diags(vel[e]) @ self.grads[c][e]
            blocks.append(m)
        return sp.block_diag(blocks, format="csr")


def divergence_operator(layout: MacLayout, deform: Deformation) -> sp.csr_matrix:
    """div(B^T U) at fluid cells as a matrix on the concatenated padded vector.

    Normal fluxes: d U1 on x-faces, d U2 on y-faces and U3 - p U1bar - r U2bar
    on z-faces, where bars are four-point averages.  On z-faces that carry
    Dirichlet data only U3 enters, so no mass leaks through walls or the
    obstacle surface.
    """
    nx, ny, nz = layout.shape
    dx, dy, dz = layout.spacing
    cidx = layout.cell_index
    fluid = cidx >= 0
    I, J, K = np.nonzero(fluid)
    rows_c = cidx[I, J, K]
    comps = layout.components
    off = layout.offsets
    rows, cols, vals = [], [], []

    def flat(c, i, j, k):
        return off[c] + np.ravel_multi_index((i, j, k), comps[c].shape)

    def add(r, col, v):
        rows.append(r)
        cols.append(col)
        vals.append(v)

    xf = comps[0].coords[0]
    yf = comps[1].coords[1]
    xc_pad, yc_pad, zc_pad = comps[1].coords[0], comps[0].coords[1], comps[0].coords[2]

    # x-faces: U1 padded index (i, j+1, k+1); face i is the left face of cell i
    for side, shift in ((-1.0, 0), (1.0, 1)):
        ii = I + shift
        p, r, d = deform.coefficients(xf[ii], yc_pad[J + 1], zc_pad[K + 1])
        add(rows_c, flat(0, ii, J + 1, K + 1), side * d / dx)
    # y-faces: U2 padded index (i+1, j, k+1)
    for side, shift in ((-1.0, 0), (1.0, 1)):
        jj = J + shift
        p, r, d = deform.coefficients(xc_pad[I + 1], yf[jj], zc_pad[K + 1])
        add(rows_c, flat(1, I + 1, jj, K + 1), side * d / dy)
    # z-faces: U3 padded index (i+1, j+1, kf)
    zf = comps[2].coords[2]
    kind3 = comps[2].kind
    for side, shift in ((-1.0, 0), (1.0, 1)):
        kf = K + shift
        add(rows_c, flat(2, I + 1, J + 1, kf), np.full(I.size, side / dz))
        if deform.is_identity:
            continue
        live = kind3[I + 1, J + 1, kf] != DIRICHLET
        if not np.any(live):
            continue
        Il, Jl, kl, rl = I[live], J[live], kf[live], rows_c[live]
        p, r, _ = deform.coefficients(xc_pad[Il + 1], yc_pad[Jl + 1], zf[kl])
        # U1 at x-faces Il, Il+1 and padded z index kl, kl+1 (cells kl-1, kl)
        for ia in (Il, Il + 1):
            for ka in (kl, kl + 1):
                add(rl, flat(0, ia, Jl + 1, ka), -side * 0.25 * p / dz)
        # U2 at y-faces Jl, Jl+1 and padded x index Il+1
        for ja in (Jl, Jl + 1):
            for ka in (kl, kl + 1):
                add(rl, flat(1, Il + 1, ja, ka), -side * 0.25 * r / dz)
    D = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(layout.n_cells, layout.n_padded)
    )
    D.sum_duplicates()
    return D
