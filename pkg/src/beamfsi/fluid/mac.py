"""Staggered (MAC) layout of velocity unknowns on the reference grid.

Velocity component c lives on the faces normal to axis c.  Each component is
stored on a padded array with one ghost layer on both sides of every
tangential axis, so a full component array is ``E @ x + e0`` where ``x`` holds
the unknown face values, ``E`` is a sparse extension matrix and ``e0`` carries
the Dirichlet data.

Padded node kinds:

* unknown: interior face between two fluid cells,
* dirichlet: boundary-normal face or face touching a solid cell,
* ghost: one tangential pad layer; value is 2 g - (adjacent node),
* corner: pad layer in both tangential axes; value is g.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..geometry import ReferenceDomain

UNKNOWN, DIRICHLET, GHOST, CORNER = 0, 1, 2, 3


@dataclass
class ComponentLayout:
    """Padded grid and node classification for one velocity component."""

    axis: int
    coords: tuple  # padded coordinates along each axis
    kind: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)  # unknown number, -1 elsewhere
    ghost_adjacent: np.ndarray = field(repr=False)  # flat padded index of the mirror node, -1 elsewhere
    ghost_wall: np.ndarray = field(repr=False)  # wall point of each ghost (N_pad x 3), NaN elsewhere

    @property
    def shape(self):
        return self.kind.shape

    @property
    def size(self) -> int:
        return self.kind.size

    @property
    def n_unknown(self) -> int:
        return int(np.count_nonzero(self.kind == UNKNOWN))

    @cached_property
    def unknown_flat(self) -> np.ndarray:
        return np.flatnonzero(self.kind.ravel() == UNKNOWN)

    def points(self) -> np.ndarray:
        """Coordinates of all padded nodes, shape (N_pad, 3)."""
        X, Y, Z = np.meshgrid(*self.coords, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    @cached_property
    def extension(self) -> sp.csr_matrix:
        """Sparse E with padded = E @ x + e0."""
        n = self.size
        flat_kind = self.kind.ravel()
        flat_index = self.index.ravel()
        rows, cols, vals = [], [], []
        unk = self.unknown_flat
        rows.append(unk)
        cols.append(flat_index[unk])
        vals.append(np.ones(unk.size))
        ghosts = np.flatnonzero(flat_kind == GHOST)
        adj = self.ghost_adjacent.ravel()[ghosts]
        ok = flat_kind[adj] == UNKNOWN
        rows.append(ghosts[ok])
        cols.append(flat_index[adj[ok]])
        vals.append(-np.ones(int(ok.sum())))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, self.n_unknown),
        )

    def dirichlet_vector(self, boundary_velocity) -> np.ndarray:
        """e0 for a boundary velocity callable ``g(component, x, y, z)``."""
        flat_kind = self.kind.ravel()
        pts = self.points()
        e0 = np.zeros(self.size)
        dn = np.flatnonzero(flat_kind == DIRICHLET)
        e0[dn] = boundary_velocity(self.axis, pts[dn, 0], pts[dn, 1], pts[dn, 2])
        co = np.flatnonzero(flat_kind == CORNER)
        if co.size:
            w = self.ghost_wall.reshape(-1, 3)[co]
            e0[co] = boundary_velocity(self.axis, w[:, 0], w[:, 1], w[:, 2])
        gh = np.flatnonzero(flat_kind == GHOST)
        w = self.ghost_wall.reshape(-1, 3)[gh]
        g = boundary_velocity(self.axis, w[:, 0], w[:, 1], w[:, 2])
        adj = self.ghost_adjacent.ravel()[gh]
        e0[gh] = 2.0 * g - np.where(flat_kind[adj] == DIRICHLET, e0[adj], 0.0)
        return e0


def _padded_centers(n: int, half: float) -> np.ndarray:
    h = 2.0 * half / n
    c = (np.arange(-1, n + 1) + 0.5 - 0.5 * n) * h
    return c


class MacLayout:
    """All three component layouts plus cell numbering for one reference domain."""

    def __init__(self, domain: ReferenceDomain):
        self.domain = domain
        self.shape = domain.shape
        self.spacing = domain.spacing
        self.halves = (domain.channel.R, 1.0, 1.0)
        self.components = tuple(self._component(c) for c in range(3))
        self.offsets = np.cumsum([0] + [comp.size for comp in self.components])
        self.unknown_offsets = np.cumsum([0] + [comp.n_unknown for comp in self.components])
        fluid = domain.fluid
        self.cell_index = np.full(self.shape, -1, dtype=np.int64)
        self.cell_index[fluid] = np.arange(int(fluid.sum()))
        self.n_cells = int(fluid.sum())

    @property
    def n_unknown(self) -> int:
        return int(self.unknown_offsets[-1])

    @property
    def n_padded(self) -> int:
        return int(self.offsets[-1])

    def _component(self, c: int) -> ComponentLayout:
        n = self.shape
        solid = self.domain.solid
        coords = []
        for e in range(3):
            if e == c:
                coords.append(np.linspace(-self.halves[e], self.halves[e], n[e] + 1))
            else:
                coords.append(_padded_centers(n[e], self.halves[e]))
        shape = tuple(len(v) for v in coords)
        kind = np.full(shape, DIRICHLET, dtype=np.int8)
        tang = [e for e in range(3) if e != c]

        # interior part: faces 1..n_c-1 along c, non-pad along tangential axes
        sl = [slice(None)] * 3
        sl[c] = slice(1, n[c])
        for e in tang:
            sl[e] = slice(1, n[e] + 1)
        sl = tuple(sl)
        # face between cells i-1 and i along c
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[c], hi[c] = slice(0, n[c] - 1), slice(1, n[c])
        touching = solid[tuple(lo)] | solid[tuple(hi)]
        inner = np.where(touching, DIRICHLET, UNKNOWN).astype(np.int8)
        kind[sl] = inner

        # pad layers
        e1, e2 = tang
        pad1 = np.zeros(shape, dtype=bool)
        pad2 = np.zeros(shape, dtype=bool)
        idx = [slice(None)] * 3
        for e, pad in ((e1, pad1), (e2, pad2)):
            for j in (0, shape[e] - 1):
                idx = [slice(None)] * 3
                idx[e] = j
                pad[tuple(idx)] = True
        kind[pad1 ^ pad2] = GHOST
        kind[pad1 & pad2] = CORNER

        index = np.full(shape, -1, dtype=np.int64)
        unk = kind == UNKNOWN
        index[unk] = np.arange(int(unk.sum()))

        # ghost mirror nodes and wall points
        adjacent = np.full(shape, -1, dtype=np.int64)
        wall = np.full(shape + (3,), np.nan)
        flat = np.arange(kind.size).reshape(shape)
        grids = np.meshgrid(*coords, indexing="ij")
        for e in tang:
            for j, jadj, side in ((0, 1, -1.0), (shape[e] - 1, shape[e] - 2, 1.0)):
                idx = [slice(None)] * 3
                idx[e] = j
                ia = list(idx)
                ia[e] = jadj
                idx, ia = tuple(idx), tuple(ia)
                sel = kind[idx] == GHOST
                adjacent[idx] = np.where(sel, flat[ia], adjacent[idx])
                selc = kind[idx] != DIRICHLET
                for k in range(3):
                    val = side * self.halves[e] if k == e else grids[k][idx]
                    # corner nodes sit on two walls; the tangent pass that runs
                    # second overwrites only the coordinate of its own axis
                    cur = wall[idx + (k,)]
                    if k == e:
                        wall[idx + (k,)] = np.where(selc, val, cur)
                    else:
                        wall[idx + (k,)] = np.where(selc & np.isnan(cur), val, cur)
        return ComponentLayout(c, tuple(coords), kind, index, adjacent, wall)

    # -- conversions ---------------------------------------------------------

    @cached_property
    def extension(self) -> sp.csr_matrix:
        return sp.block_diag([comp.extension for comp in self.components], format="csr")

    def dirichlet_vector(self, boundary_velocity) -> np.ndarray:
        return np.concatenate([comp.dirichlet_vector(boundary_velocity) for comp in self.components])

    def split_padded(self, full: np.ndarray):
        return tuple(full[self.offsets[c] : self.offsets[c + 1]].reshape(self.components[c].shape) for c in range(3))

    def unknown_rows(self) -> np.ndarray:
        """Flat indices (in the concatenated padded vector) of all unknown nodes."""
        return np.concatenate([comp.unknown_flat + self.offsets[c] for c, comp in enumerate(self.components)])

    def interior(self, c: int, padded: np.ndarray) -> np.ndarray:
        """Strip the ghost layers of a padded component array."""
        sl = [slice(1, -1)] * 3
        sl[c] = slice(None)
        return padded[tuple(sl)]

    def cell_field(self, p: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.domain.fluid] = p
        return out
