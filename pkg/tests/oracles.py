"""Independent reference computations used by the test-suite.

Nothing here imports the discretizations under test: the beam oracles are
closed forms or scipy's collocation BVP solver, the geometry oracles use
matplotlib polygons and adaptive quadrature, and the fluid oracle is a
loop-by-loop assembly of the classical MAC Stokes/Oseen system.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from matplotlib.path import Path
from scipy import integrate
from scipy.integrate import solve_bvp

# ---------------------------------------------------------------------------
# Beam
# ---------------------------------------------------------------------------


def clamped_quartic(y):
    """Solution of h'''' = 1 with h = h' = 0 at y = +-1."""
    return (1 - y**2) ** 2 / 24


def hinged_quartic(y):
    """Solution of h'''' = 1 with h = h'' = 0 at y = +-1."""
    return (y**4 - 6 * y**2 + 5) / 24


def clamped_energy_exact():
    # E = 1/2 int h''^2 - int h at the minimizer equals -1/2 int h
    val, _ = integrate.quad(clamped_quartic, -1, 1, epsabs=1e-14)
    return -0.5 * val


def green_diagonal(y, bc: str):
    """G(y, y) of d^4/dy^4 on (-1, 1): point-load deflection under the load."""
    a, b, L = 1 + y, 1 - y, 2.0
    if bc == "clamped":
        return a**3 * b**3 / (3 * L**3)
    return a**2 * b**2 / (3 * L)


def sharp_embedding(bc: str) -> float:
    y = np.linspace(-1, 1, 20001)
    return float(np.sqrt(np.max(green_diagonal(y, bc))))


def bvp_beam(load, kappa: float, bc: str, y_eval):
    """Collocation solve of h'''' + kappa h = load(y)."""

    def rhs(y, s):
        return np.vstack([s[1], s[2], s[3], load(y) - kappa * s[0]])

    def bcs(sa, sb):
        k = 1 if bc == "clamped" else 2
        return np.array([sa[0], sa[k], sb[0], sb[k]])

    y = np.linspace(-1, 1, 101)
    sol = solve_bvp(rhs, bcs, y, np.zeros((4, y.size)), tol=1e-10, max_nodes=100000)
    assert sol.success, sol.message
    return sol.sol(y_eval)[0]


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def superellipse_polygon(a, b, q, n=4000) -> Path:
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    c, s = np.cos(t), np.sin(t)
    x = a * np.sign(c) * np.abs(c) ** (2 / q)
    z = b * np.sign(s) * np.abs(s) ** (2 / q)
    return Path(np.column_stack([x, z]))


def solid_count_by_polygon(obstacle, shape, R) -> int:
    """Count grid cells whose centre lies inside the section polygon."""
    nx, ny, nz = shape
    xc = -R + (np.arange(nx) + 0.5) * 2 * R / nx
    yc = -1 + (np.arange(ny) + 0.5) * 2 / ny
    zc = -1 + (np.arange(nz) + 0.5) * 2 / nz
    X, Z = np.meshgrid(xc, zc, indexing="ij")
    pts = np.column_stack([X.ravel(), Z.ravel()])
    total = 0
    for y in yc:
        poly = superellipse_polygon(float(obstacle.a(y)), float(obstacle.b(y)), obstacle.q)
        total += int(np.count_nonzero(poly.contains_points(pts)))
    return total


def superellipse_area_quad(a, b, q) -> float:
    """Area of |x/a|^q + |z/b|^q <= 1 by adaptive quadrature."""
    val, _ = integrate.quad(lambda x: (1 - abs(x / a) ** q) ** (1 / q), -a, a, epsabs=1e-13)
    return 2 * b * val


# ---------------------------------------------------------------------------
# Fluid: untransformed MAC assembly, one grid node at a time
# ---------------------------------------------------------------------------


class LoopMac:
    """Classical MAC discretization of -eta lap u + (w . grad) u + grad p = 0, div u = 0.

    Faces adjacent to a solid cell are no-slip, walls use the mirrored ghost
    value 2 g - u, and the two end planes carry the unit-flux inflow and
    outflow profiles scaled by gamma.
    """

    def __init__(self, solid, R, gamma, inlet, outlet, eta=1.0):
        self.solid = np.asarray(solid, dtype=bool)
        self.n = self.solid.shape
        self.R, self.gamma, self.eta = R, gamma, eta
        nx, ny, nz = self.n
        self.h = (2 * R / nx, 2 / ny, 2 / nz)
        self.lo = (-R, -1.0, -1.0)
        dy, dz = self.h[1], self.h[2]
        yc = -1 + (np.arange(ny) + 0.5) * dy
        zc = -1 + (np.arange(nz) + 0.5) * dz
        Y, Z = np.meshgrid(yc, zc, indexing="ij")
        s_in = 1 / np.sum(inlet(Y, Z)[~self.solid[0]] * dy * dz)
        s_out = 1 / np.sum(outlet(Y, Z)[~self.solid[-1]] * dy * dz)
        self.inflow = lambda y, z: gamma * s_in * inlet(y, z)
        self.outflow = lambda y, z: gamma * s_out * outlet(y, z)
        self.unknowns = {}
        for c in range(3):
            for idx in np.ndindex(*self.face_shape(c)):
                if self.is_unknown(c, idx):
                    self.unknowns[(c, idx)] = len(self.unknowns)
        self.cells = {idx: k for k, idx in enumerate(zip(*np.nonzero(~self.solid)))}

    def face_shape(self, c):
        return tuple(self.n[e] + (1 if e == c else 0) for e in range(3))

    def face_point(self, c, idx):
        return tuple(self.lo[e] + (idx[e] if e == c else idx[e] + 0.5) * self.h[e] for e in range(3))

    def is_unknown(self, c, idx):
        i = idx[c]
        if i == 0 or i == self.n[c]:
            return False
        left = list(idx)
        left[c] = i - 1
        return not (self.solid[tuple(left)] or self.solid[tuple(idx)])

    def face_value(self, c, idx):
        """Known face value; None for unknowns."""
        if (c, idx) in self.unknowns:
            return None
        if c == 0 and idx[0] == 0:
            return self.inflow(*self.face_point(c, idx)[1:])
        if c == 0 and idx[0] == self.n[0]:
            return self.outflow(*self.face_point(c, idx)[1:])
        return 0.0

    def wall_value(self, c, point):
        """Dirichlet velocity at a point of the channel wall (non-zero only on the end planes)."""
        if c != 0:
            return 0.0
        if abs(point[0] + self.R) < 1e-12:
            return self.inflow(point[1], point[2])
        if abs(point[0] - self.R) < 1e-12:
            return self.outflow(point[1], point[2])
        return 0.0

    def neighbour(self, c, idx, e, step):
        """(coefficient dict, constant) for the value at idx + step along e."""
        j = list(idx)
        j[e] += step
        fs = self.face_shape(c)
        if 0 <= j[e] < fs[e]:
            j = tuple(j)
            if (c, j) in self.unknowns:
                return {self.unknowns[(c, j)]: 1.0}, 0.0
            return {}, self.face_value(c, j)
        # ghost outside the tangential wall: 2 g - u(idx)
        p = list(self.face_point(c, idx))
        p[e] = -1.0 * (1 if e > 0 else self.R) if step < 0 else (1 if e > 0 else self.R)
        g = self.wall_value(c, p)
        coef, const = self.value(c, idx)
        return {k: -v for k, v in coef.items()}, 2 * g - const

    def value(self, c, idx):
        if (c, idx) in self.unknowns:
            return {self.unknowns[(c, idx)]: 1.0}, 0.0
        return {}, self.face_value(c, idx)

    def assemble(self, w=None):
        """Saddle-point matrix and rhs; ``w(c, point) -> advecting velocity vector`` or None."""
        nu, ncell = len(self.unknowns), len(self.cells)
        A = sp.lil_matrix((nu + ncell + 1, nu + ncell + 1))
        rhs = np.zeros(nu + ncell + 1)
        for (c, idx), row in self.unknowns.items():
            A[row, row] += sum(2 * self.eta / self.h[e] ** 2 for e in range(3))
            vel = None if w is None else w(c, idx)
            for e in range(3):
                for step in (-1, 1):
                    coef, const = self.neighbour(c, idx, e, step)
                    scale = -self.eta / self.h[e] ** 2
                    if vel is not None:
                        scale += step * vel[e] / (2 * self.h[e])
                    for k, v in coef.items():
                        A[row, k] += scale * v
                    rhs[row] -= scale * const
            # pressure gradient between the two cells sharing the face
            left = list(idx)
            left[c] -= 1
            A[row, nu + self.cells[idx]] += 1 / self.h[c]
            A[row, nu + self.cells[tuple(left)]] -= 1 / self.h[c]
        for cell, k in self.cells.items():
            row = nu + k
            for c in range(3):
                for step, shift in ((-1.0, 0), (1.0, 1)):
                    f = list(cell)
                    f[c] += shift
                    coef, const = self.value(c, tuple(f))
                    for kk, v in coef.items():
                        A[row, kk] += step * v / self.h[c]
                    rhs[row] -= step * const / self.h[c]
        # zero-mean pressure by a bordering multiplier
        for k in range(ncell):
            A[nu + ncell, nu + k] = 1.0
            A[nu + k, nu + ncell] = 1.0
        return A.tocsc(), rhs

    def solve(self, w=None):
        A, rhs = self.assemble(w)
        sol = spla.spsolve(A, rhs)
        nu, ncell = len(self.unknowns), len(self.cells)
        return sol[:nu], sol[nu : nu + ncell]

    def full_value(self, c, idx, u):
        coef, const = self.value(c, idx)
        return const + sum(u[k] * v for k, v in coef.items())

    def averaged_velocity(self, u):
        """Advecting field with the 4-point averages of the other components at each face."""

        def get(c, idx):
            # value including the tangential ghost layer
            fs = self.face_shape(c)
            j = list(idx)
            for e in range(3):
                if j[e] < 0 or j[e] >= fs[e]:
                    step = -1 if j[e] < 0 else 1
                    j[e] -= step
                    coef, const = self.neighbour(c, tuple(j), e, step)
                    return const + sum(u[k] * v for k, v in coef.items())
            return self.full_value(c, tuple(j), u)

        def w(c, idx):
            out = np.zeros(3)
            for k in range(3):
                if k == c:
                    out[k] = get(c, idx)
                    continue
                acc = 0.0
                for dk in (0, 1):
                    for dc in (-1, 0):
                        j = list(idx)
                        j[k] += dk
                        j[c] += dc
                        acc += get(k, tuple(j))
                out[k] = 0.25 * acc
            return out

        return w
