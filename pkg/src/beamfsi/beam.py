"""Finite-difference solver for the beam equilibrium h'''' + f(h) = g on (-1, 1).

The grid is uniform with both endpoints as nodes.  Unknowns are the interior
values; h vanishes at both endpoints and one ghost value per end closes the
5-point fourth difference.  Ghost closures are fifth-order one-sided
conditions (h' = 0 for clamped, h'' = 0 for hinged) built on the nodes
{-1, 0, 1, 2, 3}, which makes the scheme exact on quartic polynomials.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import GridMismatch, InvalidLoad, NonConvergence, SingularOperator, ValidationError

log = logging.getLogger(__name__)


class BoundaryConditionKind(enum.Enum):
    """End conditions at y = -1 and y = 1."""

    CLAMPED = "clamped"  # h = h' = 0
    HINGED = "hinged"  # h = h'' = 0

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"unknown boundary condition kind {value!r}") from None


# Upper bounds for the embedding constant ||h||_inf <= S ||h''||_2 that hold
# for each end condition.
EMBEDDING_BOUNDS = {
    BoundaryConditionKind.CLAMPED: np.sqrt(2.0) / 2.0,
    BoundaryConditionKind.HINGED: 4.0 * np.sqrt(2.0) / 3.0,
}


@dataclass(frozen=True)
class BeamGrid:
    """Uniform grid on [-1, 1] with an odd number of nodes (so y = 0 is a node)."""

    n_nodes: int

    def __post_init__(self):
        n = self.n_nodes
        if not isinstance(n, (int, np.integer)) or n < 9 or n % 2 == 0:
            raise ValidationError(f"n_nodes must be an odd integer >= 9, got {n!r}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n_nodes)

    @property
    def spacing(self) -> float:
        return 2.0 / (self.n_nodes - 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n_nodes, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def sample(self, func) -> np.ndarray:
        return np.asarray(func(self.nodes), dtype=float) * np.ones(self.n_nodes)


@dataclass(frozen=True)
class RestoringForce:
    """Pointwise restoring force f with potential F (F' = f, F(0) = 0).

    ``kind`` is ``"zero"``, ``"linear"`` (f = kappa h) or ``"saturating"``
    (f = kappa s tanh(h / s)).
    """

    kind: str = "zero"
    stiffness: float = 0.0
    saturation: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "saturating"):
            raise ValidationError(f"unknown restoring force kind {self.kind!r}")
        if not (self.stiffness >= 0.0 and np.isfinite(self.stiffness)):
            raise ValidationError("restoring force stiffness must be finite and >= 0")
        if not (self.saturation > 0.0 and np.isfinite(self.saturation)):
            raise ValidationError("restoring force saturation scale must be > 0")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def linear(cls, kappa):
        return cls("linear", float(kappa))

    @classmethod
    def saturating(cls, kappa, s):
        return cls("saturating", float(kappa), float(s))

    @property
    def lipschitz(self) -> float:
        return 0.0 if self.kind == "zero" else self.stiffness

    def f(self, h):
        h = np.asarray(h, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(h)
        if self.kind == "linear":
            return self.stiffness * h
        return self.stiffness * self.saturation * np.tanh(h / self.saturation)

    def df(self, h):
        h = np.asarray(h, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(h)
        if self.kind == "linear":
            return np.full_like(h, self.stiffness)
        return self.stiffness / np.cosh(h / self.saturation) ** 2

    def potential(self, h):
        h = np.asarray(h, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(h)
        if self.kind == "linear":
            return 0.5 * self.stiffness * h**2
        s = self.saturation
        # log(cosh(x)) written to avoid overflow for large |x|
        x = np.abs(h / s)
        return self.stiffness * s**2 * (x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0))


@dataclass(frozen=True)
class BeamProfile:
    """Nodal displacement on a :class:`BeamGrid` together with its end conditions."""

    grid: BeamGrid
    values: np.ndarray
    bc: BoundaryConditionKind

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise GridMismatch(f"profile has {v.shape} values for a grid of {self.grid.n_nodes} nodes")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid, bc):
        return cls(grid, np.zeros(grid.n_nodes), BoundaryConditionKind.parse(bc))

    @classmethod
    def from_interior(cls, grid, interior, bc):
        v = np.zeros(grid.n_nodes)
        v[1:-1] = interior
        return cls(grid, v, bc)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def norms(self) -> dict:
        return beam_norms(self)

    def __add__(self, other):
        _check_same(self, other)
        return BeamProfile(self.grid, self.values + other.values, self.bc)

    def __sub__(self, other):
        _check_same(self, other)
        return BeamProfile(self.grid, self.values - other.values, self.bc)

    def scaled(self, t: float):
        return BeamProfile(self.grid, t * self.values, self.bc)


def _check_same(a: BeamProfile, b: BeamProfile):
    if a.grid != b.grid:
        raise GridMismatch("profiles live on different grids")


# ---------------------------------------------------------------------------
# Discrete operators
# ---------------------------------------------------------------------------


def fd_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights at 0 for the given integer offsets (unit spacing)."""
    s = np.asarray(offsets, dtype=float)
    k = len(s)
    vander = np.vander(s, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(vander, rhs)


def _ghost_row(bc: BoundaryConditionKind) -> np.ndarray:
    """Coefficients c with h_{-1} = c . (h_0, h_1, h_2, h_3)."""
    order = 1 if bc is BoundaryConditionKind.CLAMPED else 2
    w = fd_weights([-1, 0, 1, 2, 3], order)
    return -w[1:] / w[0]


@dataclass(frozen=True)
class BeamOperators:
    """Dense matrices for one (grid, bc) pair.

    ``extend`` maps the m = n-2 interior values to the n+2 values on
    nodes -1..n (ghosts and zero endpoints included).
    """

    grid: BeamGrid
    bc: BoundaryConditionKind
    extend: np.ndarray = field(repr=False)
    L4: np.ndarray = field(repr=False)  # fourth difference at interior nodes, m x m
    D2: np.ndarray = field(repr=False)  # second difference at all nodes (reflection ghosts), n x m
    D4_all: np.ndarray = field(repr=False)  # fourth difference at all nodes, n x m


@lru_cache(maxsize=32)
def beam_operators(grid: BeamGrid, bc: BoundaryConditionKind) -> BeamOperators:
    n, dy = grid.n_nodes, grid.spacing
    m = n - 2
    ext = np.zeros((n + 2, m))
    ext[2:-2, :] = np.eye(m)  # rows 0 and n+1 are ghosts, rows 1 and n are h_0, h_{n-1}
    c = _ghost_row(bc)
    # h_0 = 0 so only c[1:], acting on h_1, h_2, h_3 (interior columns 0..2)
    ext[0, :3] = c[1:]
    ext[-1, -3:] = c[1:][::-1]

    stencil4 = np.array([1.0, -4.0, 6.0, -4.0, 1.0]) / dy**4
    full4 = np.zeros((n, n + 2))
    full2 = np.zeros((n, n + 2))
    for i in range(n):
        j = i + 1  # position of node i in the extended vector
        full2[i, j - 1 : j + 2] = np.array([1.0, -2.0, 1.0]) / dy**2
        if 1 <= i <= n - 2:
            full4[i, j - 2 : j + 3] = stencil4
    L4 = full4[1:-1] @ ext
    # the H-seminorm uses the reflection ghost h_{-1} = +-h_1, which keeps the
    # discrete Gram matrix variationally consistent (second-order constants)
    reflect = np.zeros((n + 2, m))
    reflect[2:-2, :] = np.eye(m)
    sign = 1.0 if bc is BoundaryConditionKind.CLAMPED else -1.0
    reflect[0, 0] = reflect[-1, -1] = sign
    D2 = full2 @ reflect
    # endpoint fourth differences by linear extrapolation from the interior
    D4_all = full4 @ ext
    D4_all[0] = 2.0 * D4_all[1] - D4_all[2]
    D4_all[-1] = 2.0 * D4_all[-2] - D4_all[-3]
    for a in (ext, L4, D2, D4_all):
        a.flags.writeable = False
    return BeamOperators(grid, bc, ext, L4, D2, D4_all)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _as_load(g, grid: BeamGrid) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        g = np.full(grid.n_nodes, float(g))
    if g.shape != (grid.n_nodes,):
        raise GridMismatch(f"load has shape {g.shape}, grid has {grid.n_nodes} nodes")
    if not np.all(np.isfinite(g)):
        raise InvalidLoad("load contains non-finite entries")
    return g


def residual_floor(ops: BeamOperators, h_int: np.ndarray, g_int: np.ndarray) -> float:
    """Smallest residual resolvable in double precision for this solution."""
    scale = np.abs(ops.L4) @ np.abs(h_int) + np.abs(g_int)
    return 16.0 * np.finfo(float).eps * float(np.max(scale, initial=0.0))


def solve_beam(g, f: RestoringForce, bc, grid: BeamGrid, tol: float = 1e-10, max_iter: int = 200) -> BeamProfile:
    """Solve h'''' + f(h) = g by damped Newton with Armijo backtracking.

    The residual target is ``max(tol, floor)`` where ``floor`` is the roundoff
    level of evaluating the fourth difference in double precision; on fine
    grids that floor exceeds 1e-10.
    """
    bc = BoundaryConditionKind.parse(bc)
    if not (tol > 0):
        raise ValidationError("tol must be positive")
    g = _as_load(g, grid)
    ops = beam_operators(grid, bc)
    gi = g[1:-1]
    L = ops.L4

    def resid(h):
        return L @ h + f.f(h) - gi

    lu = scipy.linalg.lu_factor(L) if f.kind == "zero" or f.stiffness == 0.0 else None
    h = np.zeros(grid.n_nodes - 2)
    r = resid(h)
    for it in range(max_iter + 1):
        rn = np.max(np.abs(r), initial=0.0)
        if rn <= max(tol, residual_floor(ops, h, gi)):
            log.debug("beam Newton converged in %d steps, residual %.3e", it, rn)
            return BeamProfile.from_interior(grid, h, bc)
        if it == max_iter:
            break
        if lu is not None:
            step = scipy.linalg.lu_solve(lu, -r)
        else:
            step = np.linalg.solve(L + np.diag(f.df(h)), -r)
        phi0 = 0.5 * r @ r
        t = 1.0
        while True:
            h_new = h + t * step
            r_new = resid(h_new)
            # Newton direction is a descent direction for 0.5|r|^2 with slope -2 phi0
            if 0.5 * r_new @ r_new <= (1.0 - 1e-4 * t) * phi0 or t < 1e-10:
                break
            t *= 0.5
        h, r = h_new, r_new
    raise NonConvergence(f"beam Newton did not reach residual {tol:g} in {max_iter} iterations (last {rn:.3e})")


def beam_energy(h: BeamProfile, f: RestoringForce, g) -> float:
    """Trapezoid quadrature of h''^2/2 + F(h) - g h."""
    g = _as_load(g, h.grid)
    ops = beam_operators(h.grid, h.bc)
    d2 = ops.D2 @ h.interior
    integrand = 0.5 * d2**2 + f.potential(h.values) - g * h.values
    return float(h.grid.weights @ integrand)


def beam_norms(h: BeamProfile) -> dict:
    """Discrete ||h''||_2, ||h''''||_2 and max|h|."""
    ops = beam_operators(h.grid, h.bc)
    w = h.grid.weights
    d2 = ops.D2 @ h.interior
    d4 = ops.D4_all @ h.interior
    return {
        "norm_H": float(np.sqrt(w @ d2**2)),
        "norm_H4": float(np.sqrt(w @ d4**2)),
        "norm_inf": float(np.max(np.abs(h.values))),
    }


def norm_H4(h: BeamProfile) -> float:
    return beam_norms(h)["norm_H4"]


def full_h4_norm(h: BeamProfile) -> float:
    """Discrete full H^4 norm: L2 norms of h and its first four derivatives."""
    ops = beam_operators(h.grid, h.bc)
    dy = h.grid.spacing
    w = h.grid.weights
    v = ops.extend @ h.interior  # nodes -1..n
    d1 = (v[2:] - v[:-2]) / (2 * dy)
    d2 = ops.D2 @ h.interior
    d3 = np.gradient(d2, dy)
    d4 = ops.D4_all @ h.interior
    return float(np.sqrt(sum(w @ d**2 for d in (h.values, d1, d2, d3, d4))))


@dataclass(frozen=True)
class EmbeddingResult:
    s_discrete: float
    s_paper_bound: float
    maximizer: BeamProfile
    argmax: float


def embedding_constant(bc, grid: BeamGrid) -> EmbeddingResult:
    """Sharp discrete constant in max|h| <= S ||h''||_2.

    For each node the maximum of h(x0) over ||h''|| = 1 equals
    sqrt(e_i^T Q^{-1} e_i) where Q is the Gram matrix of the discrete
    H-inner product, so a single Cholesky factorization yields all of them.
    """
    bc = BoundaryConditionKind.parse(bc)
    ops = beam_operators(grid, bc)
    Q = ops.D2.T @ (grid.weights[:, None] * ops.D2)
    try:
        chol = scipy.linalg.cho_factor(Q)
    except np.linalg.LinAlgError as exc:
        raise SingularOperator(f"discrete H Gram matrix is singular for {bc.value}") from exc
    Qinv = scipy.linalg.cho_solve(chol, np.eye(Q.shape[0]))
    diag = np.diag(Qinv)
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise SingularOperator("non-positive reproducing kernel diagonal")
    i = int(np.argmax(diag))
    s = float(np.sqrt(diag[i]))
    rep = Qinv[:, i] / s  # ||rep''|| = 1 and rep(x_i) = s
    maximizer = BeamProfile.from_interior(grid, rep, bc)
    return EmbeddingResult(s, float(EMBEDDING_BOUNDS[bc]), maximizer, float(grid.nodes[i + 1]))


def admits_bc(values, grid: BeamGrid, bc, atol: float = 1e-6, dtol: float = 1e-4) -> bool:
    """Check whether nodal samples satisfy the end conditions.

    Derivatives are measured with one-sided fifth-order differences on the
    sampled values, so smooth admissible profiles pass on any reasonable grid.
    """
    bc = BoundaryConditionKind.parse(bc)
    v = np.asarray(values, dtype=float)
    dy = grid.spacing
    order = 1 if bc is BoundaryConditionKind.CLAMPED else 2
    w = fd_weights(np.arange(6), order) / dy**order
    scale = max(1.0, float(np.max(np.abs(v))))
    left = w @ v[:6]
    right = (-1) ** order * (w @ v[::-1][:6])
    tol_d = dtol * scale
    return abs(v[0]) <= atol * scale and abs(v[-1]) <= atol * scale and abs(left) <= tol_d and abs(right) <= tol_d


@dataclass(frozen=True)
class NormEquivalence:
    c_lower: float
    c_upper: float
    counterexample_rejected: bool


def random_admissible_profile(rng: np.random.Generator, grid: BeamGrid, bc, n_terms: int = 5, amplitude: float = 1.0):
    """Random smooth profile satisfying the end conditions exactly.

    Clamped samples are (1 - y^2)^2 times a random polynomial; hinged
    samples are random sine series sin(k pi (y + 1) / 2), which have h = h'' = 0
    at both ends.
    """
    bc = BoundaryConditionKind.parse(bc)
    y = grid.nodes
    if bc is BoundaryConditionKind.CLAMPED:
        coef = rng.standard_normal(n_terms) / np.arange(1, n_terms + 1)
        vals = (1 - y**2) ** 2 * np.polynomial.polynomial.polyval(y, coef)
    else:
        k = np.arange(1, n_terms + 1)
        coef = rng.standard_normal(n_terms) / k**4
        vals = np.sin(np.outer(y + 1.0, k) * np.pi / 2.0) @ coef
    vals[0] = vals[-1] = 0.0
    return BeamProfile(grid, amplitude * vals, bc)


def norm_equivalence_check(bc, grid: BeamGrid, n_samples: int = 100, seed: int = 0) -> NormEquivalence:
    """Sample ratios ||h||_{H^4} / ||h''''||_2 over random admissible profiles."""
    bc = BoundaryConditionKind.parse(bc)
    if n_samples < 10:
        raise ValidationError("n_samples must be >= 10")
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_samples):
        h = random_admissible_profile(rng, grid, bc)
        ratios.append(full_h4_norm(h) / norm_H4(h))
    counter = 1.0 - grid.nodes**2
    rejected = not any(admits_bc(counter, grid, k) for k in BoundaryConditionKind)
    return NormEquivalence(float(np.min(ratios)), float(np.max(ratios)), rejected)
