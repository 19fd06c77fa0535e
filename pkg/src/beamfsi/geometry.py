"""Channel, obstacle, cutoff and the vertical-shear displacement map.

The obstacle is a family of superellipse sections
``|x / a(y)|^q + |z / b(y)|^q <= 1`` with semi-axes ``a(y) = a0 + a_flare |y|^p``
and ``b(y) = b0 + b_flare |y|^p``.  The displacement map is
``phi_h(x, y, z) = (x, y, z + xi(x, z) h(y))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from .beam import BeamProfile
from .errors import DegenerateJacobian, GeometryError, ObstacleOutOfBounds, ValidationError


@dataclass(frozen=True)
class ChannelSpec:
    """Channel (-R, R) x (-1, 1)^2."""

    R: float = 3.0

    def __post_init__(self):
        if not (self.R > 1.0 and np.isfinite(self.R)):
            raise ValidationError(f"channel half-length R must exceed 1, got {self.R}")


@dataclass(frozen=True)
class Obstacle:
    """Superellipse-section obstacle spanning the channel in y."""

    a0: float = 0.3
    b0: float = 0.2
    q: float = 4.0
    a_flare: float = 0.0
    b_flare: float = 0.0
    p: int = 2

    def __post_init__(self):
        if not self.q >= 2.0:
            raise ValidationError(f"superellipse exponent q must be >= 2, got {self.q}")
        if self.p < 2 or int(self.p) != self.p or self.p % 2:
            raise ValidationError("flare exponent p must be an even integer >= 2")
        ys = np.linspace(-1.0, 1.0, 201)
        if np.min(self.a(ys)) <= 0.0 or np.min(self.b(ys)) <= 0.0:
            raise ObstacleOutOfBounds("semi-axes a(y), b(y) must stay positive (empty obstacle)")
        if self.Z_plus >= 1.0:
            raise ObstacleOutOfBounds(f"obstacle height Z = {self.Z_plus:g} must be < 1")

    def a(self, y):
        return self.a0 + self.a_flare * np.abs(y) ** self.p

    def b(self, y):
        return self.b0 + self.b_flare * np.abs(y) ** self.p

    def da(self, y):
        y = np.asarray(y, dtype=float)
        return self.a_flare * self.p * np.sign(y) * np.abs(y) ** (self.p - 1)

    def db(self, y):
        y = np.asarray(y, dtype=float)
        return self.b_flare * self.p * np.sign(y) * np.abs(y) ** (self.p - 1)

    @property
    def X_plus(self) -> float:
        return float(max(self.a(0.0), self.a(1.0)))

    X_minus = X_plus

    @property
    def Z_plus(self) -> float:
        return float(max(self.b(0.0), self.b(1.0)))

    Z_minus = Z_plus

    def validate(self, channel: ChannelSpec):
        if self.X_plus >= channel.R:
            raise ObstacleOutOfBounds(f"obstacle extent X = {self.X_plus:g} must be < R = {channel.R:g}")

    def level(self, x, y, z):
        """Superellipse level function; <= 1 inside the obstacle."""
        return np.abs(x / self.a(y)) ** self.q + np.abs(z / self.b(y)) ** self.q

    def contains(self, x, y, z):
        y = np.asarray(y)
        return (self.level(x, y, z) <= 1.0) & (np.abs(y) <= 1.0)

    def section(self, y: float, n: int = 128):
        """Boundary curve of the section at y: sample points, tangents, outward normals.

        The parameter is t in [0, 2 pi) with n equispaced samples.  Points are
        placed so the sample set is symmetric under z -> -z.
        """
        t = 2.0 * np.pi * np.arange(n) / n
        a, b, e = float(self.a(y)), float(self.b(y)), 2.0 / self.q
        c, s = np.cos(t), np.sin(t)
        # the fractional power amplifies the O(1e-16) residue of cos(pi/2), sin(pi)
        c[np.abs(c) < 1e-12] = 0.0
        s[np.abs(s) < 1e-12] = 0.0
        mirror = (-np.arange(n)) % n
        s = 0.5 * (s - s[mirror])
        c = 0.5 * (c + c[mirror])
        x = a * np.sign(c) * np.abs(c) ** e
        z = b * np.sign(s) * np.abs(s) ** e
        # outward normal is the gradient of the level function
        gx = np.sign(x) * np.abs(x / a) ** (self.q - 1) / a
        gz = np.sign(z) * np.abs(z / b) ** (self.q - 1) / b
        gn = np.hypot(gx, gz)
        return SectionCurve(y=float(y), t=t, x=x, z=z, nx=gx / gn, nz=gz / gn)

    def section_area(self, y) -> np.ndarray:
        from scipy.special import gamma

        q = self.q
        return 4.0 * self.a(y) * self.b(y) * gamma(1 + 1 / q) ** 2 / gamma(1 + 2 / q)

    def is_z_symmetric(self) -> bool:
        return True  # sections depend on |z| only


@dataclass(frozen=True)
class SectionCurve:
    y: float
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    nx: np.ndarray
    nz: np.ndarray


# ---------------------------------------------------------------------------
# Clearance and attachment angle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Clearance:
    eps_plus: float
    eps_minus: float
    admissible: bool
    bound: float


def clearance(h, obstacle: Obstacle, omega: float) -> Clearance:
    """Gaps between the displaced obstacle and the walls z = +-1."""
    zmax = max(obstacle.Z_plus, obstacle.Z_minus)
    if not (1.0 < omega < 1.0 / zmax):
        raise ValidationError(f"margin factor omega must lie in (1, {1 / zmax:g}), got {omega}")
    if isinstance(h, BeamProfile):
        y, v = h.grid.nodes, h.values
    else:
        v = np.asarray(h, dtype=float)
        y = np.linspace(-1.0, 1.0, v.size)
    b = obstacle.b(y)
    eps_plus = float(1.0 - np.max(b + v))
    eps_minus = float(1.0 - np.max(b - v))
    bound = 1.0 - omega * zmax
    return Clearance(eps_plus, eps_minus, bool(np.max(np.abs(v)) < bound), bound)


def sigma_from_theta(theta_star: float) -> float:
    """Integrability gain sigma = 0.9 min{(2 pi - 2 theta)/(2 theta - pi), 1}."""
    if theta_star >= np.pi:
        raise GeometryError(f"attachment angle {theta_star:.6g} must be < pi")
    if theta_star <= 0.5 * np.pi:
        return 0.9
    return 0.9 * min((2 * np.pi - 2 * theta_star) / (2 * theta_star - np.pi), 1.0)


@dataclass(frozen=True)
class Attachment:
    theta_star: float
    sigma: float


def attachment_angles(obstacle: Obstacle, n_samples: int = 64) -> np.ndarray:
    """Angles inside the fluid between the obstacle surface and the faces y = -1, 1.

    In the half-plane spanned by e_y and the direction (-sin alpha, cos alpha)
    in (x, z), the obstacle boundary is the curve r(y; alpha).  The fluid angle
    at the face y = +1 is pi/2 + atan(dr/dy), and pi/2 - atan(dr/dy) at y = -1.
    """
    if n_samples < 64:
        raise ValidationError("attachment_sigma needs at least 64 samples")
    alpha = 2.0 * np.pi * np.arange(n_samples) / n_samples
    dx, dz = np.abs(np.sin(alpha)), np.abs(np.cos(alpha))
    q = obstacle.q
    out = []
    for y, sgn in ((1.0, 1.0), (-1.0, -1.0)):
        a, b = obstacle.a(y), obstacle.b(y)
        da, db = obstacle.da(y), obstacle.db(y)
        S = dx**q * a ** (-q) + dz**q * b ** (-q)
        dS = -q * (dx**q * a ** (-q - 1) * da + dz**q * b ** (-q - 1) * db)
        dr = -S ** (-1.0 / q - 1.0) * dS / q
        out.append(0.5 * np.pi + np.arctan(sgn * dr))
    return np.concatenate(out)


def attachment_sigma(obstacle: Obstacle, n_samples: int = 64) -> Attachment:
    theta = float(np.max(attachment_angles(obstacle, n_samples)))
    return Attachment(theta, sigma_from_theta(theta))


# ---------------------------------------------------------------------------
# Cutoff and displacement map
# ---------------------------------------------------------------------------


def _smoothstep(t):
    """1 for t <= 0, 0 for t >= 1, C^2 quintic in between; returns value and derivative."""
    t = np.clip(t, 0.0, 1.0)
    s = t**3 * (10 - 15 * t + 6 * t**2)
    ds = 30 * t**2 * (1 - t) ** 2
    return 1.0 - s, -ds


@dataclass(frozen=True)
class CutoffFunction:
    """Tensor product cutoff xi(x, z) = s_x(|x|) s_z(|z|).

    ``xi = 1`` on D = [-xd, xd] x [-zd, zd]; it decays to zero across bands of
    width ``band_x``, ``band_z`` just outside D, and vanishes outside lambda D.
    """

    xd: float
    zd: float
    lam: float
    band_x: float
    band_z: float

    @classmethod
    def for_obstacle(cls, obstacle: Obstacle, channel: ChannelSpec, margin_fraction: float = 0.2, band_fraction: float = 0.25, wall_margin: float = 0.05):
        zmax = max(obstacle.Z_plus, obstacle.Z_minus)
        m = margin_fraction * (1.0 - zmax)
        xd, zd = obstacle.X_plus + m, zmax + m
        lam = min((channel.R - wall_margin) / xd, (1.0 - wall_margin) / zd)
        if not lam > 1.0:
            raise GeometryError("no room for the cutoff transition band between obstacle and walls")
        return cls(xd, zd, lam, band_fraction * (lam - 1) * xd, band_fraction * (lam - 1) * zd)

    def _factors(self, x, z):
        sx, dsx = _smoothstep((np.abs(x) - self.xd) / self.band_x)
        sz, dsz = _smoothstep((np.abs(z) - self.zd) / self.band_z)
        return sx, sz, np.sign(x) * dsx / self.band_x, np.sign(z) * dsz / self.band_z

    def __call__(self, x, z):
        sx, sz, _, _ = self._factors(np.asarray(x, float), np.asarray(z, float))
        return sx * sz

    def gradient(self, x, z):
        sx, sz, dsx, dsz = self._factors(np.asarray(x, float), np.asarray(z, float))
        return dsx * sz, sx * dsz

    @property
    def max_dx(self) -> float:
        return 1.875 / self.band_x  # max of the quintic derivative is 30/16

    @property
    def max_dz(self) -> float:
        return 1.875 / self.band_z


class Deformation:
    """Evaluator for p = d_x xi h, r = xi h', d = 1 + d_z xi h at arbitrary points."""

    def __init__(self, h: BeamProfile | None, cutoff: CutoffFunction):
        self.h = h
        self.cutoff = cutoff
        if h is None or not np.any(h.values):
            self._spline = None
        else:
            self._spline = CubicSpline(h.grid.nodes, h.values)

    @property
    def is_identity(self) -> bool:
        return self._spline is None

    def h_of(self, y):
        y = np.asarray(y, dtype=float)
        if self._spline is None:
            return np.zeros_like(y)
        return self._spline(np.clip(y, -1.0, 1.0))

    def dh_of(self, y):
        y = np.asarray(y, dtype=float)
        if self._spline is None:
            return np.zeros_like(y)
        return self._spline(np.clip(y, -1.0, 1.0), 1)

    def coefficients(self, x, y, z):
        x, y, z = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, z)))
        hv, dhv = self.h_of(y), self.dh_of(y)
        xi = self.cutoff(x, z)
        gx, gz = self.cutoff.gradient(x, z)
        return gx * hv, xi * dhv, 1.0 + gz * hv

    def map_point(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = pts.copy()
        out[..., 2] = pts[..., 2] + self.cutoff(pts[..., 0], pts[..., 2]) * self.h_of(pts[..., 1])
        return out


def map_point(h: BeamProfile, cutoff: CutoffFunction, p):
    """Image of reference points under phi_h."""
    return Deformation(h, cutoff).map_point(p)


def matrices_from_coefficients(p, r, d):
    """Closed forms of J, M = J^{-T}, A = det J M^T M and B = det J M."""
    p, r, d = np.broadcast_arrays(p, r, d)
    z, o = np.zeros_like(p), np.ones_like(p)

    def stack(rows):
        return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)

    J = stack([[o, z, z], [z, o, z], [p, r, d]])
    M = stack([[o, z, -p / d], [z, o, -r / d], [z, z, 1 / d]])
    A = stack([[d, z, -p], [z, d, -r], [-p, -r, (1 + p**2 + r**2) / d]])
    B = stack([[d, z, -p], [z, d, -r], [z, z, o]])
    return J, M, A, B


@dataclass
class TransformMatrices:
    """Per-cell coefficients of the transformed system.

    Only the three scalars p, r, d are stored; the 3x3 matrices are built on
    request.  ``deformation`` evaluates the same quantities at faces.
    """

    p: np.ndarray
    r: np.ndarray
    d: np.ndarray
    deformation: Deformation = field(repr=False)

    @property
    def det(self) -> np.ndarray:
        return self.d

    @property
    def is_identity(self) -> bool:
        return self.deformation.is_identity

    def full(self):
        """Return (J, M, A, B) with shape (nx, ny, nz, 3, 3)."""
        return matrices_from_coefficients(self.p, self.r, self.d)


# ---------------------------------------------------------------------------
# Reference domain
# ---------------------------------------------------------------------------


class CellKind(enum.IntEnum):
    FLUID = 0
    SOLID = 1
    INLET = 2
    OUTLET = 3
    WALL = 4
    OBSTACLE_BOUNDARY = 5


def _centers(n: int, half: float) -> np.ndarray:
    # written so that c[n-1-k] == -c[k] exactly
    return (np.arange(n) + 0.5 - 0.5 * n) * (2.0 * half / n)


@dataclass
class ReferenceDomain:
    channel: ChannelSpec
    obstacle: Obstacle | None
    shape: tuple
    solid: np.ndarray = field(repr=False)
    kind: np.ndarray = field(repr=False)

    @property
    def spacing(self):
        nx, ny, nz = self.shape
        return 2.0 * self.channel.R / nx, 2.0 / ny, 2.0 / nz

    @property
    def centers(self):
        nx, ny, nz = self.shape
        return _centers(nx, self.channel.R), _centers(ny, 1.0), _centers(nz, 1.0)

    def faces(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        half = self.channel.R if axis == 0 else 1.0
        return np.linspace(-half, half, n + 1)

    @property
    def fluid(self) -> np.ndarray:
        return ~self.solid

    @property
    def cell_volume(self) -> float:
        dx, dy, dz = self.spacing
        return dx * dy * dz

    def is_z_symmetric(self) -> bool:
        return bool(np.array_equal(self.solid, self.solid[:, :, ::-1]))


def build_reference_domain(channel: ChannelSpec, obstacle: Obstacle | None, resolution) -> ReferenceDomain:
    """Classify the cells of a uniform grid over the channel."""
    nx, ny, nz = (int(v) for v in resolution)
    if min(nx, ny, nz) < 8:
        raise ValidationError("each grid resolution must be >= 8")
    xc, yc, zc = _centers(nx, channel.R), _centers(ny, 1.0), _centers(nz, 1.0)
    if obstacle is None:
        solid = np.zeros((nx, ny, nz), dtype=bool)
    else:
        obstacle.validate(channel)
        X, Y, Z = np.meshgrid(xc, yc, zc, indexing="ij")
        solid = obstacle.contains(X, Y, Z)
    # keep only the fluid component connected to the inlet
    labels, count = ndimage.label(~solid)
    if count > 1:
        inlet_labels = np.unique(labels[0][labels[0] > 0])
        solid = ~np.isin(labels, inlet_labels) | solid
    if not np.any(~solid[0]) or not np.any(~solid[-1]):
        raise ObstacleOutOfBounds("obstacle blocks the inlet or outlet plane")
    kind = np.full(solid.shape, CellKind.FLUID, dtype=np.int8)
    boundary_wall = np.zeros_like(solid)
    boundary_wall[:, [0, -1], :] = True
    boundary_wall[:, :, [0, -1]] = True
    kind[boundary_wall] = CellKind.WALL
    kind[-1] = CellKind.OUTLET
    kind[0] = CellKind.INLET
    near = ndimage.binary_dilation(solid, structure=ndimage.generate_binary_structure(3, 1)) & ~solid
    kind[near] = CellKind.OBSTACLE_BOUNDARY
    kind[solid] = CellKind.SOLID
    return ReferenceDomain(channel, obstacle, (nx, ny, nz), solid, kind)


def transform_matrices(h: BeamProfile | None, cutoff: CutoffFunction, domain: ReferenceDomain) -> TransformMatrices:
    """Coefficients p, r, d at the cell centres of the reference grid."""
    deform = Deformation(h, cutoff)
    xc, yc, zc = domain.centers
    X, Y, Z = np.meshgrid(xc, yc, zc, indexing="ij")
    p, r, d = deform.coefficients(X, Y, Z)
    _check_det(d)
    return TransformMatrices(p, r, d, deform)


def _check_det(d):
    dmin = float(np.min(d))
    if not dmin > 0.0:
        raise DegenerateJacobian(f"det J reaches {dmin:.3g}; displacement too large for the cutoff")
