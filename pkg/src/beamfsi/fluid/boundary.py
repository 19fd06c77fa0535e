"""Inflow/outflow profiles and Dirichlet data for the channel."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ValidationError


class ProfileKind(enum.Enum):
    SYMMETRIC_POISEUILLE = "symmetric"
    ASYMMETRIC_BUMP = "asymmetric"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"symmetricpoiseuille": "symmetric", "asymmetricbump": "asymmetric", "poiseuille": "symmetric", "bump": "asymmetric"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValidationError(f"unknown profile kind {value!r}") from None


def poiseuille(y, z):
    """Wall profile V = (9/16)(1 - y^2)(1 - z^2), unit flux over (-1, 1)^2."""
    return 9.0 / 16.0 * (1 - y**2) * (1 - z**2)


def bump_profile(y, z, s: float):
    return poiseuille(y, z) * (1 + s * z * (1 - y**2) * (1 - z**2))


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data of magnitude gamma.

    ``inlet`` and ``outlet`` are the profiles V_i, V_o on the end planes;
    walls and the obstacle surface carry zero velocity.  ``custom`` replaces
    the whole boundary velocity, which the manufactured-solution tests use.
    """

    gamma: float
    profile_kind: ProfileKind = ProfileKind.SYMMETRIC_POISEUILLE
    s: float = 0.0
    custom: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.gamma >= 0.0 and np.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be finite and >= 0, got {self.gamma}")
        if abs(self.s) > 1.0:
            raise ValidationError(f"bump strength |s| must be <= 1, got {self.s}")

    @property
    def is_symmetric(self) -> bool:
        return self.custom is None and (self.profile_kind is ProfileKind.SYMMETRIC_POISEUILLE or self.s == 0.0)

    def inlet(self, y, z):
        if self.profile_kind is ProfileKind.ASYMMETRIC_BUMP:
            return bump_profile(y, z, self.s)
        return poiseuille(y, z)

    def outlet(self, y, z):
        return poiseuille(y, z)

    def with_gamma(self, gamma: float) -> "BoundaryData":
        return BoundaryData(gamma, self.profile_kind, self.s, self.custom)

    def velocity_function(self, R: float, inlet_scale: float = 1.0, outlet_scale: float = 1.0):
        """Callable g(component, x, y, z) for the end planes x = -R and x = R."""
        if self.custom is not None:
            return self.custom
        gamma = self.gamma

        def g(c, x, y, z):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            if c != 0 or gamma == 0.0:
                return out
            tol = 1e-12 * R
            at_in = np.abs(x + R) <= tol
            at_out = np.abs(x - R) <= tol
            out[at_in] = gamma * inlet_scale * self.inlet(y[at_in], z[at_in])
            out[at_out] = gamma * outlet_scale * self.outlet(y[at_out], z[at_out])
            return out

        return g


def build_boundary_data(gamma: float, profile_kind="symmetric", s: float = 0.0) -> BoundaryData:
    kind = ProfileKind.parse(profile_kind)
    if kind is ProfileKind.SYMMETRIC_POISEUILLE:
        s = 0.0
    return BoundaryData(float(gamma), kind, float(s))
