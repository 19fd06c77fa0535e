"""Flat ``section.key = value`` run configuration.

Lines starting with ``#`` are comments; trailing ``# ...`` comments are
stripped.  Every key must be known, each may appear once, and the full
document is validated against the solver preconditions before any solve.

Example::

    fluid.gamma = 0.002
    fluid.resolution = 48, 24, 24
    beam.bc = clamped
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .beam import BoundaryConditionKind, RestoringForce
from .coupling import FsiConfig
from .errors import BeamFsiError, ParseError, ValidationError
from .fluid.boundary import ProfileKind
from .geometry import ChannelSpec, Obstacle
from .lift import LiftMethod


def _float(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    f = float(v)
    if f != int(f):
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{v!r} is not a boolean")


def _ints(v: str) -> tuple:
    return tuple(_int(p) for p in v.replace(",", " ").split())


def _floats(v: str) -> tuple:
    return tuple(float(p) for p in v.replace(",", " ").split())


def _str(v: str) -> str:
    return v.strip()


# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "channel.R": (_float, 3.0),
    "obstacle.a0": (_float, 0.3),
    "obstacle.b0": (_float, 0.2),
    "obstacle.q": (_float, 4.0),
    "obstacle.a_flare": (_float, 0.0),
    "obstacle.b_flare": (_float, 0.0),
    "obstacle.p": (_int, 2),
    "geometry.omega": (_float, 1.25),
    "geometry.cutoff_margin": (_float, 0.2),
    "geometry.cutoff_band": (_float, 0.25),
    "beam.bc": (_str, "clamped"),
    "beam.nodes": (_int, 41),
    "beam.restoring": (_str, "zero"),
    "beam.kappa": (_float, 0.0),
    "beam.saturation": (_float, 1.0),
    "beam.tol": (_float, 1e-10),
    "beam.load": (_float, 1.0),
    "fluid.eta": (_float, 1.0),
    "fluid.gamma": (_float, 0.002),
    "fluid.resolution": (_ints, (48, 24, 24)),
    "fluid.profile": (_str, "symmetric"),
    "fluid.bump_s": (_float, 0.5),
    "fluid.tol": (_float, 1e-9),
    "fluid.linear_tol": (_float, 1e-11),
    "fluid.linear_method": (_str, "auto"),
    "fluid.direct_threshold": (_int, 15000),
    "fluid.max_picard": (_int, 50),
    "fluid.picard_relaxation": (_float, 1.0),
    "lift.method": (_str, "residual"),
    "coupling.tol": (_float, 1e-8),
    "coupling.relaxation": (_float, 1.0),
    "coupling.max_iter": (_int, 50),
    "sweep.gammas": (_floats, (0.0, 0.5, 1.0, 1.5, 2.0)),
    "symmetry.h_tol": (_float, 1e-6),
    "symmetry.refine": (_bool, True),
    "constants.nodes": (_int, 401),
    "constants.samples": (_int, 100),
    "run.out_dir": (_str, "out"),
    "run.seed": (_int, 0),
    "run.figures": (_bool, True),
}


@dataclass(frozen=True)
class RunConfig:
    fsi: FsiConfig
    values: dict = field(repr=False)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def out_dir(self) -> Path:
        return Path(self.values["run.out_dir"])

    @property
    def seed(self) -> int:
        return int(self.values["run.seed"])

    def with_values(self, **overrides) -> "RunConfig":
        vals = dict(self.values)
        for k, v in overrides.items():
            vals[k.replace("__", ".")] = v
        return build_run_config(vals)


def parse_text(text: str) -> dict:
    """Parse the document into raw strings keyed by dotted name."""
    seen: dict[str, int] = {}
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'section.key = value', got {body!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key or "." not in key or any(c.isspace() for c in key):
            raise ParseError(f"malformed key {key!r}", lineno)
        if not value:
            raise ParseError(f"missing value for {key!r}", lineno)
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno)
        seen[key] = lineno
        raw[key] = value
    return raw


def _typed(raw: dict) -> dict:
    values = {k: default for k, (_, default) in SCHEMA.items()}
    for key, text in raw.items():
        if key not in SCHEMA:
            raise ValidationError(f"unknown key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(text) if isinstance(text, str) else text
        except ValueError as exc:
            raise ValidationError(f"{key}: {exc}") from None
    return values


def build_run_config(values: dict) -> RunConfig:
    """Validate typed values and assemble the solver configuration."""
    v = dict(values)

    def check(key, ok, what):
        if not ok:
            raise ValidationError(f"{key} = {v[key]!r} violates: {what}")

    res = v["fluid.resolution"]
    check("fluid.resolution", len(res) == 3 and min(res) >= 8, "three integers, each >= 8")
    check("fluid.gamma", v["fluid.gamma"] >= 0, "gamma >= 0")
    check("fluid.eta", v["fluid.eta"] > 0, "eta > 0")
    check("beam.nodes", v["beam.nodes"] >= 9 and v["beam.nodes"] % 2 == 1, "odd number of nodes >= 9")
    check("fluid.bump_s", abs(v["fluid.bump_s"]) <= 1, "|s| <= 1")
    check("constants.nodes", v["constants.nodes"] >= 9 and v["constants.nodes"] % 2 == 1, "odd number of nodes >= 9")
    check("constants.samples", v["constants.samples"] >= 10, "at least 10 samples")
    check("fluid.max_picard", v["fluid.max_picard"] >= 1, ">= 1")
    for key in ("fluid.tol", "fluid.linear_tol", "beam.tol", "coupling.tol", "symmetry.h_tol"):
        check(key, v[key] > 0, "tolerance > 0")
    for key in ("coupling.relaxation", "fluid.picard_relaxation"):
        check(key, 0 < v[key] <= 1, "relaxation in (0, 1]")
    gam = v["sweep.gammas"]
    check("sweep.gammas", len(gam) >= 2 and all(b > a for a, b in zip(gam[:-1], gam[1:])) and gam[0] >= 0,
          "at least two strictly increasing non-negative values")
    check("run.seed", 0 <= v["run.seed"] < 2**64, "unsigned 64-bit integer")
    check("fluid.linear_method", v["fluid.linear_method"] in ("auto", "direct", "iterative"), "auto, direct or iterative")

    try:
        channel = ChannelSpec(v["channel.R"])
        obstacle = Obstacle(v["obstacle.a0"], v["obstacle.b0"], v["obstacle.q"], v["obstacle.a_flare"],
                            v["obstacle.b_flare"], v["obstacle.p"])
        kind = v["beam.restoring"].lower()
        restoring = RestoringForce(kind, v["beam.kappa"], v["beam.saturation"])
        fsi = FsiConfig(
            channel=channel,
            obstacle=obstacle,
            bc=BoundaryConditionKind.parse(v["beam.bc"]),
            restoring=restoring,
            eta=v["fluid.eta"],
            gamma=v["fluid.gamma"],
            resolution=tuple(res),
            beam_nodes=v["beam.nodes"],
            profile_kind=ProfileKind.parse(v["fluid.profile"]),
            bump_s=v["fluid.bump_s"],
            omega=v["geometry.omega"],
            fluid_tol=v["fluid.tol"],
            linear_tol=v["fluid.linear_tol"],
            beam_tol=v["beam.tol"],
            coupling_tol=v["coupling.tol"],
            relaxation=v["coupling.relaxation"],
            max_outer=v["coupling.max_iter"],
            max_picard=v["fluid.max_picard"],
            picard_relaxation=v["fluid.picard_relaxation"],
            lift_method=LiftMethod.parse(v["lift.method"]),
            linear_method=v["fluid.linear_method"],
            direct_threshold=v["fluid.direct_threshold"],
            cutoff_margin=v["geometry.cutoff_margin"],
            cutoff_band=v["geometry.cutoff_band"],
        )
    except ValidationError:
        raise
    except BeamFsiError as exc:
        raise ValidationError(str(exc)) from exc
    return RunConfig(fsi, v)


def parse_config(path) -> RunConfig:
    """Read, type-check and validate a configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        from .errors import IoError

        raise IoError(f"cannot read config {path}: {exc}") from exc
    return build_run_config(_typed(parse_text(text)))


def default_config() -> RunConfig:
    return build_run_config(_typed({}))


def config_from_text(text: str) -> RunConfig:
    return build_run_config(_typed(parse_text(text)))
