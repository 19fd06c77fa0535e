"""Deterministic output files: JSON summary, CSV profiles, legacy VTK fields, manifest."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import IoError


def fmt(x) -> str:
    """Float with 17 significant digits (round-trip exact)."""
    return "%.17g" % float(x)


def _clean(obj):
    """Make an object JSON-serializable with round-trip floats; NaN/inf become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path: Path, data: dict):
    # json writes repr(float), the shortest string that round-trips exactly
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, columns):
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(str(int(v)) if isinstance(v, (bool, np.bool_)) else fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_vtk(path: Path, state, title: str = "beamfsi fields"):
    """Legacy ASCII STRUCTURED_POINTS file with cell-centre velocity, pressure and solid mask."""
    layout = state.layout
    nx, ny, nz = layout.shape
    dx, dy, dz = layout.spacing
    xc, yc, zc = layout.domain.centers
    U1, U2, U3 = state.U_interior
    u = 0.5 * (U1[1:] + U1[:-1])
    v = 0.5 * (U2[:, 1:] + U2[:, :-1])
    w = 0.5 * (U3[:, :, 1:] + U3[:, :, :-1])
    P = state.P
    solid = layout.domain.solid.astype(int)

    def flat(a):  # x varies fastest
        return np.transpose(a, (2, 1, 0)).ravel()

    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} {nz}",
        f"ORIGIN {fmt(xc[0])} {fmt(yc[0])} {fmt(zc[0])}",
        f"SPACING {fmt(dx)} {fmt(dy)} {fmt(dz)}",
        f"POINT_DATA {nx * ny * nz}",
        "VECTORS velocity double",
    ]
    lines += [f"{fmt(a)} {fmt(b)} {fmt(c)}" for a, b, c in zip(flat(u), flat(v), flat(w))]
    lines += ["SCALARS pressure double 1", "LOOKUP_TABLE default"]
    lines += [fmt(p) for p in flat(P)]
    lines += ["SCALARS solid int 1", "LOOKUP_TABLE default"]
    lines += [str(s) for s in flat(solid)]
    path.write_text("\n".join(lines) + "\n")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class Results:
    """Everything a command may emit; absent parts produce no file."""

    summary: dict = field(default_factory=dict)
    beam: Optional[object] = None  # BeamProfile
    lift: Optional[object] = None  # LiftProfile
    state: Optional[object] = None  # FluidState
    history: Optional[list] = None
    tables: dict = field(default_factory=dict)  # name -> (header, columns)


def write_outputs(results: Results, out_dir, figures: bool = True) -> dict:
    """Write the deterministic file set and a manifest of content hashes."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = []
        write_json(out / "summary.json", results.summary)
        files.append("summary.json")
        if results.beam is not None:
            write_csv(out / "beam.csv", ["y", "h"], [results.beam.grid.nodes, results.beam.values])
            files.append("beam.csv")
        if results.lift is not None:
            write_csv(out / "lift.csv", ["y", "L", "extended_flag"],
                      [results.lift.grid.nodes, results.lift.values, results.lift.extended])
            files.append("lift.csv")
        if results.state is not None:
            write_vtk(out / "fields.vtk", results.state)
            files.append("fields.vtk")
        if results.history is not None:
            hist = list(results.history)
            write_csv(out / "history.csv", ["iteration", "increment_H4"], [np.arange(1, len(hist) + 1), hist])
            files.append("history.csv")
        for name, (header, cols) in sorted(results.tables.items()):
            write_csv(out / f"{name}.csv", header, cols)
            files.append(f"{name}.csv")
        if figures:
            from .plotting import render_figures

            files += render_figures(results, out)
        manifest = {"files": {name: sha256(out / name) for name in sorted(files)}}
        write_json(out / "manifest.json", manifest)
    except OSError as exc:
        raise IoError(f"cannot write outputs to {out}: {exc}") from exc
    return manifest
