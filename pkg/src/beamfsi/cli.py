"""Command line front end.

Usage::

    beamfsi <subcommand> --config <path> [--out <dir>] [--seed <u64>]

Environment: ``BEAMFSI_OUT_DIR`` overrides the configured output directory
(``--out`` wins over both), ``BEAMFSI_THREADS`` caps BLAS/OpenMP threads.

Exit codes: 0 pass, 1 failed check, 2 validation or parse error, 3 solver
non-convergence, 4 geometry error, 5 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import beam as beam_mod
from .config import RunConfig, default_config, parse_config
from .coupling import gamma_sweep, solve_fsi, symmetry_check
from .errors import BeamFsiError
from .fluid import flux_through_slice, solve_navier_stokes, velocity_norm
from .fluid.solver import FluidSystem, face_planes, parity_residual
from .geometry import attachment_sigma, transform_matrices
from .io import Results, write_outputs
from .lift import compute_lift_profile

log = logging.getLogger("beamfsi")

COMMANDS = ("solve-beam", "solve-fluid", "solve-fsi", "symmetry-check", "gamma-sweep", "verify-constants")


def cmd_solve_beam(cfg: RunConfig):
    fsi = cfg.fsi
    grid = fsi.beam_grid
    g = np.full(grid.n_nodes, cfg["beam.load"])
    h = beam_mod.solve_beam(g, fsi.restoring, fsi.bc, grid, fsi.beam_tol)
    summary = {"command": "solve-beam", "bc": fsi.bc.value, "n_nodes": grid.n_nodes, "load": cfg["beam.load"],
               "energy": beam_mod.beam_energy(h, fsi.restoring, g), **h.norms()}
    return Results(summary=summary, beam=h), True


def cmd_solve_fluid(cfg: RunConfig):
    from .coupling import cutoff_for, reference_domain

    fsi = cfg.fsi
    domain = reference_domain(fsi)
    matrices = transform_matrices(None, cutoff_for(fsi), domain)
    bc = fsi.boundary_data
    system = FluidSystem(domain, matrices, bc, fsi.eta, fsi.solver_options)
    state, report = solve_navier_stokes(matrices, bc, fsi.eta, system=system)
    lift = compute_lift_profile(state, matrices, fsi.obstacle, fsi.beam_grid, fsi.eta, fsi.lift_method)
    fluxes = np.array([flux_through_slice(state, x) for x in face_planes(state)])
    dev = float(np.max(np.abs(fluxes - bc.gamma)) / bc.gamma) if bc.gamma > 0 else float(np.max(np.abs(fluxes)))
    summary = {"command": "solve-fluid", "gamma": bc.gamma, "resolution": list(fsi.resolution),
               "velocity_norm": velocity_norm(state), "flux_relative_deviation": dev, "lift_norm_inf": lift.norm_inf,
               "sigma": attachment_sigma(fsi.obstacle).sigma, "report": report.as_dict(include_time=False)}
    if domain.is_z_symmetric() and fsi.resolution[2] % 2 == 0:
        summary["parity_residual"] = parity_residual(state)
    return Results(summary=summary, lift=lift, state=state), True


def cmd_solve_fsi(cfg: RunConfig):
    eq = solve_fsi(cfg.fsi)
    summary = {"command": "solve-fsi", "gamma": cfg.fsi.gamma, "resolution": list(cfg.fsi.resolution),
               "bc": cfg.fsi.bc.value, **eq.summary()}
    ok = eq.fixed_point_residual <= 2 * cfg.fsi.coupling_tol
    summary["fixed_point_check"] = ok
    return Results(summary=summary, beam=eq.h, lift=eq.lift, state=eq.state, history=eq.history), ok


def cmd_symmetry_check(cfg: RunConfig):
    rep = symmetry_check(cfg.fsi, cfg["symmetry.h_tol"], cfg["symmetry.refine"])
    summary = {"command": "symmetry-check", "gamma": cfg.fsi.gamma, **rep.as_dict()}
    return Results(summary=summary), rep.passed


def cmd_gamma_sweep(cfg: RunConfig):
    rows = gamma_sweep(cfg.fsi, cfg["sweep.gammas"])
    header = ["gamma", "h_norm_H4", "velocity_norm", "lift_inf", "contraction", "iterations", "lipschitz_h", "lipschitz_u"]
    cols = [[getattr(r, name) for r in rows] for name in header]
    quotients = [r.lipschitz_h for r in rows[1:]]
    spread = max(quotients) / min(quotients) if min(quotients) > 0 else float("inf")
    summary = {"command": "gamma-sweep", "rows": [dict(zip(header, [getattr(r, n) for n in header])) for r in rows],
               "lipschitz_spread": spread}
    return Results(summary=summary, tables={"sweep": (header, cols)}), spread <= 2.0


def cmd_verify_constants(cfg: RunConfig):
    grid = beam_mod.BeamGrid(cfg["constants.nodes"])
    out, ok = {"command": "verify-constants", "n_nodes": grid.n_nodes}, True
    for bc in beam_mod.BoundaryConditionKind:
        emb = beam_mod.embedding_constant(bc, grid)
        eq = beam_mod.norm_equivalence_check(bc, grid, cfg["constants.samples"], seed=cfg.seed)
        holds = emb.s_discrete < emb.s_paper_bound
        ok = ok and holds and eq.c_lower > 0
        out[bc.value] = {"s_discrete": emb.s_discrete, "s_bound": emb.s_paper_bound, "bound_holds": holds,
                         "argmax": emb.argmax, "c_lower": eq.c_lower, "c_upper": eq.c_upper,
                         "counterexample_rejected": eq.counterexample_rejected}
    return Results(summary=out), ok


HANDLERS = {
    "solve-beam": cmd_solve_beam,
    "solve-fluid": cmd_solve_fluid,
    "solve-fsi": cmd_solve_fsi,
    "symmetry-check": cmd_symmetry_check,
    "gamma-sweep": cmd_gamma_sweep,
    "verify-constants": cmd_verify_constants,
}


def run_command(cmd: str, cfg: RunConfig, out_dir=None) -> int:
    """Execute one pipeline and write its outputs; returns the exit status."""
    out = out_dir or os.environ.get("BEAMFSI_OUT_DIR") or cfg.out_dir
    try:
        results, ok = HANDLERS[cmd](cfg)
        results.summary["pass"] = bool(ok)
        write_outputs(results, out, figures=cfg["run.figures"])
    except BeamFsiError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    return 0 if ok else 1


def _thread_limit():
    threads = os.environ.get("BEAMFSI_THREADS")
    if not threads:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(threads))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beamfsi", description="Stationary beam/channel-flow equilibria.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat section.key = value file (defaults apply if omitted)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config) if args.config else default_config()
        if args.seed is not None:
            cfg = cfg.with_values(**{"run.seed": args.seed})
    except BeamFsiError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    with _thread_limit():
        return run_command(args.command, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
