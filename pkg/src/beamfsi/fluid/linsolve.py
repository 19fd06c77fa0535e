"""Linear solvers for the saddle-point system [[F, G], [D, 0]].

Two paths:

* direct sparse LU of the system bordered with a one-cell pressure pin,
  used below a configurable unknown count;
* GMRES right-preconditioned with the block upper-triangular matrix
  [[F, G], [0, S]], where S ~ I / eta approximates the pressure Schur
  complement and F^{-1} is replaced by one AMG V-cycle built on the viscous
  part.  Each solve is checked against the true residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import LinearSolveFailure

log = logging.getLogger(__name__)


@dataclass
class LinearSolveInfo:
    method: str
    iterations: int
    relative_residual: float


@dataclass
class SaddleSolver:
    """Solver bound to fixed D, G; F may change between calls (Picard)."""

    D: sp.csr_matrix
    G: sp.csr_matrix
    eta: float
    amg_operator: sp.csr_matrix = field(repr=False)
    method: str = "auto"
    direct_threshold: int = 15000
    rtol: float = 1e-10
    restart: int = 200
    max_restarts: int = 20
    _amg: object = field(default=None, repr=False)

    def __post_init__(self):
        n = self.G.shape[0] + self.G.shape[1]
        if self.method == "auto":
            self.method = "direct" if n <= self.direct_threshold else "iterative"

    @property
    def amg(self):
        if self._amg is None:
            self._amg = pyamg.smoothed_aggregation_solver(self.amg_operator.tocsr(), max_coarse=500)
        return self._amg

    def solve(self, F: sp.csr_matrix, f: np.ndarray, c: np.ndarray, x0=None):
        """Solve F u + G p = f, D u = c with mean(p) = 0."""
        nu, npr = self.G.shape
        if not np.any(f) and not np.any(c):
            return np.zeros(nu), np.zeros(npr), LinearSolveInfo(self.method, 0, 0.0)
        if self.method == "direct":
            return self._direct(F, f, c)
        return self._iterative(F, f, c, x0)

    def _direct(self, F, f, c):
        nu, npr = self.G.shape
        # border with a single pinned cell; a dense row of ones ruins the fill-reducing ordering.
        # The multiplier absorbs any incompatibility of c, the pressure mean is fixed afterwards.
        pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, npr))
        A = sp.bmat([[F, self.G, None], [self.D, None, pin.T], [None, pin, None]], format="csc")
        b = np.concatenate([f, c, [0.0]])
        try:
            x = spla.splu(A).solve(b)
        except RuntimeError as exc:
            raise LinearSolveFailure(f"sparse LU failed: {exc}") from exc
        res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
        if not np.isfinite(res) or res > 1e-6:
            raise LinearSolveFailure(f"direct solve residual {res:.3e}")
        p = x[nu : nu + npr]
        return x[:nu], p - p.mean(), LinearSolveInfo("direct", 1, float(res))

    def _iterative(self, F, f, c, x0):
        nu, npr = self.G.shape
        A = sp.bmat([[F, self.G], [self.D, None]], format="csr")
        b = np.concatenate([f, c])
        bnorm = np.linalg.norm(b)
        ml = self.amg
        vcycle = ml.aspreconditioner(cycle="V")
        G, eta = self.G, self.eta

        def apply(r):
            p = eta * r[nu:]
            u = vcycle(r[:nu] - G @ p)
            return np.concatenate([u, p])

        M = spla.LinearOperator(A.shape, matvec=apply)
        x = np.zeros(A.shape[0]) if x0 is None else np.asarray(x0, dtype=float).copy()
        iters = 0

        def count(_):
            nonlocal iters
            iters += 1

        res = np.linalg.norm(A @ x - b) / bnorm
        for _ in range(self.max_restarts):
            if res <= self.rtol:
                break
            x, info = spla.gmres(A, b, x0=x, M=M, rtol=0.5 * self.rtol, atol=0.0, restart=self.restart, maxiter=1, callback=count, callback_type="pr_norm")
            new = np.linalg.norm(A @ x - b) / bnorm
            if not np.isfinite(new) or new >= 0.999 * res:
                raise LinearSolveFailure(f"GMRES stagnated at relative residual {new:.3e}")
            res = new
        if res > self.rtol:
            raise LinearSolveFailure(f"GMRES reached {res:.3e} > {self.rtol:g}")
        log.debug("GMRES %d iterations, residual %.3e", iters, res)
        return x[:nu], x[nu:], LinearSolveInfo("iterative", iters, float(res))
