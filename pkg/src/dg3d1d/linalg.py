"""Sparse storage helpers and a Jacobi-preconditioned conjugate gradient solver."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, InvalidArgumentError, NotSPDError

log = logging.getLogger(__name__)


@dataclass
class SolverReport:
    iterations: int
    residual: float  # true ||b - Ax|| / ||b|| at exit
    converged: bool

    def as_dict(self):
        return {"iterations": self.iterations, "residual": self.residual,
                "converged": self.converged}


def to_csr(A):
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise InvalidArgumentError(f"shape mismatch {A.shape} @ {x.shape}")
    return A @ x


def block_compose(blocks, sizes):
    """Assemble a square block matrix from ``(row, col, matrix, scale)`` entries.

    ``sizes`` lists the dimension of each block row/column. Repeated
    positions are summed.
    """
    nb = len(sizes)
    grid = [[None] * nb for _ in range(nb)]
    for i, j, M, scale in blocks:
        if M.shape != (sizes[i], sizes[j]):
            raise InvalidArgumentError(
                f"block ({i},{j}) has shape {M.shape}, expected {(sizes[i], sizes[j])}")
        term = scale * sp.csr_matrix(M)
        grid[i][j] = term if grid[i][j] is None else grid[i][j] + term
    for i in range(nb):
        if grid[i][i] is None:
            grid[i][i] = sp.csr_matrix((sizes[i], sizes[i]))
    return to_csr(sp.bmat(grid, format="csr"))


def asymmetry(A):
    """Largest |A - A^T| entry relative to the largest |A| entry."""
    scale = abs(A).max()
    if scale == 0:
        return 0.0
    return float(abs(A - A.T).max() / scale)


def cg_solve(A, b, tol=1e-10, maxit=None, jacobi_precondition=True, x0=None,
             symmetry_tol=1e-12):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Raises NotSPDError on a non-symmetric matrix or a non-positive curvature
    direction, and ConvergenceError when ``maxit`` is exhausted.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise InvalidArgumentError(f"bad shapes {A.shape}, {b.shape}")
    if not np.all(np.isfinite(b)):
        raise InvalidArgumentError("right-hand side is not finite")
    if asymmetry(A) > symmetry_tol:
        raise NotSPDError("nonsymmetric variant: use external solver")
    maxit = maxit or max(10 * n, 100)

    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), SolverReport(0, 0.0, True)

    if jacobi_precondition:
        d = A.diagonal()
        if np.any(d <= 0):
            raise NotSPDError("non-positive diagonal entry")
        dinv = 1.0 / d
    else:
        dinv = np.ones(n)

    it = 0
    r = b - A @ x
    # restart from the true residual until it meets the tolerance
    while np.linalg.norm(r) > tol * bnorm and it < maxit:
        z = dinv * r
        p = z.copy()
        rz = r @ z
        while it < maxit:
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0:
                raise NotSPDError(f"non-positive curvature p^T A p = {pAp:.3e} at iteration {it}")
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            it += 1
            if np.linalg.norm(r) <= 0.5 * tol * bnorm:
                break
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - A @ x

    res = float(np.linalg.norm(r) / bnorm)
    report = SolverReport(it, res, res <= tol)
    log.debug("cg: %d iterations, residual %.3e", it, res)
    if not report.converged:
        raise ConvergenceError(f"CG did not converge in {maxit} iterations (residual {res:.3e})",
                               report)
    return x, report
