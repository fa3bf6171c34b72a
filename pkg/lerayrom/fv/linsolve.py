"""Sparse linear solvers used by the full-order stepper and the supremizers.

Matrices that stay fixed for a whole run are factorized once with SuperLU and
solved directly.  Matrices that change every step are solved with Krylov
methods preconditioned by the factorization of a fixed reference matrix.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from lerayrom.exceptions import BlowUpError, SolverError

logger = logging.getLogger(__name__)

__all__ = ["Factorization", "solve_krylov"]


class Factorization:
    """SuperLU factors of a square sparse matrix."""

    def __init__(self, matrix: sparse.spmatrix, label: str = ""):
        self.label = label
        self.shape = matrix.shape
        try:
            self._lu = spla.splu(sparse.csc_matrix(matrix), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(label or "factorization", [], f"{label} matrix is singular: {exc}") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.float64)
        out = self._lu.solve(np.ascontiguousarray(rhs.reshape(rhs.shape[0], -1)))
        if not np.all(np.isfinite(out)):
            raise BlowUpError(self.label or "solution", float("nan"))
        return out.reshape(rhs.shape)

    def as_preconditioner(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self._lu.solve, dtype=np.float64)


def solve_krylov(
    matrix: sparse.spmatrix,
    rhs: np.ndarray,
    x0: np.ndarray | None = None,
    *,
    rtol: float,
    symmetric: bool = False,
    preconditioner: Factorization | None = None,
    label: str = "",
    maxiter: int = 500,
) -> np.ndarray:
    """Column-wise CG (``symmetric``) or BiCGStab solve of ``matrix x = rhs``."""

    rhs = np.asarray(rhs, dtype=np.float64)
    cols = rhs.reshape(rhs.shape[0], -1)
    guess = None if x0 is None else np.asarray(x0, dtype=np.float64).reshape(cols.shape)
    method = spla.cg if symmetric else spla.bicgstab
    precond = preconditioner.as_preconditioner() if preconditioner is not None else None

    out = np.empty_like(cols)
    for j in range(cols.shape[1]):
        b = cols[:, j]
        history: list[float] = []
        b_norm = float(np.linalg.norm(b))

        def record(xk: np.ndarray, b=b) -> None:
            history.append(float(np.linalg.norm(b - matrix @ xk)))

        x, info = method(
            matrix,
            b,
            x0=None if guess is None else guess[:, j],
            rtol=rtol,
            atol=0.0,
            maxiter=maxiter,
            M=precond,
            callback=record,
        )
        if info != 0:
            residual = float(np.linalg.norm(b - matrix @ x))
            history.append(residual)
            if not (residual <= rtol * b_norm * 10.0):
                raise SolverError(f"{label}[{j}]" if cols.shape[1] > 1 else label, history)
            logger.warning("%s solve stopped at residual %.3e (target %.1e)", label, residual / max(b_norm, 1e-300), rtol)
        out[:, j] = x
    if not np.all(np.isfinite(out)):
        raise BlowUpError(label or "solution", float("nan"))
    return out.reshape(rhs.shape)
