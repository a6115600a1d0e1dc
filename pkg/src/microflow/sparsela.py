"""Sparse storage, Krylov solvers and constraint handling.

The CSR container is scipy's ``csr_matrix`` (aliased as :data:`CsrMatrix`);
everything assembled in this package keeps sorted, duplicate-free column
indices.  Solvers are hand-rolled preconditioned CG and restarted GMRES.  A
solve's reported residual is always ||b - A x|| / ||b|| recomputed from
scratch, never the recurrence estimate; for deflated solves of singular
systems it is measured on the complement of the supplied nullspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "CsrMatrix",
    "SolveReport",
    "SolverError",
    "make_preconditioner",
    "cg_solve",
    "gmres_solve",
    "apply_dirichlet",
    "enforce_zero_mean",
]

CsrMatrix = sp.csr_matrix

Preconditioner = Union[None, str, Callable[[np.ndarray], np.ndarray]]


class SolverError(RuntimeError):
    """Raised when a linear solve cannot be completed."""


@dataclass
class SolveReport:
    iterations: int
    residual: float  # true relative residual ||b - A x|| / ||b||
    converged: bool
    message: str = ""


def make_preconditioner(A: sp.csr_matrix, pc: Preconditioner) -> Callable:
    """Turn a preconditioner selector into an ``r -> z`` callable.

    ``pc`` may be None (identity), "jacobi" (diagonal scaling, the default
    everywhere), "ilu" (incomplete LU via scipy's spilu) or an arbitrary
    callable applying an approximate inverse.
    """
    if pc is None:
        return lambda r: r
    if callable(pc):
        return pc
    if pc == "jacobi":
        diag = A.diagonal().copy()
        diag[diag == 0.0] = 1.0
        inv = 1.0 / diag
        return lambda r: r * inv
    if pc == "ilu":
        # fill must grow with resolution or the factor quality collapses;
        # 20x keeps Krylov counts in the single digits up to 256^2 cells
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
        return ilu.solve
    raise ValueError(f"unknown preconditioner {pc!r}")


def _make_projector(nullspace: np.ndarray | None) -> Callable:
    """Projector onto the orthogonal complement of the given nullspace basis."""
    if nullspace is None:
        return lambda v: v
    basis = np.atleast_2d(np.asarray(nullspace, dtype=float))
    if basis.shape[0] > basis.shape[1]:
        basis = basis.T
    # orthonormalize rows
    q, _ = np.linalg.qr(basis.T)
    qt = q.T

    def project(v: np.ndarray) -> np.ndarray:
        return v - qt.T @ (qt @ v)

    return project


def cg_solve(
    A: sp.csr_matrix,
    b: np.ndarray,
    tol: float = 1e-10,
    maxit: int | None = None,
    pc: Preconditioner = "jacobi",
    nullspace: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients for SPD systems.

    ``nullspace`` deflates a known kernel (e.g. constants of a pure Neumann
    Laplacian): the right-hand side and every preconditioned residual are
    projected onto the orthogonal complement each iteration, and residuals
    (including the recomputed one in the report) are measured on that
    complement -- the data's inconsistent component is orthogonal to the
    range of A and no iterate can reduce it.
    """
    n = b.shape[0]
    if maxit is None:
        maxit = max(1000, 2 * n)
    apply_pc = make_preconditioner(A, pc)
    project = _make_projector(nullspace)

    b_work = project(np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(b_work)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)

    x = np.zeros(n)
    r = b_work.copy()
    z = project(apply_pc(r))
    p = z.copy()
    rz = float(r @ z)
    iterations = 0
    message = ""
    while iterations < maxit:
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0 or not np.isfinite(pAp):
            message = f"breakdown: p^T A p = {pAp:.3e} at iteration {iterations}"
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        iterations += 1
        if np.linalg.norm(r) <= tol * bnorm:
            true_r = project(b_work - A @ x)
            if np.linalg.norm(true_r) <= tol * bnorm:
                break
            # refresh the residual and restart the search direction
            r = true_r
            z = project(apply_pc(r))
            p = z.copy()
            rz = float(r @ z)
            continue
        z = project(apply_pc(r))
        rz_next = float(r @ z)
        beta = rz_next / rz
        p = z + beta * p
        rz = rz_next

    residual = float(np.linalg.norm(project(b_work - A @ x)) / bnorm)
    converged = residual <= tol
    if not converged and not message:
        message = f"no convergence in {iterations} iterations"
    return x, SolveReport(iterations, residual, converged, message)


def gmres_solve(
    A: sp.csr_matrix,
    b: np.ndarray,
    tol: float = 1e-10,
    maxit: int | None = None,
    restart: int = 60,
    pc: Preconditioner = "jacobi",
    nullspace: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Right-preconditioned restarted GMRES.

    Right preconditioning keeps the recurrence residual equal to the true
    residual; the final report recomputes it from scratch regardless.
    """
    n = b.shape[0]
    if maxit is None:
        maxit = max(1000, n)
    apply_pc = make_preconditioner(A, pc)
    project = _make_projector(nullspace)

    b_work = project(np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(b_work)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)

    x = np.zeros(n)
    iterations = 0
    message = ""
    prev_res = np.inf
    while iterations < maxit:
        r = project(b_work - A @ x)
        beta = np.linalg.norm(r)
        if beta <= tol * bnorm:
            break
        if beta >= prev_res * (1.0 - 1e-14):
            message = f"stagnation at residual {beta / bnorm:.3e}"
            break
        prev_res = beta

        m = min(restart, maxit - iterations)
        V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[0] = r / beta
        g[0] = beta

        k = 0
        for j in range(m):
            w = A @ project(apply_pc(V[j]))
            for i in range(j + 1):
                H[i, j] = float(w @ V[i])
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)

            # apply stored Givens rotations, then create a new one
            for i in range(j):
                hi = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = hi
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                k = j
                break
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            k = j + 1
            iterations += 1
            lucky = H[j + 1, j] == 0.0
            if not lucky:
                V[j + 1] = w / H[j + 1, j]
            if abs(g[j + 1]) <= tol * bnorm or lucky:
                break

        if k > 0:
            y = np.zeros(k)
            for i in range(k - 1, -1, -1):
                y[i] = (g[i] - H[i, i + 1 : k] @ y[i + 1 : k]) / H[i, i]
            x = x + project(apply_pc(V[:k].T @ y))
        else:
            message = "Arnoldi breakdown with no progress"
            break

    residual = float(np.linalg.norm(project(b_work - A @ x)) / bnorm)
    converged = residual <= tol
    if not converged and not message:
        message = f"no convergence in {iterations} iterations"
    return x, SolveReport(iterations, residual, converged, message)


def apply_dirichlet(
    A: sp.csr_matrix,
    b: np.ndarray,
    boundary_dofs: np.ndarray,
    values: np.ndarray | float = 0.0,
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Eliminate Dirichlet constraints symmetrically.

    Constrained rows and columns are zeroed, the diagonal is set to one and
    the right-hand side carries the boundary values, so the solution of the
    returned system reproduces the constraints exactly while the interior
    block keeps symmetry.  Inputs are left untouched.
    """
    n = A.shape[0]
    bd = np.asarray(boundary_dofs, dtype=int)
    if bd.size and (bd.min() < 0 or bd.max() >= n):
        raise IndexError("boundary dof index out of range")
    vals = np.broadcast_to(np.asarray(values, dtype=float), bd.shape)

    lift = np.zeros(n)
    lift[bd] = vals
    b2 = b - A @ lift
    b2[bd] = vals

    A2 = A.copy().tocsr()
    is_bd = np.zeros(n, dtype=bool)
    is_bd[bd] = True
    row_of = np.repeat(np.arange(n), np.diff(A2.indptr))
    A2.data[is_bd[row_of] | is_bd[A2.indices]] = 0.0
    A2 = (A2 + sp.csr_matrix((np.ones(bd.size), (bd, bd)), shape=A.shape)).tocsr()
    A2.eliminate_zeros()
    A2.sort_indices()
    return A2, b2


def enforce_zero_mean(p, pres_dofmap):
    """Shift a pressure field to have vanishing mean (quadrature-exact)."""
    from .femops import FieldVector, integral_weights

    weights = integral_weights(pres_dofmap)
    area = float(weights.sum())
    mean = float(weights @ p.values) / area
    return FieldVector(p.values - mean, pres_dofmap)
