"""Reference bases, quadrature and assembly of every form in the scheme.

All assembly exploits the uniform mesh: cells are congruent axis-aligned
squares, so the reference-to-physical map is the same diagonal affine map
everywhere (detJ = h^2/4, d/dx = (2/h) d/dxi).  Translation-invariant forms
share one local matrix across cells; state-dependent forms (convection) are
vectorized over cells with einsum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import DofMap
from .sparsela import cg_solve, SolverError

__all__ = [
    "QuadratureRule",
    "FieldVector",
    "quadrature_rule",
    "tabulate_basis",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_pressure_gradient",
    "assemble_divergence",
    "assemble_curl_scalar_to_vector",
    "assemble_curl_vector_to_scalar",
    "assemble_convection",
    "assemble_load",
    "integral_weights",
    "l2_project",
    "error_norms",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on the reference square [-1,1]^2."""

    points: np.ndarray  # (nq, 2)
    weights: np.ndarray  # (nq,)
    degree: int  # exact for tensor polynomials up to this degree per coordinate


def quadrature_rule(poly_degree: int) -> QuadratureRule:
    """Smallest tensor Gauss-Legendre rule exact to ``poly_degree`` per axis."""
    if poly_degree < 0:
        raise ValueError(f"polynomial degree must be >= 0, got {poly_degree}")
    npts = poly_degree // 2 + 1
    xi, wi = np.polynomial.legendre.leggauss(npts)
    X, Y = np.meshgrid(xi, xi, indexing="xy")
    WX, WY = np.meshgrid(wi, wi, indexing="xy")
    points = np.column_stack((X.ravel(), Y.ravel()))
    weights = (WX * WY).ravel()
    return QuadratureRule(points=points, weights=weights, degree=2 * npts - 1)


def _lagrange_1d(order: int, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the 1D Lagrange basis on [-1, 1]."""
    xi = np.asarray(xi, dtype=float)
    if order == 1:
        vals = np.stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0])
        ders = np.stack([np.full_like(xi, -0.5), np.full_like(xi, 0.5)])
    elif order == 2:
        vals = np.stack([xi * (xi - 1.0) / 2.0, 1.0 - xi * xi, xi * (xi + 1.0) / 2.0])
        ders = np.stack([xi - 0.5, -2.0 * xi, xi + 0.5])
    else:
        raise ValueError(f"unsupported polynomial order {order}")
    return vals, ders


def tabulate_basis(order: int, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate the tensor-product basis at reference points.

    Returns ``(phi, dphi)`` with shapes (nq, nloc) and (nq, nloc, 2); local
    numbering runs x fastest, matching the dof lattice of :class:`DofMap`.
    """
    lx, dlx = _lagrange_1d(order, points[:, 0])
    ly, dly = _lagrange_1d(order, points[:, 1])
    nq = points.shape[0]
    nloc = (order + 1) ** 2
    phi = np.empty((nq, nloc))
    dphi = np.empty((nq, nloc, 2))
    for jj in range(order + 1):
        for ii in range(order + 1):
            a = jj * (order + 1) + ii
            phi[:, a] = ly[jj] * lx[ii]
            dphi[:, a, 0] = ly[jj] * dlx[ii]
            dphi[:, a, 1] = dly[jj] * lx[ii]
    return phi, dphi


@dataclass
class FieldVector:
    """Coefficient vector of a discrete field on a :class:`DofMap`."""

    values: np.ndarray
    dofmap: DofMap

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.dofmap.num_dofs,):
            raise ValueError(
                f"coefficient length {self.values.shape} does not match "
                f"dof count {self.dofmap.num_dofs}"
            )

    def copy(self) -> "FieldVector":
        return FieldVector(self.values.copy(), self.dofmap)

    def component(self, c: int) -> np.ndarray:
        ns = self.dofmap.num_scalar_dofs
        return self.values[c * ns : (c + 1) * ns]


# ---------------------------------------------------------------------------
# assembly helpers
# ---------------------------------------------------------------------------


def _default_degree(*orders: int) -> int:
    return 2 * max(orders) + 2


def _geometry(dofmap: DofMap, degree: int):
    """Quadrature rule and scaled basis tables shared by the assembly loops."""
    rule = quadrature_rule(degree)
    h = dofmap.mesh.h
    wdet = rule.weights * (h * h / 4.0)
    phi, dphi = tabulate_basis(dofmap.order, rule.points)
    dphi = dphi * (2.0 / h)  # reference to physical gradient
    return rule, wdet, phi, dphi


def _scatter(rows: np.ndarray, cols: np.ndarray, local: np.ndarray, shape) -> sp.csr_matrix:
    """Scatter per-cell local blocks into a CSR matrix.

    ``rows``/``cols`` have shape (ncells, nr)/(ncells, nc); ``local`` is either
    a shared (nr, nc) block or per-cell (ncells, nr, nc).
    """
    ncells, nr = rows.shape
    nc = cols.shape[1]
    if local.ndim == 2:
        data = np.broadcast_to(local, (ncells, nr, nc))
    else:
        data = local
    i = np.broadcast_to(rows[:, :, None], (ncells, nr, nc))
    j = np.broadcast_to(cols[:, None, :], (ncells, nr, nc))
    mat = sp.coo_matrix((data.ravel(), (i.ravel(), j.ravel())), shape=shape).tocsr()
    mat.sort_indices()
    return mat


def _block_diag2(mat: sp.csr_matrix) -> sp.csr_matrix:
    out = sp.block_diag((mat, mat), format="csr")
    out.sort_indices()
    return out


# ---------------------------------------------------------------------------
# bilinear forms
# ---------------------------------------------------------------------------


def assemble_mass(dofmap: DofMap, quad_degree: int | None = None) -> sp.csr_matrix:
    """Mass matrix M with M_ij = <phi_j, phi_i>."""
    degree = quad_degree or _default_degree(dofmap.order)
    _, wdet, phi, _ = _geometry(dofmap, degree)
    local = np.einsum("q,qi,qj->ij", wdet, phi, phi)
    cells = dofmap.scalar_cell_dofs
    ns = dofmap.num_scalar_dofs
    mat = _scatter(cells, cells, local, (ns, ns))
    return _block_diag2(mat) if dofmap.components == 2 else mat


def assemble_stiffness(dofmap: DofMap, quad_degree: int | None = None) -> sp.csr_matrix:
    """Stiffness matrix A with A_ij = <grad phi_j, grad phi_i>."""
    degree = quad_degree or _default_degree(dofmap.order)
    _, wdet, _, dphi = _geometry(dofmap, degree)
    local = np.einsum("q,qid,qjd->ij", wdet, dphi, dphi)
    cells = dofmap.scalar_cell_dofs
    ns = dofmap.num_scalar_dofs
    mat = _scatter(cells, cells, local, (ns, ns))
    return _block_diag2(mat) if dofmap.components == 2 else mat


def assemble_pressure_gradient(
    vel_dofmap: DofMap, pres_dofmap: DofMap, quad_degree: int | None = None
) -> sp.csr_matrix:
    """G with (G p)_i = <grad p_h, phi_i> on the vector velocity space."""
    if vel_dofmap.components != 2:
        raise ValueError("velocity space must have two components")
    degree = quad_degree or _default_degree(vel_dofmap.order, pres_dofmap.order)
    _, wdet, phi_v, _ = _geometry(vel_dofmap, degree)
    rule = quadrature_rule(degree)
    _, dpsi = tabulate_basis(pres_dofmap.order, rule.points)
    dpsi = dpsi * (2.0 / pres_dofmap.mesh.h)

    vcells = vel_dofmap.scalar_cell_dofs
    pcells = pres_dofmap.scalar_cell_dofs
    nsv = vel_dofmap.num_scalar_dofs
    shape = (vel_dofmap.num_dofs, pres_dofmap.num_dofs)

    blocks = []
    for c in range(2):
        local = np.einsum("q,qi,qj->ij", wdet, phi_v, dpsi[:, :, c])
        blocks.append(_scatter(vcells + c * nsv, pcells, local, shape))
    return (blocks[0] + blocks[1]).tocsr()


def assemble_divergence(
    vel_dofmap: DofMap, pres_dofmap: DofMap, quad_degree: int | None = None
) -> sp.csr_matrix:
    """B with (B u)_q = <psi_q, div u_h>."""
    if vel_dofmap.components != 2:
        raise ValueError("velocity space must have two components")
    degree = quad_degree or _default_degree(vel_dofmap.order, pres_dofmap.order)
    _, wdet, _, dphi_v = _geometry(vel_dofmap, degree)
    rule = quadrature_rule(degree)
    psi, _ = tabulate_basis(pres_dofmap.order, rule.points)

    vcells = vel_dofmap.scalar_cell_dofs
    pcells = pres_dofmap.scalar_cell_dofs
    nsv = vel_dofmap.num_scalar_dofs
    shape = (pres_dofmap.num_dofs, vel_dofmap.num_dofs)

    blocks = []
    for c in range(2):
        local = np.einsum("q,qi,qj->ij", wdet, psi, dphi_v[:, :, c])
        blocks.append(_scatter(pcells, vcells + c * nsv, local, shape))
    return (blocks[0] + blocks[1]).tocsr()


def assemble_curl_scalar_to_vector(
    vel_dofmap: DofMap, ang_dofmap: DofMap, quad_degree: int | None = None
) -> sp.csr_matrix:
    """R with (R w)_i = <rot w_h, phi_i>, rot w = (dw/dy, -dw/dx)."""
    if vel_dofmap.components != 2 or ang_dofmap.components != 1:
        raise ValueError("expected vector velocity and scalar angular spaces")
    degree = quad_degree or _default_degree(vel_dofmap.order, ang_dofmap.order)
    _, wdet, phi_v, _ = _geometry(vel_dofmap, degree)
    rule = quadrature_rule(degree)
    _, dpsi = tabulate_basis(ang_dofmap.order, rule.points)
    dpsi = dpsi * (2.0 / ang_dofmap.mesh.h)

    vcells = vel_dofmap.scalar_cell_dofs
    acells = ang_dofmap.scalar_cell_dofs
    nsv = vel_dofmap.num_scalar_dofs
    shape = (vel_dofmap.num_dofs, ang_dofmap.num_dofs)

    loc0 = np.einsum("q,qi,qj->ij", wdet, phi_v, dpsi[:, :, 1])
    loc1 = -np.einsum("q,qi,qj->ij", wdet, phi_v, dpsi[:, :, 0])
    b0 = _scatter(vcells, acells, loc0, shape)
    b1 = _scatter(vcells + nsv, acells, loc1, shape)
    return (b0 + b1).tocsr()


def assemble_curl_vector_to_scalar(
    ang_dofmap: DofMap, vel_dofmap: DofMap, quad_degree: int | None = None
) -> sp.csr_matrix:
    """C with (C u)_q = <rot u_h, psi_q>, rot u = du2/dx - du1/dy."""
    if vel_dofmap.components != 2 or ang_dofmap.components != 1:
        raise ValueError("expected vector velocity and scalar angular spaces")
    degree = quad_degree or _default_degree(vel_dofmap.order, ang_dofmap.order)
    _, wdet, psi_a, _ = _geometry(ang_dofmap, degree)
    rule = quadrature_rule(degree)
    _, dphi_v = tabulate_basis(vel_dofmap.order, rule.points)
    dphi_v = dphi_v * (2.0 / vel_dofmap.mesh.h)

    vcells = vel_dofmap.scalar_cell_dofs
    acells = ang_dofmap.scalar_cell_dofs
    nsv = vel_dofmap.num_scalar_dofs
    shape = (ang_dofmap.num_dofs, vel_dofmap.num_dofs)

    loc0 = -np.einsum("q,qi,qj->ij", wdet, psi_a, dphi_v[:, :, 1])
    loc1 = np.einsum("q,qi,qj->ij", wdet, psi_a, dphi_v[:, :, 0])
    b0 = _scatter(acells, vcells, loc0, shape)
    b1 = _scatter(acells, vcells + nsv, loc1, shape)
    return (b0 + b1).tocsr()


def assemble_convection(
    u: FieldVector, trial_dofmap: DofMap, quad_degree: int | None = None
) -> sp.csr_matrix:
    """Skew-symmetrized convection N(u) with z^T N(u) v = b_h(u, v, z).

    b_h(u, v, z) = <(u.grad v), z> + 1/2 <(div u) v, z>; trial and test space
    coincide (vector velocity or scalar angular).  The default quadrature is
    exact for the full integrand, which makes b_h(u, v, v) = 0 hold to
    roundoff for fields vanishing on the boundary.
    """
    vel_dofmap = u.dofmap
    if vel_dofmap.components != 2:
        raise ValueError("convecting field must live on the vector velocity space")
    if trial_dofmap.mesh is not vel_dofmap.mesh:
        raise ValueError("trial space and convecting field use different meshes")
    degree = quad_degree or _default_degree(vel_dofmap.order, trial_dofmap.order)

    rule = quadrature_rule(degree)
    h = vel_dofmap.mesh.h
    wdet = rule.weights * (h * h / 4.0)
    phi_v, dphi_v = tabulate_basis(vel_dofmap.order, rule.points)
    dphi_v = dphi_v * (2.0 / h)

    vcells = vel_dofmap.scalar_cell_dofs
    u1 = u.component(0)[vcells]  # (ncells, nloc)
    u2 = u.component(1)[vcells]
    u1q = u1 @ phi_v.T  # (ncells, nq)
    u2q = u2 @ phi_v.T
    divq = u1 @ dphi_v[:, :, 0].T + u2 @ dphi_v[:, :, 1].T

    if trial_dofmap.order == vel_dofmap.order:
        phi_t, dphi_t = phi_v, dphi_v
    else:
        phi_t, dphi_t = tabulate_basis(trial_dofmap.order, rule.points)
        dphi_t = dphi_t * (2.0 / h)

    conv = (
        u1q[:, :, None] * dphi_t[None, :, :, 0]
        + u2q[:, :, None] * dphi_t[None, :, :, 1]
        + 0.5 * divq[:, :, None] * phi_t[None, :, :]
    )
    local = np.einsum("q,qi,cqj->cij", wdet, phi_t, conv)

    tcells = trial_dofmap.scalar_cell_dofs
    ns = trial_dofmap.num_scalar_dofs
    mat = _scatter(tcells, tcells, local, (ns, ns))
    return _block_diag2(mat) if trial_dofmap.components == 2 else mat


# ---------------------------------------------------------------------------
# functionals, projection, norms
# ---------------------------------------------------------------------------


def _quad_coords(dofmap: DofMap, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadrature coordinates, two (ncells, nq) arrays."""
    h = dofmap.mesh.h
    origins = dofmap.mesh.cell_origins()
    xq = origins[:, 0:1] + (rule.points[:, 0] + 1.0) * (h / 2.0)
    yq = origins[:, 1:2] + (rule.points[:, 1] + 1.0) * (h / 2.0)
    return xq, yq


def assemble_load(
    dofmap: DofMap, func: Callable, quad_degree: int | None = None
) -> np.ndarray:
    """Load vector b_i = <f, phi_i>.

    ``func(x, y)`` must be vectorized; for a two-component space it returns an
    array of shape (2,) + x.shape, for a scalar space an array of x.shape.
    """
    degree = quad_degree or _default_degree(dofmap.order)
    rule, wdet, phi, _ = _geometry(dofmap, degree)
    xq, yq = _quad_coords(dofmap, rule)
    fvals = np.asarray(func(xq, yq), dtype=float)

    out = np.zeros(dofmap.num_dofs)
    cells = dofmap.scalar_cell_dofs
    ns = dofmap.num_scalar_dofs
    if dofmap.components == 1:
        if fvals.shape != xq.shape:
            raise ValueError("scalar load function returned wrong shape")
        comps = [fvals]
    else:
        if fvals.shape != (2,) + xq.shape:
            raise ValueError("vector load function returned wrong shape")
        comps = [fvals[0], fvals[1]]
    for c, fc in enumerate(comps):
        local = np.einsum("q,qi,cq->ci", wdet, phi, fc)
        np.add.at(out, cells + c * ns, local)
    return out


def integral_weights(dofmap: DofMap) -> np.ndarray:
    """Vector of basis integrals, so weights @ coeffs = integral of the field.

    For vector maps the weights act componentwise (the result is the integral
    of the sum of components).
    """
    if dofmap.components == 1:
        return assemble_load(dofmap, lambda x, y: np.ones_like(x))
    return assemble_load(dofmap, lambda x, y: np.ones((2,) + x.shape))


def l2_project(func: Callable, dofmap: DofMap, tol: float = 1e-12) -> FieldVector:
    """L2 projection of ``func`` onto the discrete space."""
    mass = assemble_mass(dofmap)
    load = assemble_load(dofmap, func)
    coeffs, report = cg_solve(mass, load, tol=tol)
    if not report.converged:
        raise SolverError(f"mass solve failed in L2 projection: {report}")
    return FieldVector(coeffs, dofmap)


def error_norms(
    field: FieldVector,
    exact: Callable,
    exact_grad: Callable,
    quad_degree: int | None = None,
) -> tuple[float, float]:
    """L2 and H1-seminorm errors of ``field`` against an exact solution.

    ``exact(x, y)`` returns (2,)+shape for vector fields, shape for scalar;
    ``exact_grad(x, y)`` returns (2, 2)+shape resp. (2,)+shape with the last
    derivative index ordered (d/dx, d/dy).
    """
    dofmap = field.dofmap
    degree = quad_degree or _default_degree(dofmap.order)
    rule, wdet, phi, dphi = _geometry(dofmap, degree)
    xq, yq = _quad_coords(dofmap, rule)

    ex = np.asarray(exact(xq, yq), dtype=float)
    gex = np.asarray(exact_grad(xq, yq), dtype=float)
    if dofmap.components == 1:
        ex = ex[None]
        gex = gex[None]

    cells = dofmap.scalar_cell_dofs
    err2_l2 = 0.0
    err2_h1 = 0.0
    for c in range(dofmap.components):
        coeffs = field.component(c)[cells]  # (ncells, nloc)
        vals = coeffs @ phi.T
        dx = coeffs @ dphi[:, :, 0].T
        dy = coeffs @ dphi[:, :, 1].T
        err2_l2 += np.einsum("q,cq->", wdet, (vals - ex[c]) ** 2)
        err2_h1 += np.einsum("q,cq->", wdet, (dx - gex[c, 0]) ** 2)
        err2_h1 += np.einsum("q,cq->", wdet, (dy - gex[c, 1]) ** 2)
    return float(np.sqrt(err2_l2)), float(np.sqrt(err2_h1))
