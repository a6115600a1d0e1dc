"""Structured quadrilateral meshes and degree-of-freedom maps.

Meshes are uniform subdivisions of an axis-aligned square into n x n
square cells.  Degree-of-freedom maps describe continuous tensor-product
Lagrange spaces of order 1 or 2 on such a mesh, either scalar or with two
component-blocked vector components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Mesh", "DofMap", "build_uniform_mesh", "build_dof_map"]


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of ``domain = (x0, x1, y0, y1)`` with n x n square cells.

    ``vertices`` has shape ((n+1)**2, 2) in lexicographic order (x fastest),
    ``cells`` has shape (n**2, 4) listing corner vertices counterclockwise
    from the lower-left corner.
    """

    domain: tuple[float, float, float, float]
    n: int
    vertices: np.ndarray
    cells: np.ndarray

    @property
    def h(self) -> float:
        """Cell side length (the domain is square)."""
        x0, x1, _, _ = self.domain
        return (x1 - x0) / self.n

    @property
    def num_cells(self) -> int:
        return self.n * self.n

    @property
    def num_vertices(self) -> int:
        return (self.n + 1) ** 2

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.domain
        return (x1 - x0) * (y1 - y0)

    def cell_origins(self) -> np.ndarray:
        """Lower-left corner of every cell, shape (num_cells, 2)."""
        x0, _, y0, _ = self.domain
        idx = np.arange(self.num_cells)
        cx = idx % self.n
        cy = idx // self.n
        return np.column_stack((x0 + cx * self.h, y0 + cy * self.h))


@dataclass(frozen=True)
class DofMap:
    """Dof numbering for a continuous Q1/Q2 space on a uniform mesh.

    Scalar dofs are numbered lexicographically over the (order*n+1)^2 node
    lattice, x fastest.  Vector maps are component-blocked: the dof of
    component c at scalar node i is ``c * num_scalar_dofs + i``.  Local cell
    numbering matches the lattice (x fastest within a cell), so
    ``cell_dofs[:, :nloc]`` is the scalar connectivity of component 0.
    """

    mesh: Mesh
    order: int
    components: int
    num_dofs: int
    cell_dofs: np.ndarray
    boundary_dofs: np.ndarray
    coords: np.ndarray

    @property
    def num_scalar_dofs(self) -> int:
        return self.num_dofs // self.components

    @property
    def num_local_scalar(self) -> int:
        return (self.order + 1) ** 2

    @property
    def scalar_cell_dofs(self) -> np.ndarray:
        """Connectivity of one scalar component, shape (num_cells, nloc)."""
        return self.cell_dofs[:, : self.num_local_scalar]

    @property
    def scalar_boundary_dofs(self) -> np.ndarray:
        return self.boundary_dofs[self.boundary_dofs < self.num_scalar_dofs]

    def interior_dofs(self) -> np.ndarray:
        """All dofs whose support point lies strictly inside the domain."""
        mask = np.ones(self.num_dofs, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)


def build_uniform_mesh(n: int, domain: tuple[float, float, float, float]) -> Mesh:
    """Build the uniform n x n quadrilateral mesh of a square domain."""
    if n < 1:
        raise ValueError(f"cell count per side must be >= 1, got {n}")
    x0, x1, y0, y1 = (float(v) for v in domain)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"degenerate domain {domain}")
    if not np.isclose(x1 - x0, y1 - y0):
        raise ValueError(
            f"domain {domain} is not square; only square-celled meshes are supported"
        )

    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack((X.ravel(), Y.ravel()))

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ll = (iy * (n + 1) + ix).ravel()
    cells = np.column_stack((ll, ll + 1, ll + n + 2, ll + n + 1))

    return Mesh(domain=(x0, x1, y0, y1), n=n, vertices=vertices, cells=cells)


def build_dof_map(mesh: Mesh, order: int, components: int = 1) -> DofMap:
    """Build the dof map for a continuous Q<order> space on ``mesh``."""
    if order not in (1, 2):
        raise ValueError(f"unsupported polynomial order {order}")
    if components not in (1, 2):
        raise ValueError(f"unsupported component count {components}")

    n = mesh.n
    m = order * n + 1  # lattice points per side
    num_scalar = m * m

    x0, x1, y0, y1 = mesh.domain
    xs = np.linspace(x0, x1, m)
    ys = np.linspace(y0, y1, m)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    scalar_coords = np.column_stack((X.ravel(), Y.ravel()))

    # cell (cx, cy) owns the (order+1)^2 lattice points starting at
    # (order*cx, order*cy), numbered x fastest
    idx = np.arange(mesh.num_cells)
    cx = idx % n
    cy = idx // n
    jj, ii = np.meshgrid(np.arange(order + 1), np.arange(order + 1), indexing="ij")
    local = (jj.ravel()[None, :] + order * cy[:, None]) * m + (
        ii.ravel()[None, :] + order * cx[:, None]
    )
    scalar_cells = local.astype(np.int64)

    lat = np.arange(num_scalar)
    li = lat % m
    lj = lat // m
    on_boundary = (li == 0) | (li == m - 1) | (lj == 0) | (lj == m - 1)
    scalar_bdofs = np.flatnonzero(on_boundary)

    if components == 1:
        cell_dofs = scalar_cells
        boundary = scalar_bdofs
        coords = scalar_coords
    else:
        cell_dofs = np.hstack((scalar_cells, scalar_cells + num_scalar))
        boundary = np.concatenate((scalar_bdofs, scalar_bdofs + num_scalar))
        coords = np.vstack((scalar_coords, scalar_coords))

    return DofMap(
        mesh=mesh,
        order=order,
        components=components,
        num_dofs=components * num_scalar,
        cell_dofs=cell_dofs,
        boundary_dofs=boundary,
        coords=coords,
    )
