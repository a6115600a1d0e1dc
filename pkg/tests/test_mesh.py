import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microflow.mesh import build_uniform_mesh, build_dof_map

SQUARE = (-1.0, 1.0, -1.0, 1.0)


def test_full_scale_dof_counts():
    mesh = build_uniform_mesh(256, SQUARE)
    assert mesh.num_cells == 65536
    assert build_dof_map(mesh, 2, 1).num_dofs == 263169
    assert build_dof_map(mesh, 2, 2).num_dofs == 526338
    assert build_dof_map(mesh, 1, 1).num_dofs == 66049


def test_single_cell():
    mesh = build_uniform_mesh(1, (0.0, 1.0, 0.0, 1.0))
    assert mesh.num_cells == 1
    assert mesh.num_vertices == 4
    assert np.allclose(sorted(map(tuple, mesh.vertices)),
                       [(0, 0), (0, 1), (1, 0), (1, 1)])


def test_small_mesh_counts(mesh4):
    assert mesh4.num_cells == 16
    assert mesh4.num_vertices == 25
    assert mesh4.h == 0.5


def test_invalid_inputs():
    with pytest.raises(ValueError):
        build_uniform_mesh(0, SQUARE)
    with pytest.raises(ValueError):
        build_uniform_mesh(4, (0.0, 0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        build_uniform_mesh(4, (0.0, 2.0, 0.0, 1.0))  # non-square cells
    mesh = build_uniform_mesh(2, SQUARE)
    with pytest.raises(ValueError):
        build_dof_map(mesh, 3, 1)
    with pytest.raises(ValueError):
        build_dof_map(mesh, 2, 3)


def test_cells_tile_domain(mesh4):
    # shoelace area of every (counterclockwise) cell; the sum tiles the square
    areas = []
    for cell in mesh4.cells:
        pts = mesh4.vertices[cell]
        x, y = pts[:, 0], pts[:, 1]
        areas.append(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    areas = np.array(areas)
    assert np.all(areas > 0)
    assert np.allclose(areas, mesh4.h**2)
    assert np.isclose(areas.sum(), mesh4.area)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(min_value=1, max_value=12), order=st.integers(min_value=1, max_value=2))
def test_dof_count_invariants(n, order):
    mesh = build_uniform_mesh(n, SQUARE)
    dofmap = build_dof_map(mesh, order, 1)
    assert dofmap.num_dofs == (order * n + 1) ** 2
    assert len(dofmap.boundary_dofs) == 4 * order * n


def test_boundary_dofs_match_support_points(maps4):
    x0, x1, y0, y1 = SQUARE
    for dofmap in maps4:
        on_bd = np.zeros(dofmap.num_dofs, dtype=bool)
        on_bd[dofmap.boundary_dofs] = True
        coords = dofmap.coords
        geom = (
            np.isclose(coords[:, 0], x0)
            | np.isclose(coords[:, 0], x1)
            | np.isclose(coords[:, 1], y0)
            | np.isclose(coords[:, 1], y1)
        )
        assert np.array_equal(on_bd, geom)


def test_vector_layout_is_component_blocked(maps4):
    vel, ang, _ = maps4
    ns = vel.num_scalar_dofs
    assert ns == ang.num_dofs
    nloc = vel.num_local_scalar
    assert np.array_equal(vel.cell_dofs[:, nloc:], vel.cell_dofs[:, :nloc] + ns)
    assert np.array_equal(vel.scalar_cell_dofs, ang.cell_dofs)
    # support coordinates repeat per component
    assert np.array_equal(vel.coords[:ns], vel.coords[ns:])


def test_cell_dofs_cover_all_dofs(maps8):
    for dofmap in maps8:
        assert set(dofmap.cell_dofs.ravel()) == set(range(dofmap.num_dofs))
