import pytest

from microflow.mesh import build_uniform_mesh, build_dof_map

SQUARE = (-1.0, 1.0, -1.0, 1.0)


@pytest.fixture(scope="session")
def mesh4():
    return build_uniform_mesh(4, SQUARE)


@pytest.fixture(scope="session")
def mesh8():
    return build_uniform_mesh(8, SQUARE)


@pytest.fixture(scope="session")
def maps4(mesh4):
    """(velocity, angular, pressure) dof maps on the 4x4 mesh."""
    return (
        build_dof_map(mesh4, 2, 2),
        build_dof_map(mesh4, 2, 1),
        build_dof_map(mesh4, 1, 1),
    )


@pytest.fixture(scope="session")
def maps8(mesh8):
    return (
        build_dof_map(mesh8, 2, 2),
        build_dof_map(mesh8, 2, 1),
        build_dof_map(mesh8, 1, 1),
    )
