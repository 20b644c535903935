"""Shared fixtures: small meshes and operator sets."""

import pytest

from fsi_thinwall.forms import assemble_operators
from fsi_thinwall.mesh import BoundaryTag, build_rect_mesh
from fsi_thinwall.scheme import PhysicalParams

SIDES = (BoundaryTag.SIGMA_LEFT, BoundaryTag.SIGMA_RIGHT)


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def unit_square():
    """Two triangles on the unit square."""
    return build_rect_mesh(1, 1, 1.0, 1.0)


@pytest.fixture
def th_periodic():
    mesh = build_rect_mesh(4, 2, 2.0, 1.0, periodic=True)
    return assemble_operators(mesh, "th", 1.0, 1.0, 1.0)


@pytest.fixture
def th_dirichlet():
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)
    return assemble_operators(mesh, "th", 1.0, 1.0, 1.0, dirichlet_tags=SIDES)


@pytest.fixture
def mini_dirichlet():
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)
    return assemble_operators(mesh, "mini", 1.0, 1.0, 1.0, dirichlet_tags=SIDES)
