"""Tests for the structured rectangle meshes."""

import numpy as np
import pytest

from fsi_thinwall.mesh import SIGMA_TAGS, BoundaryTag, boundary_edges_by_tag, build_rect_mesh


def test_mesh_counts_and_size():
    """Test vertex, triangle and boundary edge counts of a 4 x 2 mesh."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)

    assert mesh.n_vertices == 15
    assert mesh.n_triangles == 16
    assert len(mesh.boundary_edges) == 12
    assert mesh.h == pytest.approx(0.5)
    assert not mesh.periodic


def test_triangles_are_counterclockwise():
    """Test that every triangle has positive signed area and the areas sum to the rectangle."""
    mesh = build_rect_mesh(3, 5, 1.5, 0.5)
    areas = mesh.signed_areas()

    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(0.75)


def test_boundary_edges_follow_owner_orientation():
    """Test that boundary edges run counterclockwise in their triangle with outward normals."""
    mesh = build_rect_mesh(3, 2, 3.0, 1.0)
    center = np.array([1.5, 0.5])

    for edge in mesh.boundary_edges:
        tri = list(mesh.triangles[edge.triangle])
        a, b = edge.vertices
        k = tri.index(a)
        assert tri[(k + 1) % 3] == b

        tangent = mesh.vertices[b] - mesh.vertices[a]
        rotated = np.array([tangent[1], -tangent[0]]) / np.linalg.norm(tangent)
        assert np.allclose(rotated, edge.normal)
        midpoint = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        assert np.dot(midpoint - center, edge.normal) > 0
        assert edge.length == pytest.approx(np.linalg.norm(tangent))


def test_sigma_tags_cover_top_and_bottom():
    """Test tagging of the interface and side edges."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)

    assert all(tag.is_interface for tag in SIGMA_TAGS)
    assert not BoundaryTag.SIGMA_LEFT.is_interface
    assert mesh.sigma_length() == pytest.approx(4.0)

    top = boundary_edges_by_tag(mesh, BoundaryTag.SIGMA_TOP)
    ys = [mesh.vertices[v, 1] for e in top for v in e.vertices]
    assert np.allclose(ys, 1.0)
    starts = [min(mesh.vertices[v, 0] for v in e.vertices) for e in top]
    assert starts == sorted(starts)

    left = boundary_edges_by_tag(mesh, "sigma_left")
    assert len(left) == 2
    assert all(e.normal == (-1.0, 0.0) for e in left)


def test_periodic_pairs():
    """Test that periodic meshes pair left and right vertices at equal heights."""
    mesh = build_rect_mesh(4, 3, 2.0, 1.0, periodic=True)

    assert mesh.periodic
    assert len(mesh.periodic_pairs) == 4
    for left, right in mesh.periodic_pairs:
        assert mesh.vertices[left, 0] == pytest.approx(0.0)
        assert mesh.vertices[right, 0] == pytest.approx(2.0)
        assert mesh.vertices[left, 1] == pytest.approx(mesh.vertices[right, 1])
    # side edges stay tagged on periodic meshes
    assert len(mesh.edges_by_tag(BoundaryTag.SIGMA_RIGHT)) == 3


def test_vertex_index():
    """Test the lexicographic vertex numbering."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)

    k = mesh.vertex_index(3, 1)
    assert np.allclose(mesh.vertices[k], [1.5, 0.5])


@pytest.mark.parametrize(
    "nx, ny, lx, ly",
    [(0, 1, 1.0, 1.0), (2, -1, 1.0, 1.0), (2, 2, 0.0, 1.0), (1.5, 1, 1.0, 1.0)],
)
def test_invalid_mesh_arguments(nx, ny, lx, ly):
    """Test that invalid cell counts and dimensions are rejected."""
    with pytest.raises(ValueError):
        build_rect_mesh(nx, ny, lx, ly)
