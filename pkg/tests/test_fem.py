"""Tests for quadrature, reference elements and finite element spaces."""

import math

import numpy as np
import pytest

from fsi_thinwall.fem import (
    ElementKind,
    build_space,
    build_trace_space,
    eval_basis,
    gauss_edge_rule,
    quad_rule,
)
from fsi_thinwall.mesh import SIGMA_TAGS, BoundaryTag, build_rect_mesh
from fsi_thinwall.norms import l2_error


@pytest.mark.parametrize("degree", [1, 2, 4, 7, 10, 15])
def test_triangle_rule_exactness(degree):
    """Test that triangle rules integrate monomials up to their degree exactly."""
    rule = quad_rule("triangle", degree)
    x, y = rule.points[:, 0], rule.points[:, 1]

    assert rule.weights.sum() == pytest.approx(0.5)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert rule.weights @ (x**a * y**b) == pytest.approx(exact, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("n_points", [1, 3, 5])
def test_edge_rule_exactness(n_points):
    """Test that n-point Gauss rules on [0, 1] are exact up to degree 2n - 1."""
    rule = gauss_edge_rule(n_points)

    assert rule.degree == 2 * n_points - 1
    for k in range(2 * n_points):
        assert rule.weights @ rule.points**k == pytest.approx(1.0 / (k + 1), rel=1e-12)


def test_quad_rule_rejects_unsupported_requests():
    """Test errors for unknown domains and degrees."""
    with pytest.raises(ValueError, match="Unknown quadrature domain"):
        quad_rule("square", 2)
    with pytest.raises(ValueError, match="Unsupported"):
        quad_rule("triangle", 16)
    with pytest.raises(ValueError):
        quad_rule("edge", 0)
    with pytest.raises(ValueError):
        gauss_edge_rule(0)
    with pytest.raises(ValueError, match="Barycentric"):
        quad_rule("edge", 3).barycentric()


@pytest.mark.parametrize("kind", [ElementKind.P1, ElementKind.P2])
def test_lagrange_partition_of_unity(kind):
    """Test that Lagrange basis values sum to one and gradients to zero."""
    bary = quad_rule("triangle", 5).barycentric()
    values, grads = eval_basis(kind, bary)

    assert np.allclose(values.sum(axis=1), 1.0)
    assert np.allclose(grads.sum(axis=1), 0.0)


def test_p2_basis_is_nodal():
    """Test the Kronecker property at vertices and at midpoints of the opposite edges."""
    nodes = np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ]
    )
    values, _ = eval_basis(ElementKind.P2, nodes)

    assert np.allclose(values, np.eye(6))


def test_bubble_vanishes_on_edges():
    """Test that the cubic bubble is zero on the boundary and one at the barycenter."""
    on_edges = np.array([[0.0, 0.3, 0.7], [0.6, 0.0, 0.4], [0.25, 0.75, 0.0]])
    values, _ = eval_basis(ElementKind.P1_BUBBLE, on_edges)
    assert np.allclose(values[:, 3], 0.0)

    center, _ = eval_basis(ElementKind.P1_BUBBLE, np.full(3, 1.0 / 3.0))
    assert center[0, 3] == pytest.approx(1.0)


def test_element_degrees():
    """Test polynomial and approximation degrees of the families."""
    assert ElementKind.P2.degree == 2
    assert ElementKind.P1_BUBBLE.degree == 3
    assert ElementKind.P1_BUBBLE.order == 1
    assert ElementKind("P1Bubble").dofs_per_cell == 4


def test_space_node_counts():
    """Test node counts with and without periodic identification."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)
    periodic = build_rect_mesh(4, 2, 2.0, 1.0, periodic=True)

    assert build_space(mesh, ElementKind.P1, 1).n_nodes == 15
    assert build_space(periodic, ElementKind.P1, 1).n_nodes == 12
    assert build_space(mesh, ElementKind.P2, 2).n_nodes == 45
    assert build_space(periodic, ElementKind.P2, 2).n_nodes == 40
    assert build_space(mesh, ElementKind.P1_BUBBLE, 2).n_dofs == 2 * (15 + 16)


def test_periodic_nodes_take_left_representative():
    """Test that identified nodes sit on the left side and share values."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0, periodic=True)
    V = build_space(mesh, ElementKind.P2, 1)

    assert np.all(V.node_coords[:, 0] < 2.0 - 1e-12)
    for left, right in mesh.periodic_pairs:
        assert V.vertex_node[left] == V.vertex_node[right]


def test_dirichlet_nodes_on_sides():
    """Test the constrained node set of a P2 space with side constraints."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)
    V = build_space(mesh, ElementKind.P2, 2, (BoundaryTag.SIGMA_LEFT, BoundaryTag.SIGMA_RIGHT))

    assert V.constrained_nodes.size == 10
    assert V.constrained_dofs.size == 20
    xs = V.node_coords[V.constrained_nodes, 0]
    assert np.all(np.isclose(xs, 0.0) | np.isclose(xs, 2.0))
    assert V.free_dofs.size == V.n_dofs - 20


def test_space_rejects_invalid_constraints():
    """Test that Sigma constraints, periodic constraints and scalar bubbles are refused."""
    mesh = build_rect_mesh(2, 1, 1.0, 1.0)
    periodic = build_rect_mesh(2, 1, 1.0, 1.0, periodic=True)

    with pytest.raises(ValueError, match="Sigma"):
        build_space(mesh, ElementKind.P2, 2, (BoundaryTag.SIGMA_TOP,))
    with pytest.raises(ValueError, match="Periodic"):
        build_space(periodic, ElementKind.P2, 2, (BoundaryTag.SIGMA_LEFT,))
    with pytest.raises(ValueError, match="P1Bubble"):
        build_space(mesh, ElementKind.P1_BUBBLE, 1)


def test_p2_interpolation_reproduces_quadratics():
    """Test that P2 interpolation is exact for quadratic fields."""
    mesh = build_rect_mesh(3, 2, 1.5, 1.0)
    V = build_space(mesh, ElementKind.P2, 2)

    def f(x, y):
        return np.stack([1.0 + x * y - 2.0 * y**2, x**2 - 3.0 * x + y])

    coeffs = V.interpolate(f)
    pts = np.random.default_rng(3).uniform([0.0, 0.0], [1.5, 1.0], size=(40, 2))
    assert np.allclose(V.evaluate_at(coeffs, pts), f(pts[:, 0], pts[:, 1]))
    assert l2_error(V, coeffs, f) < 1e-12


def test_p2_interpolation_error_is_third_order():
    """Test that halving h divides the L2 interpolation error of sin(2 pi x) by about 8."""

    def f(x, y):
        return np.sin(2 * np.pi * x)

    errors = []
    for nx, ny in ((16, 8), (32, 16)):
        Q = build_space(build_rect_mesh(nx, ny, 2.0, 1.0), ElementKind.P2, 1)
        errors.append(l2_error(Q, Q.interpolate(f), f))

    assert errors[0] / errors[1] == pytest.approx(8.0, abs=0.6)


def test_bubble_interpolation_reproduces_linears():
    """Test that the enriched interpolant of a linear field has zero bubble coefficients."""
    mesh = build_rect_mesh(2, 2, 1.0, 1.0)
    V = build_space(mesh, ElementKind.P1_BUBBLE, 2)

    coeffs = V.split(V.interpolate(lambda x, y: np.stack([2.0 * x - y, 1.0 + y])))
    bubbles = V.cell_nodes[:, 3]
    assert np.allclose(coeffs[:, bubbles], 0.0)


def test_cell_and_edge_tabulation_weights():
    """Test that tabulated weights integrate the area and the Sigma length."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)
    V = build_space(mesh, ElementKind.P2, 2)

    assert V.tabulate_cells(4).weights.sum() == pytest.approx(2.0)
    tab = V.tabulate_edges(SIGMA_TAGS, 3)
    assert tab.weights.sum() == pytest.approx(4.0)
    assert tab.values.shape == (8 * 3, V.n_nodes)
    assert V.tabulate_cells(4) is V.tabulate_cells(4)


def test_trace_space_layout():
    """Test trace node order, sizes and end points."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)
    V = build_space(mesh, ElementKind.P2, 2)
    S = build_trace_space(V, 5)

    assert S.n == 18
    assert S.n_dofs == 36
    xy = S.node_coords
    assert np.allclose(xy[:9, 1], 0.0)
    assert np.allclose(xy[9:, 1], 1.0)
    assert np.all(np.diff(xy[:9, 0]) > 0)
    assert S.endpoint_nodes().size == 4

    periodic_mesh = build_rect_mesh(4, 2, 2.0, 1.0, periodic=True)
    periodic = build_trace_space(build_space(periodic_mesh, ElementKind.P2, 2))
    assert periodic.n == 16
    assert periodic.endpoint_nodes().size == 0


def test_trace_restriction_and_extension():
    """Test that restricting an extended trace field returns it unchanged."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)
    S = build_trace_space(build_space(mesh, ElementKind.P2, 2))
    w = np.random.default_rng(0).standard_normal(S.n_dofs)

    assert np.allclose(S.restrict(S.extend(w)), w)


def test_trace_tangential_derivative_orientation():
    """Test that the tangential derivative follows the counterclockwise boundary orientation."""
    mesh = build_rect_mesh(4, 2, 2.0, 1.0)
    S = build_trace_space(build_space(mesh, ElementKind.P2, 2))
    coeffs = S.interpolate(lambda x, y: np.stack([x, x * x]))

    values = S.evaluate(coeffs)
    assert np.allclose(values[0], S.points[:, 0])
    ds = S.evaluate_ds(coeffs)
    # bottom line runs in +x, top line in -x
    assert np.allclose(ds[0], S.tab.tangents[:, 0])
    assert np.allclose(ds[1], 2.0 * S.points[:, 0] * S.tab.tangents[:, 0])


def test_vertex_values_shape():
    """Test vertex sampling of scalar and vector fields."""
    mesh = build_rect_mesh(2, 1, 2.0, 1.0)
    Q = build_space(mesh, ElementKind.P1, 1)
    p = Q.interpolate(lambda x, y: x + 2.0 * y)

    values = Q.vertex_values(p)
    assert values.shape == (1, 6)
    assert np.allclose(values[0], mesh.vertices[:, 0] + 2.0 * mesh.vertices[:, 1])
