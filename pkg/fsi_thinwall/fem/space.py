"""Finite element spaces, DOF maps and tabulated bases.

Scalar basis functions are called nodes. A space with ``components`` components
numbers its DOFs component-major: DOF ``c * n_nodes + node`` is component ``c`` of
``node``. Periodic identification merges nodes at paired left/right locations; the
basis function of a merged node is the sum of the two one-sided functions.

Dirichlet constraints are recorded as a set of constrained nodes; the full numbering is
kept and the solvers eliminate constrained DOFs by row/column removal.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from fsi_thinwall.fem.elements import P2_EDGES, ElementKind, eval_basis
from fsi_thinwall.fem.quadrature import gauss_edge_rule, quad_rule
from fsi_thinwall.mesh import SIGMA_TAGS, BoundaryTag, Mesh

logger = logging.getLogger(__name__)

# f(x, y) -> array of shape (components, n) or (n,) for scalars
Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Tabulation:
    """Basis values and physical gradients at a set of quadrature points.

    Attributes:
        points: (nq, 2) physical coordinates
        weights: (nq,) physical quadrature weights
        values: (nq, n_nodes) scalar basis values
        dx: (nq, n_nodes) x-derivatives
        dy: (nq, n_nodes) y-derivatives
        normals: (nq, 2) outward normals, edge tabulations only
        tangents: (nq, 2) unit tangents, edge tabulations only
    """

    points: np.ndarray
    weights: np.ndarray
    values: sp.csr_matrix
    dx: sp.csr_matrix
    dy: sp.csr_matrix
    normals: Optional[np.ndarray] = None
    tangents: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    def gradient(self, axis: int) -> sp.csr_matrix:
        return self.dx if axis == 0 else self.dy


def as_components(values, components: int, n: int) -> np.ndarray:
    """Broadcast field values to shape (components, n)."""
    arr = np.asarray(values, dtype=float)
    if components == 1 and arr.ndim <= 1:
        return np.broadcast_to(arr, (n,)).reshape(1, n).copy()
    return np.broadcast_to(arr, (components, n)).copy()


def _geometry(mesh: Mesh, triangles: np.ndarray):
    p = mesh.vertices[mesh.triangles[triangles]]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    return p[:, 0], jac, det, inv


class FeSpace:
    """Lagrange finite element space on a structured mesh.

    Attributes:
        mesh: Underlying mesh
        kind: Element family
        components: 1 for scalar (pressure) spaces, 2 for velocity spaces
        n_nodes: Number of scalar basis functions after periodic identification
        node_coords: (n_nodes, 2) nodal locations (left representative for merged nodes)
        cell_nodes: (n_triangles, dofs_per_cell) local-to-global node table
        vertex_node: Node of every mesh vertex
        dirichlet_tags: Sides carrying strong constraints
        constrained_nodes: Sorted nodes lying on Dirichlet sides
        trace_nodes: Nodes on Sigma, bottom line first, each line in increasing x
    """

    def __init__(
        self,
        mesh: Mesh,
        kind: ElementKind,
        components: int,
        dirichlet_tags: Iterable[BoundaryTag] = (),
    ):
        kind = ElementKind(kind)
        tags = frozenset(BoundaryTag(t) for t in dirichlet_tags)
        if components not in (1, 2):
            raise ValueError(f"Spaces have 1 or 2 components, got {components}")
        if kind is ElementKind.P1_BUBBLE and components != 2:
            raise ValueError("P1Bubble enriches velocity spaces only; use components=2")
        if any(t.is_interface for t in tags):
            raise ValueError(
                "Sigma sides cannot carry Dirichlet constraints, "
                f"got {sorted(t.value for t in tags)}"
            )
        if mesh.periodic and tags:
            raise ValueError("Periodic meshes cannot carry Dirichlet sides")

        self.mesh = mesh
        self.kind = kind
        self.components = components
        self.dirichlet_tags = tags
        self._cache: Dict[Tuple, Tabulation] = {}

        self._number_nodes()
        self.constrained_nodes = self._collect_constrained_nodes()
        self.trace_nodes = self._collect_trace_nodes()
        self._trace_index = {int(n): k for k, n in enumerate(self.trace_nodes)}

        logger.debug(
            f"Built {kind.value} space with {components} component(s): {self.n_dofs} DOFs, "
            f"{self.constrained_dofs.size} constrained, {self.trace_nodes.size} Sigma nodes"
        )

    # numbering

    def _number_nodes(self) -> None:
        mesh = self.mesh
        vmap = np.arange(mesh.n_vertices)
        for left, right in mesh.periodic_pairs:
            vmap[right] = left
        reps, vertex_node = np.unique(vmap, return_inverse=True)
        self.vertex_node = vertex_node.reshape(-1)
        n_nodes = reps.size
        coords = [mesh.vertices[reps]]
        tables = [self.vertex_node[mesh.triangles]]
        self._edge_lookup: Dict[Tuple[int, int], int] = {}

        if self.kind is ElementKind.P2:
            tri = mesh.triangles
            local = np.stack([tri[:, list(e)] for e in P2_EDGES], axis=1)
            keys = np.sort(local.reshape(-1, 2), axis=1)
            unique_edges, inverse = np.unique(keys, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(unique_edges)}
            emap = np.arange(unique_edges.shape[0])
            if mesh.periodic:
                partner = dict((r, l) for l, r in mesh.periodic_pairs)
                for edge in mesh.edges_by_tag(BoundaryTag.SIGMA_RIGHT):
                    a, b = edge.vertices
                    right_id = lookup[tuple(sorted((a, b)))]
                    emap[right_id] = lookup[tuple(sorted((partner[a], partner[b])))]
            edge_reps, edge_node = np.unique(emap, return_inverse=True)
            edge_node = n_nodes + edge_node.reshape(-1)
            self._edge_lookup = {key: int(edge_node[k]) for key, k in lookup.items()}
            ends = unique_edges[edge_reps]
            mids = 0.5 * (mesh.vertices[ends[:, 0]] + mesh.vertices[ends[:, 1]])
            coords.append(mids)
            tables.append(edge_node[inverse].reshape(-1, 3))
            n_nodes += edge_reps.size
        elif self.kind is ElementKind.P1_BUBBLE:
            coords.append(mesh.vertices[mesh.triangles].mean(axis=1))
            tables.append((n_nodes + np.arange(mesh.n_triangles))[:, None])
            n_nodes += mesh.n_triangles

        self.n_nodes = int(n_nodes)
        self.node_coords = np.vstack(coords)
        self.cell_nodes = np.hstack(tables).astype(np.int64)

    def _edge_nodes(self, edge_vertices: Sequence[int]) -> list:
        a, b = edge_vertices
        nodes = [int(self.vertex_node[a]), int(self.vertex_node[b])]
        if self.kind is ElementKind.P2:
            nodes.append(self._edge_lookup[tuple(sorted((int(a), int(b))))])
        return nodes

    def _collect_constrained_nodes(self) -> np.ndarray:
        nodes = set()
        for tag in self.dirichlet_tags:
            for edge in self.mesh.edges_by_tag(tag):
                nodes.update(self._edge_nodes(edge.vertices))
        return np.array(sorted(nodes), dtype=np.int64)

    def _collect_trace_nodes(self) -> np.ndarray:
        nodes = set()
        for tag in SIGMA_TAGS:
            for edge in self.mesh.edges_by_tag(tag):
                nodes.update(self._edge_nodes(edge.vertices))
        nodes = np.array(sorted(nodes), dtype=np.int64)
        xy = self.node_coords[nodes]
        return nodes[np.lexsort((xy[:, 0], xy[:, 1]))]

    # DOF sets

    @property
    def n_dofs(self) -> int:
        return self.components * self.n_nodes

    @property
    def n_trace(self) -> int:
        return int(self.trace_nodes.size)

    def node_dofs(self, nodes: np.ndarray) -> np.ndarray:
        """All component DOFs of the given nodes, component-major."""
        nodes = np.asarray(nodes, dtype=np.int64)
        return np.concatenate([c * self.n_nodes + nodes for c in range(self.components)])

    @property
    def constrained_dofs(self) -> np.ndarray:
        return self.node_dofs(self.constrained_nodes)

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained_dofs] = False
        return np.flatnonzero(mask)

    @property
    def trace_dofs(self) -> np.ndarray:
        return self.node_dofs(self.trace_nodes)

    def trace_position(self, node: int) -> int:
        return self._trace_index[int(node)]

    def trace_restriction(self) -> sp.csr_matrix:
        """Selection matrix mapping space DOFs to trace DOFs (component-major)."""
        m = self.components * self.n_trace
        cols = self.trace_dofs
        return sp.csr_matrix((np.ones(m), (np.arange(m), cols)), shape=(m, self.n_dofs))

    # tabulation

    def tabulate_cells(self, degree: int) -> Tabulation:
        """Tabulate the basis at a triangle rule of the given exactness degree."""
        key = ("cells", int(degree))
        if key not in self._cache:
            self._cache[key] = self._tabulate_cells(int(degree))
        return self._cache[key]

    def _tabulate_cells(self, degree: int) -> Tabulation:
        mesh = self.mesh
        rule = quad_rule("triangle", degree)
        values, ref_grads = eval_basis(self.kind, rule.barycentric())
        origin, jac, det, inv = _geometry(mesh, np.arange(mesh.n_triangles))
        n_tri, nq, nb = mesh.n_triangles, rule.size, values.shape[1]

        grads = np.einsum("tji,qbj->tqbi", inv, ref_grads)
        points = origin[:, None, :] + np.einsum("tij,qj->tqi", jac, rule.points)
        weights = rule.weights[None, :] * np.abs(det)[:, None]

        rows = np.broadcast_to(np.arange(n_tri * nq).reshape(n_tri, nq, 1), (n_tri, nq, nb)).ravel()
        cols = np.broadcast_to(self.cell_nodes[:, None, :], (n_tri, nq, nb)).ravel()
        shape = (n_tri * nq, self.n_nodes)

        def build(data):
            return sp.coo_matrix((data.ravel(), (rows, cols)), shape=shape).tocsr()

        return Tabulation(
            points=points.reshape(-1, 2),
            weights=weights.ravel(),
            values=build(np.broadcast_to(values[None], (n_tri, nq, nb))),
            dx=build(grads[..., 0]),
            dy=build(grads[..., 1]),
        )

    def tabulate_edges(self, tags: Sequence[BoundaryTag], n_points: int = 5) -> Tabulation:
        """Tabulate the volume basis at Gauss points of tagged boundary edges.

        Each edge is evaluated one-sided from its owning triangle; points are ordered
        edge by edge in the order of ``tags`` and of ``Mesh.edges_by_tag``.
        """
        tags = tuple(BoundaryTag(t) for t in tags)
        key = ("edges", tags, int(n_points))
        if key not in self._cache:
            self._cache[key] = self._tabulate_edges(tags, int(n_points))
        return self._cache[key]

    def _tabulate_edges(self, tags: Tuple[BoundaryTag, ...], n_points: int) -> Tabulation:
        mesh = self.mesh
        rule = gauss_edge_rule(n_points)
        edges = [e for tag in tags for e in mesh.edges_by_tag(tag)]
        nb = self.kind.dofs_per_cell
        n_rows = len(edges) * n_points
        points = np.zeros((n_rows, 2))
        weights = np.zeros(n_rows)
        normals = np.zeros((n_rows, 2))
        tangents = np.zeros((n_rows, 2))
        rows = np.zeros((n_rows, nb), dtype=np.int64)
        cols = np.zeros((n_rows, nb), dtype=np.int64)
        vals = np.zeros((n_rows, nb))
        gx = np.zeros((n_rows, nb))
        gy = np.zeros((n_rows, nb))

        for k, edge in enumerate(edges):
            tri = mesh.triangles[edge.triangle]
            ia = int(np.flatnonzero(tri == edge.vertices[0])[0])
            ib = int(np.flatnonzero(tri == edge.vertices[1])[0])
            bary = np.zeros((n_points, 3))
            bary[:, ia] = 1.0 - rule.points
            bary[:, ib] = rule.points
            v, ref_g = eval_basis(self.kind, bary)
            _, _, _, inv = _geometry(mesh, np.array([edge.triangle]))
            g = np.einsum("ji,qbj->qbi", inv[0], ref_g)

            a = mesh.vertices[edge.vertices[0]]
            b = mesh.vertices[edge.vertices[1]]
            sl = slice(k * n_points, (k + 1) * n_points)
            points[sl] = a[None, :] + rule.points[:, None] * (b - a)[None, :]
            weights[sl] = rule.weights * edge.length
            normals[sl] = edge.normal
            tangents[sl] = (b - a) / edge.length
            rows[sl] = np.arange(sl.start, sl.stop)[:, None]
            cols[sl] = self.cell_nodes[edge.triangle][None, :]
            vals[sl], gx[sl], gy[sl] = v, g[..., 0], g[..., 1]

        shape = (n_rows, self.n_nodes)

        def build(data):
            return sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()

        return Tabulation(
            points=points,
            weights=weights,
            values=build(vals),
            dx=build(gx),
            dy=build(gy),
            normals=normals,
            tangents=tangents,
        )

    # fields

    def split(self, coeffs: np.ndarray) -> np.ndarray:
        """Reshape a coefficient vector to (components, n_nodes)."""
        return np.asarray(coeffs, dtype=float).reshape(self.components, self.n_nodes)

    def evaluate(self, coeffs: np.ndarray, tab: Tabulation) -> np.ndarray:
        """Field values at tabulated points, shape (components, nq)."""
        return (tab.values @ self.split(coeffs).T).T

    def evaluate_gradient(self, coeffs: np.ndarray, tab: Tabulation) -> np.ndarray:
        """Field gradients at tabulated points, shape (components, 2, nq)."""
        c = self.split(coeffs).T
        return np.stack([(tab.dx @ c).T, (tab.dy @ c).T], axis=1)

    def interpolate(self, f: Field) -> np.ndarray:
        """Nodal interpolation of an analytic field.

        Bubble coefficients are chosen so that the interpolant matches ``f`` at the
        barycenter of each triangle.
        """
        xy = self.node_coords
        values = as_components(f(xy[:, 0], xy[:, 1]), self.components, self.n_nodes)
        if self.kind is ElementKind.P1_BUBBLE:
            bubbles = self.cell_nodes[:, 3]
            vertex_mean = values[:, self.cell_nodes[:, :3]].mean(axis=2)
            values[:, bubbles] -= vertex_mean
        return values.ravel()

    def constrained_values(self, f: Field) -> np.ndarray:
        """Interpolated values of ``f`` on the constrained DOFs."""
        nodes = self.constrained_nodes
        xy = self.node_coords[nodes]
        return as_components(f(xy[:, 0], xy[:, 1]), self.components, nodes.size).ravel()

    def vertex_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Field values at the mesh vertices, shape (components, n_vertices)."""
        return self.split(coeffs)[:, self.vertex_node]

    def evaluate_at(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate a field at arbitrary points of the rectangle, shape (components, n)."""
        mesh = self.mesh
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        hx, hy = mesh.lx / mesh.nx, mesh.ly / mesh.ny
        i = np.clip(np.floor(pts[:, 0] / hx).astype(int), 0, mesh.nx - 1)
        j = np.clip(np.floor(pts[:, 1] / hy).astype(int), 0, mesh.ny - 1)
        sx = pts[:, 0] / hx - i
        sy = pts[:, 1] / hy - j
        tri = 2 * (i + j * mesh.nx) + (sy > sx).astype(int)

        origin, _, _, inv = _geometry(mesh, tri)
        ref = np.einsum("nij,nj->ni", inv, pts - origin)
        bary = np.column_stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
        values, _ = eval_basis(self.kind, bary)
        local = self.split(coeffs)[:, self.cell_nodes[tri]]
        return np.einsum("cnb,nb->cn", local, values)


def build_space(
    mesh: Mesh,
    kind: ElementKind,
    components: int,
    dirichlet_tags: Iterable[BoundaryTag] = (),
) -> FeSpace:
    """Build a finite element space.

    Args:
        mesh: Mesh to build on
        kind: Element family
        components: 1 for pressure, 2 for velocity
        dirichlet_tags: Sides with strong constraints (never Sigma)

    Returns:
        FeSpace instance

    Raises:
        ValueError: If the tags contain Sigma sides or the component count does not fit
    """
    return FeSpace(mesh, kind, components, dirichlet_tags)


class TraceSpace:
    """Trace space S_h on Sigma induced by a velocity space.

    Trace DOFs are numbered component-major over ``V.trace_nodes``. All Sigma integrals
    use the Gauss points of ``tab``, the same points at which tractions are evaluated.

    Attributes:
        V: Parent velocity space
        tab: Volume basis of V tabulated on the Sigma edges
        values: (nq, n) trace basis values
        ds: (nq, n) tangential derivatives of the trace basis
        restriction: Map from V DOFs to trace DOFs
    """

    def __init__(self, V: FeSpace, n_points: int = 5):
        self.V = V
        self.components = V.components
        self.nodes = V.trace_nodes
        self.n_points = int(n_points)
        self.tab = V.tabulate_edges(SIGMA_TAGS, self.n_points)
        tx = sp.diags(self.tab.tangents[:, 0])
        ty = sp.diags(self.tab.tangents[:, 1])
        self.values = self.tab.values[:, self.nodes].tocsr()
        self.ds = (tx @ self.tab.dx + ty @ self.tab.dy)[:, self.nodes].tocsr()
        self.restriction = V.trace_restriction()

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def n_dofs(self) -> int:
        return self.components * self.n

    @property
    def weights(self) -> np.ndarray:
        return self.tab.weights

    @property
    def points(self) -> np.ndarray:
        return self.tab.points

    @property
    def normals(self) -> np.ndarray:
        return self.tab.normals

    @property
    def node_coords(self) -> np.ndarray:
        return self.V.node_coords[self.nodes]

    def evaluation_matrix(self) -> sp.csr_matrix:
        """Block matrix mapping trace DOFs to point values, rows component-major."""
        return sp.block_diag([self.values] * self.components, format="csr")

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        """Trace field at the Sigma points, shape (components, nq)."""
        c = np.asarray(coeffs, dtype=float).reshape(self.components, self.n)
        return (self.values @ c.T).T

    def evaluate_ds(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float).reshape(self.components, self.n)
        return (self.ds @ c.T).T

    def interpolate(self, g: Field) -> np.ndarray:
        """Nodal interpolation of a field given on Sigma."""
        xy = self.node_coords
        return as_components(g(xy[:, 0], xy[:, 1]), self.components, self.n).ravel()

    def restrict(self, u: np.ndarray) -> np.ndarray:
        return self.restriction @ u

    def extend(self, w: np.ndarray) -> np.ndarray:
        """Zero-interior extension of a trace vector to the velocity space."""
        return self.restriction.T @ w

    def endpoint_nodes(self) -> np.ndarray:
        """Trace positions at x = 0 and x = lx on each Sigma line (empty when periodic)."""
        if self.V.mesh.periodic:
            return np.array([], dtype=np.int64)
        x = self.node_coords[:, 0]
        return np.flatnonzero(np.isclose(x, 0.0) | np.isclose(x, self.V.mesh.lx))


def build_trace_space(V: FeSpace, n_points: int = 5) -> TraceSpace:
    """Build the trace space of a velocity space on Sigma."""
    return TraceSpace(V, n_points)
