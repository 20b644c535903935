"""Structured triangular meshes of axis-aligned rectangles.

The rectangle [0, lx] x [0, ly] is split into nx x ny cells, each cut along the
lower-left to upper-right diagonal. Boundary edges are tagged by side: the top and
bottom sides form the interface Sigma, the left and right sides are the inflow and
outflow sections.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class BoundaryTag(str, Enum):
    """Side tags of the rectangle boundary."""

    SIGMA_TOP = "sigma_top"
    SIGMA_BOTTOM = "sigma_bottom"
    SIGMA_LEFT = "sigma_left"
    SIGMA_RIGHT = "sigma_right"

    @property
    def is_interface(self) -> bool:
        return self in (BoundaryTag.SIGMA_TOP, BoundaryTag.SIGMA_BOTTOM)


SIGMA_TAGS = (BoundaryTag.SIGMA_BOTTOM, BoundaryTag.SIGMA_TOP)


@dataclass(frozen=True)
class BoundaryEdge:
    """A boundary edge with its owning triangle.

    Attributes:
        vertices: Vertex indices ordered along the owning triangle's counterclockwise
            orientation, so the outward normal is the tangent rotated clockwise
        triangle: Index of the unique triangle containing the edge
        tag: Side the edge lies on
        normal: Outward unit normal
        length: Edge length
    """

    vertices: Tuple[int, int]
    triangle: int
    tag: BoundaryTag
    normal: Tuple[float, float]
    length: float


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable structured triangulation.

    Attributes:
        vertices: (n_vertices, 2) coordinates; vertex (i, j) has index i + j * (nx + 1)
        triangles: (n_triangles, 3) counterclockwise vertex triples
        boundary_edges: Tagged boundary edges
        periodic_pairs: (left vertex, right vertex) pairs, empty unless periodic
        nx: Cell count in x
        ny: Cell count in y
        lx: Width
        ly: Height
        h: Nominal mesh size (largest cell side)
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: List[BoundaryEdge]
    periodic_pairs: List[Tuple[int, int]]
    nx: int
    ny: int
    lx: float
    ly: float
    h: float
    _by_tag: Dict[BoundaryTag, List[BoundaryEdge]] = field(default_factory=dict, repr=False)

    @property
    def periodic(self) -> bool:
        return bool(self.periodic_pairs)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def vertex_index(self, i: int, j: int) -> int:
        return i + j * (self.nx + 1)

    def signed_areas(self) -> np.ndarray:
        """Signed area of every triangle."""
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges_by_tag(self, tag: BoundaryTag) -> List[BoundaryEdge]:
        return list(self._by_tag.get(BoundaryTag(tag), []))

    def sigma_length(self) -> float:
        return float(sum(e.length for tag in SIGMA_TAGS for e in self.edges_by_tag(tag)))


def build_rect_mesh(nx: int, ny: int, lx: float, ly: float, periodic: bool = False) -> Mesh:
    """Build a structured triangular mesh of [0, lx] x [0, ly].

    Args:
        nx: Number of cells in x
        ny: Number of cells in y
        lx: Width of the rectangle
        ly: Height of the rectangle
        periodic: Identify the left and right sides

    Returns:
        Mesh instance

    Raises:
        ValueError: If a cell count or a dimension is not positive
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"Cell counts must be positive integers, got nx={nx}, ny={ny}")
    if not (lx > 0 and ly > 0):
        raise ValueError(f"Rectangle dimensions must be positive, got lx={lx}, ly={ly}")
    nx, ny = int(nx), int(ny)
    lx, ly = float(lx), float(ly)

    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i + j * (nx + 1)

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    a, b = vid(ii, jj), vid(ii + 1, jj)
    c, d = vid(ii + 1, jj + 1), vid(ii, jj + 1)
    # cell k owns triangles 2k (a, b, c) and 2k + 1 (a, c, d)
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([a, b, c])
    triangles[1::2] = np.column_stack([a, c, d])

    def cell(i, j):
        return i + j * nx

    hx, hy = lx / nx, ly / ny
    edges: List[BoundaryEdge] = []
    for i in range(nx):
        edges.append(
            BoundaryEdge(
                (vid(i, 0), vid(i + 1, 0)),
                2 * cell(i, 0),
                BoundaryTag.SIGMA_BOTTOM,
                (0.0, -1.0),
                hx,
            )
        )
    for j in range(ny):
        edges.append(
            BoundaryEdge(
                (vid(nx, j), vid(nx, j + 1)),
                2 * cell(nx - 1, j),
                BoundaryTag.SIGMA_RIGHT,
                (1.0, 0.0),
                hy,
            )
        )
    for i in range(nx):
        edges.append(
            BoundaryEdge(
                (vid(i + 1, ny), vid(i, ny)),
                2 * cell(i, ny - 1) + 1,
                BoundaryTag.SIGMA_TOP,
                (0.0, 1.0),
                hx,
            )
        )
    for j in range(ny):
        edges.append(
            BoundaryEdge(
                (vid(0, j + 1), vid(0, j)),
                2 * cell(0, j) + 1,
                BoundaryTag.SIGMA_LEFT,
                (-1.0, 0.0),
                hy,
            )
        )

    by_tag: Dict[BoundaryTag, List[BoundaryEdge]] = {tag: [] for tag in BoundaryTag}
    for edge in edges:
        by_tag[edge.tag].append(edge)
    for tag in (BoundaryTag.SIGMA_TOP, BoundaryTag.SIGMA_BOTTOM):
        by_tag[tag].sort(key=lambda e: min(vertices[v, 0] for v in e.vertices))
    for tag in (BoundaryTag.SIGMA_LEFT, BoundaryTag.SIGMA_RIGHT):
        by_tag[tag].sort(key=lambda e: min(vertices[v, 1] for v in e.vertices))

    periodic_pairs = [(vid(0, j), vid(nx, j)) for j in range(ny + 1)] if periodic else []

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=edges,
        periodic_pairs=periodic_pairs,
        nx=nx,
        ny=ny,
        lx=lx,
        ly=ly,
        h=max(hx, hy),
        _by_tag=by_tag,
    )
    logger.debug(
        f"Built {nx}x{ny} mesh of [0, {lx}] x [0, {ly}]: {mesh.n_vertices} vertices, "
        f"{mesh.n_triangles} triangles, periodic={periodic}"
    )
    return mesh


def boundary_edges_by_tag(mesh: Mesh, tag: BoundaryTag) -> List[BoundaryEdge]:
    """Return the boundary edges carrying a tag.

    Tagging is independent of periodic identification: the left and right sides keep
    their edges on a periodic mesh.

    Args:
        mesh: Mesh to query
        tag: Boundary tag

    Returns:
        Edges in increasing coordinate order along the side
    """
    return mesh.edges_by_tag(tag)
