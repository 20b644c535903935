"""Bilinear forms, traction couplings and load vectors.

All matrices are built as products of tabulated basis matrices with diagonal weights,
e.g. the scalar mass matrix is ``values.T @ diag(w) @ values``. Vector-valued matrices
follow the component-major DOF ordering of ``FeSpace``.

Velocity/pressure pairs are stacked as ``x = [u; p]``.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from fsi_thinwall.fem.elements import ElementKind
from fsi_thinwall.fem.space import (
    FeSpace,
    Field,
    Tabulation,
    TraceSpace,
    as_components,
    build_space,
    build_trace_space,
)
from fsi_thinwall.mesh import SIGMA_TAGS, BoundaryTag, Mesh

logger = logging.getLogger(__name__)

# element name -> (velocity kind, pressure kind)
ELEMENT_PAIRS: Dict[str, Tuple[ElementKind, ElementKind]] = {
    "th": (ElementKind.P2, ElementKind.P1),
    "mini": (ElementKind.P1_BUBBLE, ElementKind.P1),
}

# velocity approximation order r of each pair
ELEMENT_ORDERS: Dict[str, int] = {"th": 2, "mini": 1}

DEFAULT_LOAD_DEGREE = 7
DEFAULT_EDGE_POINTS = 5

# (x, y) -> (2, 2, n) array with [i, j] = d u_i / d x_j
GradientField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def stiffness_degree(V: FeSpace) -> int:
    """Triangle rule degree integrating mass and stiffness matrices of V exactly."""
    return 2 * V.kind.degree


def _weighted(tab: Tabulation) -> sp.dia_matrix:
    return sp.diags(tab.weights)


def _gram(left: sp.spmatrix, w: sp.spmatrix, right: sp.spmatrix) -> sp.csr_matrix:
    return (left.T @ w @ right).tocsr()


def assemble_mass(V: FeSpace, degree: Optional[int] = None) -> sp.csr_matrix:
    """Volume mass matrix (u, v) on V."""
    tab = V.tabulate_cells(degree or stiffness_degree(V))
    scalar = _gram(tab.values, _weighted(tab), tab.values)
    return sp.block_diag([scalar] * V.components, format="csr")


def assemble_af(V: FeSpace, mu: float, degree: Optional[int] = None) -> sp.csr_matrix:
    """Viscous form a_f(u, v) = 2 mu (D(u), D(v)).

    Args:
        V: Vector velocity space
        mu: Viscosity
        degree: Triangle rule degree (default: exact for the element)

    Returns:
        Symmetric positive semidefinite matrix
    """
    if V.components != 2:
        raise ValueError("a_f is assembled on vector spaces")
    tab = V.tabulate_cells(degree or stiffness_degree(V))
    W = _weighted(tab)
    D = (tab.dx, tab.dy)
    laplace = _gram(tab.dx, W, tab.dx) + _gram(tab.dy, W, tab.dy)
    # block (test d, trial c) = mu [delta_cd grad.grad + d_c(test) d_d(trial)]
    blocks = [[mu * _gram(D[c], W, D[d]) for c in range(2)] for d in range(2)]
    for c in range(2):
        blocks[c][c] = blocks[c][c] + mu * laplace
    return sp.bmat(blocks, format="csr")


def assemble_b(V: FeSpace, Q: FeSpace, degree: Optional[int] = None) -> sp.csr_matrix:
    """Divergence form b(q, v) = (q, div v) as a (pressure x velocity) matrix."""
    if V.mesh is not Q.mesh:
        raise ValueError("Velocity and pressure spaces must share a mesh")
    deg = degree or stiffness_degree(V)
    tv, tq = V.tabulate_cells(deg), Q.tabulate_cells(deg)
    W = _weighted(tv)
    return sp.hstack([_gram(tq.values, W, tv.dx), _gram(tq.values, W, tv.dy)], format="csr")


def assemble_sigma_mass(S: TraceSpace) -> sp.csr_matrix:
    """Mass matrix (w, xi)_Sigma on the trace space."""
    scalar = _gram(S.values, sp.diags(S.weights), S.values)
    return sp.block_diag([scalar] * S.components, format="csr")


def assemble_as(S: TraceSpace, C0: float, C1: float) -> sp.csr_matrix:
    """Structure form a_s(eta, w) = C0 (d_x eta, d_x w)_Sigma + C1 (eta, w)_Sigma.

    Raises:
        ValueError: If a coefficient is negative or both vanish
    """
    if C0 < 0 or C1 < 0 or (C0 == 0 and C1 == 0):
        raise ValueError(
            f"Structure coefficients must be >= 0 and not both zero, got C0={C0}, C1={C1}"
        )
    W = sp.diags(S.weights)
    scalar = C0 * _gram(S.ds, W, S.ds) + C1 * _gram(S.values, W, S.values)
    return sp.block_diag([scalar] * S.components, format="csr")


@dataclass(frozen=True, eq=False)
class TractionTraceOperator:
    """Linear map from (velocity, pressure) coefficients to sigma(v, q) n on Sigma.

    Rows are component-major over the Sigma quadrature points: row ``i * nq + g`` is
    component ``i`` of the traction at point ``g``.

    Attributes:
        matrix: (2 nq, n_u + n_p) sparse map
        points: (nq, 2) Sigma quadrature points
        weights: (nq,) quadrature weights
        normals: (nq, 2) outward normals
        n_u: Velocity DOF count
        n_p: Pressure DOF count
    """

    matrix: sp.csr_matrix
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    n_u: int
    n_p: int

    @property
    def n_points(self) -> int:
        return int(self.weights.shape[0])

    @property
    def point_weights(self) -> np.ndarray:
        return np.tile(self.weights, 2)

    def apply(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Traction values at the Sigma points, shape (2, nq)."""
        return (self.matrix @ np.concatenate([u, p])).reshape(2, self.n_points)

    def norm_squared(self, values: np.ndarray) -> float:
        """||values||^2_Sigma of traction values of shape (2, nq)."""
        return float(np.sum(self.weights * np.sum(np.asarray(values) ** 2, axis=0)))


def traction_trace(
    V: FeSpace, Q: FeSpace, mu: float, n_points: int = DEFAULT_EDGE_POINTS
) -> TractionTraceOperator:
    """Build the traction trace operator sigma(v, q) n = (-q I + 2 mu D(v)) n on Sigma."""
    tv = V.tabulate_edges(SIGMA_TAGS, n_points)
    tq = Q.tabulate_edges(SIGMA_TAGS, n_points)
    n_x = sp.diags(tv.normals[:, 0])
    n_y = sp.diags(tv.normals[:, 1])
    Dx, Dy = tv.dx, tv.dy
    # t_0 = mu [(2 n_x d_x + n_y d_y) u_0 + n_y d_x u_1] - n_x q
    # t_1 = mu [n_x d_y u_0 + (n_x d_x + 2 n_y d_y) u_1] - n_y q
    blocks = [
        [mu * (2 * n_x @ Dx + n_y @ Dy), mu * (n_y @ Dx), -n_x @ tq.values],
        [mu * (n_x @ Dy), mu * (n_x @ Dx + 2 * n_y @ Dy), -n_y @ tq.values],
    ]
    return TractionTraceOperator(
        matrix=sp.bmat(blocks, format="csr"),
        points=tv.points,
        weights=tv.weights,
        normals=tv.normals,
        n_u=V.n_dofs,
        n_p=Q.n_dofs,
    )


def assemble_traction_couplings(
    T: TractionTraceOperator, S: TraceSpace
) -> Dict[str, sp.csr_matrix]:
    """Sigma couplings involving the traction of the test pair.

    Returns:
        ``K_wsigma`` of shape (n_u + n_p, n_trace_dofs) realizing (w, sigma(v, q) n)_Sigma
        with w the trial trace field, and ``K_sigmasigma`` of shape
        (n_u + n_p, n_u + n_p) realizing (sigma(u, p) n, sigma(v, q) n)_Sigma
    """
    if T.n_points != S.tab.size:
        raise ValueError("Traction operator and trace space use different Sigma rules")
    W = sp.diags(T.point_weights)
    E = S.evaluation_matrix()
    return {
        "K_wsigma": _gram(T.matrix, W, E),
        "K_sigmasigma": _gram(T.matrix, W, T.matrix),
    }


def assemble_boundary_pressure_load(
    V: FeSpace, tag: BoundaryTag, pval: float, n_points: int = DEFAULT_EDGE_POINTS
) -> np.ndarray:
    """Load vector of the natural condition sigma n = -pval n, i.e. -pval (n, v)_tag."""
    tag = BoundaryTag(tag)
    if tag.is_interface:
        raise ValueError(f"Pressure loads act on the left/right sides, got {tag.value}")
    tab = V.tabulate_edges([tag], n_points)
    parts = [
        -pval * (tab.values.T @ (tab.weights * tab.normals[:, c])) for c in range(V.components)
    ]
    return np.concatenate(parts)


# loads of analytic fields


def assemble_volume_load(V: FeSpace, f: Field, degree: int = DEFAULT_LOAD_DEGREE) -> np.ndarray:
    """(f, v) for an analytic field f."""
    tab = V.tabulate_cells(degree)
    vals = as_components(f(tab.points[:, 0], tab.points[:, 1]), V.components, tab.size)
    return np.concatenate([tab.values.T @ (tab.weights * vals[c]) for c in range(V.components)])


def assemble_strain_load(
    V: FeSpace, grad: GradientField, mu: float, degree: int = DEFAULT_LOAD_DEGREE
) -> np.ndarray:
    """a_f(u, v) = 2 mu (D(u), grad v) for an analytic field given by its gradient."""
    tab = V.tabulate_cells(degree)
    values = np.asarray(grad(tab.points[:, 0], tab.points[:, 1]), dtype=float)
    G = np.broadcast_to(values, (2, 2, tab.size))
    D = 0.5 * (G + G.transpose(1, 0, 2))
    parts = [
        2.0 * mu * (tab.dx.T @ (tab.weights * D[d, 0]) + tab.dy.T @ (tab.weights * D[d, 1]))
        for d in range(2)
    ]
    return np.concatenate(parts)


def assemble_divergence_load(V: FeSpace, p: Field, degree: int = DEFAULT_LOAD_DEGREE) -> np.ndarray:
    """b(p, v) = (p, div v) for an analytic scalar p."""
    tab = V.tabulate_cells(degree)
    vals = as_components(p(tab.points[:, 0], tab.points[:, 1]), 1, tab.size)[0]
    return np.concatenate([tab.dx.T @ (tab.weights * vals), tab.dy.T @ (tab.weights * vals)])


def assemble_trace_load(S: TraceSpace, g: Field) -> np.ndarray:
    """(g, w)_Sigma for an analytic field on Sigma."""
    pts = S.points
    vals = as_components(g(pts[:, 0], pts[:, 1]), S.components, pts.shape[0])
    return np.concatenate([S.values.T @ (S.weights * vals[c]) for c in range(S.components)])


def assemble_as_load(S: TraceSpace, g: Field, dg: Field, C0: float, C1: float) -> np.ndarray:
    """a_s(g, w) for an analytic Sigma field g with x-derivative dg."""
    pts = S.points
    tx = S.tab.tangents[:, 0]
    vals = as_components(g(pts[:, 0], pts[:, 1]), S.components, pts.shape[0])
    dvals = as_components(dg(pts[:, 0], pts[:, 1]), S.components, pts.shape[0]) * tx
    return np.concatenate(
        [
            C0 * (S.ds.T @ (S.weights * dvals[c])) + C1 * (S.values.T @ (S.weights * vals[c]))
            for c in range(S.components)
        ]
    )


@dataclass(eq=False)
class FsiOperators:
    """All spatial operators of one discretization level.

    Attributes:
        mesh: Mesh
        V: Velocity space
        Q: Pressure space
        S: Trace space on Sigma
        traction: Traction trace operator
        M: Velocity mass matrix
        Af: Viscous matrix a_f
        B: Divergence matrix b(q, v), shape (n_p, n_u)
        M_sigma: Sigma mass on trace DOFs
        A_s: Structure matrix on trace DOFs
        R: Restriction of velocity DOFs to trace DOFs
        K_wsigma: (w, sigma(v, q) n)_Sigma
        K_sigmasigma: (sigma(u, p) n, sigma(v, q) n)_Sigma
        load_degree: Triangle rule degree for analytic loads and norms
    """

    mesh: Mesh
    V: FeSpace
    Q: FeSpace
    S: TraceSpace
    traction: TractionTraceOperator
    M: sp.csr_matrix
    Af: sp.csr_matrix
    B: sp.csr_matrix
    M_sigma: sp.csr_matrix
    A_s: sp.csr_matrix
    R: sp.csr_matrix
    K_wsigma: sp.csr_matrix
    K_sigmasigma: sp.csr_matrix
    mu: float
    C0: float
    C1: float
    load_degree: int = DEFAULT_LOAD_DEGREE

    @property
    def n_u(self) -> int:
        return self.V.n_dofs

    @property
    def n_p(self) -> int:
        return self.Q.n_dofs

    @property
    def sigma_weights(self) -> np.ndarray:
        return self.traction.point_weights

    def traction_values(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Traction sigma(u, p) n at the Sigma points, flattened component-major."""
        return self.traction.matrix @ np.concatenate([u, p])

    def traction_on_trace(self, values: np.ndarray) -> np.ndarray:
        """(values, w)_Sigma for point values of a Sigma vector field, per trace DOF."""
        return self.S.evaluation_matrix().T @ (self.sigma_weights * values)

    def traction_on_tests(self, values: np.ndarray) -> np.ndarray:
        """(values, sigma(v, q) n)_Sigma per (v, q) DOF."""
        return self.traction.matrix.T @ (self.sigma_weights * values)

    def sigma_norm_squared(self, values: np.ndarray) -> float:
        return float(np.sum(self.sigma_weights * np.asarray(values) ** 2))


def assemble_operators(
    mesh: Mesh,
    element: str,
    mu: float,
    C0: float,
    C1: float,
    dirichlet_tags: Iterable[BoundaryTag] = (),
    edge_points: int = DEFAULT_EDGE_POINTS,
    volume_degree: Optional[int] = None,
    load_degree: int = DEFAULT_LOAD_DEGREE,
) -> FsiOperators:
    """Build spaces and assemble every operator of one level.

    Args:
        mesh: Mesh
        element: "th" (Taylor-Hood P2/P1) or "mini" (P1+bubble/P1)
        mu: Viscosity
        C0: Structure stiffness coefficient
        C1: Structure reaction coefficient
        dirichlet_tags: Velocity Dirichlet sides
        edge_points: Gauss points per Sigma edge
        volume_degree: Triangle rule degree for matrices (default: exact)
        load_degree: Triangle rule degree for analytic loads and error norms

    Returns:
        FsiOperators instance
    """
    if element not in ELEMENT_PAIRS:
        raise ValueError(f"Unknown element '{element}', expected one of {sorted(ELEMENT_PAIRS)}")
    vkind, qkind = ELEMENT_PAIRS[element]
    V = build_space(mesh, vkind, 2, dirichlet_tags)
    Q = build_space(mesh, qkind, 1)
    S = build_trace_space(V, edge_points)
    T = traction_trace(V, Q, mu, edge_points)
    couplings = assemble_traction_couplings(T, S)
    ops = FsiOperators(
        mesh=mesh,
        V=V,
        Q=Q,
        S=S,
        traction=T,
        M=assemble_mass(V, volume_degree),
        Af=assemble_af(V, mu, volume_degree),
        B=assemble_b(V, Q, volume_degree),
        M_sigma=assemble_sigma_mass(S),
        A_s=assemble_as(S, C0, C1),
        R=S.restriction,
        K_wsigma=couplings["K_wsigma"],
        K_sigmasigma=couplings["K_sigmasigma"],
        mu=mu,
        C0=C0,
        C1=C1,
        load_degree=load_degree,
    )
    logger.info(
        f"Assembled '{element}' operators on {mesh.nx}x{mesh.ny} mesh (h={mesh.h:.4g}): "
        f"n_u={ops.n_u}, n_p={ops.n_p}, n_sigma={S.n_dofs}"
    )
    return ops
