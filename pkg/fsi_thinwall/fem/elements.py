"""Reference-element bases in barycentric coordinates.

Local numbering:
    P1        vertices 0, 1, 2
    P2        vertices 0, 1, 2, then edge k opposite vertex k (edges (1,2), (2,0), (0,1))
    P1Bubble  vertices 0, 1, 2, then the cubic bubble 27 l0 l1 l2
"""

from enum import Enum
from typing import Tuple

import numpy as np

# reference gradients of the barycentric coordinates w.r.t. (xi, eta)
BARY_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

P2_EDGES = ((1, 2), (2, 0), (0, 1))


class ElementKind(str, Enum):
    """Supported Lagrange element families."""

    P1 = "P1"
    P2 = "P2"
    P1_BUBBLE = "P1Bubble"

    @property
    def degree(self) -> int:
        """Polynomial degree of the local space."""
        return {"P1": 1, "P2": 2, "P1Bubble": 3}[self.value]

    @property
    def order(self) -> int:
        """Approximation order r of the complete polynomials contained in the space."""
        return {"P1": 1, "P2": 2, "P1Bubble": 1}[self.value]

    @property
    def dofs_per_cell(self) -> int:
        return {"P1": 3, "P2": 6, "P1Bubble": 4}[self.value]


def eval_basis(kind: ElementKind, bary: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate a reference basis at barycentric points.

    Args:
        kind: Element family
        bary: (n, 3) or (3,) barycentric coordinates

    Returns:
        values of shape (n, nb) and reference gradients of shape (n, nb, 2)
    """
    kind = ElementKind(kind)
    lam = np.atleast_2d(np.asarray(bary, dtype=float))
    n = lam.shape[0]
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    g = BARY_GRADS

    if kind is ElementKind.P1:
        values = lam.copy()
        grads = np.broadcast_to(g, (n, 3, 2)).copy()
        return values, grads

    if kind is ElementKind.P1_BUBBLE:
        values = np.column_stack([l0, l1, l2, 27.0 * l0 * l1 * l2])
        grads = np.empty((n, 4, 2))
        grads[:, :3] = g
        grads[:, 3] = 27.0 * (
            np.outer(l1 * l2, g[0]) + np.outer(l0 * l2, g[1]) + np.outer(l0 * l1, g[2])
        )
        return values, grads

    values = np.empty((n, 6))
    grads = np.empty((n, 6, 2))
    for k in range(3):
        values[:, k] = lam[:, k] * (2.0 * lam[:, k] - 1.0)
        grads[:, k] = np.outer(4.0 * lam[:, k] - 1.0, g[k])
    for k, (i, j) in enumerate(P2_EDGES):
        values[:, 3 + k] = 4.0 * lam[:, i] * lam[:, j]
        grads[:, 3 + k] = 4.0 * (np.outer(lam[:, j], g[i]) + np.outer(lam[:, i], g[j]))
    return values, grads
