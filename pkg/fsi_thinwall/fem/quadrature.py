"""Quadrature rules on the reference triangle and the unit edge."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 15
AVAILABLE_DEGREES = tuple(range(1, MAX_DEGREE + 1))
DOMAINS = ("triangle", "edge")


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Quadrature rule on a reference domain.

    Attributes:
        domain: "triangle" (vertices (0,0), (1,0), (0,1)) or "edge" ([0, 1])
        points: (n, 2) reference coordinates for triangles, (n,) for edges
        weights: (n,) positive weights summing to the reference measure
        degree: Polynomial degree integrated exactly
    """

    domain: str
    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    def barycentric(self) -> np.ndarray:
        """Barycentric coordinates (lambda_0, lambda_1, lambda_2) of triangle points."""
        if self.domain != "triangle":
            raise ValueError("Barycentric coordinates are defined for triangle rules only")
        xi, eta = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - xi - eta, xi, eta])


def _gauss_unit(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _edge_rule(n_points: int) -> QuadRule:
    t, w = _gauss_unit(n_points)
    return QuadRule("edge", t, w, 2 * n_points - 1)


@lru_cache(maxsize=None)
def _triangle_rule(degree: int) -> QuadRule:
    # collapsed (Duffy) product of Gauss rules: x = a, y = b (1 - a), dA = (1 - a) da db
    n = (degree + 3) // 2
    a, wa = _gauss_unit(n)
    b, wb = _gauss_unit(n)
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    points = np.column_stack([A.ravel(), (B * (1.0 - A)).ravel()])
    weights = (WA * WB * (1.0 - A)).ravel()
    return QuadRule("triangle", points, weights, degree)


def quad_rule(domain: str, degree: int) -> QuadRule:
    """Return a rule integrating polynomials up to ``degree`` exactly.

    Args:
        domain: "triangle" or "edge"
        degree: Exactness degree

    Returns:
        QuadRule instance

    Raises:
        ValueError: If the domain or the degree is not supported
    """
    if domain not in DOMAINS:
        raise ValueError(f"Unknown quadrature domain '{domain}', expected one of {DOMAINS}")
    if int(degree) != degree or degree not in AVAILABLE_DEGREES:
        raise ValueError(
            f"Unsupported {domain} quadrature degree {degree}; available degrees: "
            f"{AVAILABLE_DEGREES[0]}..{AVAILABLE_DEGREES[-1]}"
        )
    if domain == "edge":
        return _edge_rule((int(degree) + 2) // 2)
    return _triangle_rule(int(degree))


def gauss_edge_rule(n_points: int) -> QuadRule:
    """Gauss-Legendre rule on [0, 1] with a given number of points."""
    if n_points < 1:
        raise ValueError(f"Edge rule needs at least one point, got {n_points}")
    return _edge_rule(int(n_points))
