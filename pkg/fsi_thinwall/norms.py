"""Error norms of discrete fields against analytic ones, by quadrature."""

import numpy as np

from fsi_thinwall.fem.space import FeSpace, Field, TraceSpace, as_components
from fsi_thinwall.forms import DEFAULT_LOAD_DEGREE, GradientField


def l2_error(V: FeSpace, coeffs: np.ndarray, f: Field, degree: int = DEFAULT_LOAD_DEGREE) -> float:
    """||f - f_h||_{L2(Omega)}."""
    tab = V.tabulate_cells(degree)
    exact = as_components(f(tab.points[:, 0], tab.points[:, 1]), V.components, tab.size)
    diff = exact - V.evaluate(coeffs, tab)
    return float(np.sqrt(np.sum(tab.weights * np.sum(diff**2, axis=0))))


def h1_seminorm_error(
    V: FeSpace, coeffs: np.ndarray, grad: GradientField, degree: int = DEFAULT_LOAD_DEGREE
) -> float:
    """|f - f_h|_{H1(Omega)} of a vector field given by its gradient."""
    tab = V.tabulate_cells(degree)
    exact = np.asarray(grad(tab.points[:, 0], tab.points[:, 1]), dtype=float)
    exact = np.broadcast_to(exact, (2, 2, tab.size))
    diff = exact - V.evaluate_gradient(coeffs, tab)
    return float(np.sqrt(np.sum(tab.weights * np.sum(diff**2, axis=(0, 1)))))


def sigma_l2_error(S: TraceSpace, coeffs: np.ndarray, g: Field) -> float:
    """||g - g_h||_{L2(Sigma)} for a trace coefficient vector."""
    pts = S.points
    exact = as_components(g(pts[:, 0], pts[:, 1]), S.components, pts.shape[0])
    diff = exact - S.evaluate(coeffs)
    return float(np.sqrt(np.sum(S.weights * np.sum(diff**2, axis=0))))


def sigma_energy_error(
    S: TraceSpace, coeffs: np.ndarray, g: Field, dg: Field, C0: float, C1: float
) -> float:
    """||g - g_h||_s = sqrt(a_s(g - g_h, g - g_h)) with dg the x-derivative of g."""
    pts = S.points
    tx = S.tab.tangents[:, 0]
    exact = as_components(g(pts[:, 0], pts[:, 1]), S.components, pts.shape[0])
    dexact = as_components(dg(pts[:, 0], pts[:, 1]), S.components, pts.shape[0]) * tx
    diff = exact - S.evaluate(coeffs)
    ddiff = dexact - S.evaluate_ds(coeffs)
    value = C0 * np.sum(S.weights * np.sum(ddiff**2, axis=0))
    value += C1 * np.sum(S.weights * np.sum(diff**2, axis=0))
    return float(np.sqrt(value))


def sigma_l2_norm(S: TraceSpace, coeffs: np.ndarray) -> float:
    return float(np.sqrt(np.sum(S.weights * np.sum(S.evaluate(coeffs) ** 2, axis=0))))


def sigma_h1_norm(S: TraceSpace, coeffs: np.ndarray) -> float:
    """Full H1(Sigma) norm of a trace field."""
    values = np.sum(S.evaluate(coeffs) ** 2, axis=0) + np.sum(S.evaluate_ds(coeffs) ** 2, axis=0)
    return float(np.sqrt(np.sum(S.weights * values)))


def volume_l2_norm(V: FeSpace, coeffs: np.ndarray, degree: int = DEFAULT_LOAD_DEGREE) -> float:
    tab = V.tabulate_cells(degree)
    return float(np.sqrt(np.sum(tab.weights * np.sum(V.evaluate(coeffs, tab) ** 2, axis=0))))
