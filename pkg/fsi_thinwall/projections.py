"""Discrete Ritz projections on Sigma and in the bulk, and the coupled Ritz evolution.

The building blocks are

* the discrete normal n_h (L2(Sigma) projection of the unit normal) and the projection
  P~ onto trace fields with zero normal flux,
* the structure Ritz projection R^S (a_s + Sigma mass),
* the Dirichlet Stokes-Ritz projection R^D (a_f + mass Stokes problem with Sigma data
  P~ R^S(u|Sigma)),
* the initial displacements R_sh eta(0) and R_h eta(0) built from them,
* the coupled non-stationary Ritz projection, integrated in time with classical RK4,
  each stage solving a Neumann-type Stokes problem.

Residual vectors of a discrete pair (u_h, p_h) against analytic fields (u, p) are

    G(v) = a_f(u_h - u, v) - b(p_h - p, v) + (u_h - u, v)

per velocity DOF. Sigma solves subtract G applied to an extension of the trace tests.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from fsi_thinwall.fields import AnalyticFields, FieldTrajectory
from fsi_thinwall.forms import (
    FsiOperators,
    assemble_as_load,
    assemble_divergence_load,
    assemble_strain_load,
    assemble_trace_load,
    assemble_volume_load,
)
from fsi_thinwall.linalg import PIVOT_TOL, ConstrainedSolver, Factorization, factorize
from fsi_thinwall.norms import h1_seminorm_error, l2_error, sigma_h1_norm, sigma_l2_error

logger = logging.getLogger(__name__)

EXTENSIONS = ("zero", "harmonic")


@dataclass(frozen=True, eq=False)
class DiscreteNormal:
    """L2(Sigma) projection of the outward unit normal onto the trace space.

    Attributes:
        coeffs: n_h as trace coefficients
        load: (n, w_i)_Sigma per trace DOF
        norm: ||n_h||_Sigma
    """

    coeffs: np.ndarray
    load: np.ndarray
    norm: float

    def flux(self, w: np.ndarray) -> float:
        """(w, n)_Sigma of a trace field."""
        return float(self.load @ w)

    def lam(self, w: np.ndarray) -> float:
        """lambda(w) = (w, n)_Sigma / ||n_h||^2_Sigma."""
        return self.flux(w) / self.norm**2


def compute_nh(ops: FsiOperators) -> DiscreteNormal:
    """Solve the Sigma mass system for the discrete normal."""
    normals = ops.S.normals.T.ravel()
    load = ops.traction_on_trace(normals)
    coeffs = factorize(ops.M_sigma, "sigma_mass").solve(load)
    norm = float(np.sqrt(coeffs @ (ops.M_sigma @ coeffs)))
    logger.debug(f"Discrete normal: ||n_h||_Sigma={norm:.6g}")
    return DiscreteNormal(coeffs=coeffs, load=load, norm=norm)


def tilde_P(w: np.ndarray, nh: DiscreteNormal) -> np.ndarray:
    """Remove the normal-flux component: w - lambda(w) n_h."""
    w = np.asarray(w, dtype=float)
    return w - nh.lam(w) * nh.coeffs


@dataclass(frozen=True, eq=False)
class NtDCheck:
    """Discrete Neumann-to-Dirichlet symmetry and positivity over random trace loads.

    Attributes:
        max_asymmetry: max |(z, N f) - (f, N z)| / max(|(z, N f)|, |(f, N z)|)
        min_quadratic: min (z, N z)_Sigma over the sampled loads
        max_identity_error: max relative gap between (z, N z)_Sigma and 2 mu |D u_z|^2 + |u_z|^2
    """

    max_asymmetry: float
    min_quadratic: float
    max_identity_error: float
    trials: int


@dataclass(eq=False)
class RitzTrajectory:
    """Coupled Ritz projection sampled on a uniform time grid.

    Attributes:
        times: Grid times
        eta: R_h eta at the grid times (trace coefficients)
        u: R_h u at the grid times
        p: R_h p at the grid times
        errors: Per-time error norms against the exact fields
        divergence_residual: max |b(q_i, R_h u - u)| per grid time
    """

    times: np.ndarray
    eta: List[np.ndarray] = field(default_factory=list)
    u: List[np.ndarray] = field(default_factory=list)
    p: List[np.ndarray] = field(default_factory=list)
    errors: List[Dict[str, float]] = field(default_factory=list)
    divergence_residual: List[float] = field(default_factory=list)

    def max_error(self, key: str = "combined") -> float:
        return max(e[key] for e in self.errors)


class RitzProjector:
    """Projection machinery of one discretization level.

    Every system (Sigma mass, Sigma Ritz, Dirichlet Stokes-Ritz, Neumann-type Stokes) is
    factored once on first use. Side Dirichlet DOFs of the velocity space keep the nodal
    interpolant of the projected field; on Sigma the projected trace wins at corners.

    Attributes:
        ops: Spatial operators
        nh: Discrete normal
    """

    def __init__(self, ops: FsiOperators, pivot_tol: float = PIVOT_TOL):
        self.ops = ops
        self.pivot_tol = pivot_tol
        self.nh = compute_nh(ops)
        self._sigma: Optional[Factorization] = None
        self._dirichlet: Optional[ConstrainedSolver] = None
        self._neumann: Optional[ConstrainedSolver] = None
        self._harmonic: Optional[Factorization] = None
        self._mean = self._pressure_mean_vector()
        self._sigma_dofs = ops.V.trace_dofs
        self._side_dofs = np.setdiff1d(ops.V.constrained_dofs, self._sigma_dofs)
        interior = np.ones(ops.n_u, dtype=bool)
        interior[self._sigma_dofs] = False
        interior[self._side_dofs] = False
        self._interior_dofs = np.flatnonzero(interior)

    def _pressure_mean_vector(self) -> np.ndarray:
        Q = self.ops.Q
        tab = Q.tabulate_cells(2 * Q.kind.degree)
        return tab.values.T @ tab.weights

    # factorizations

    @property
    def sigma_solver(self) -> Factorization:
        if self._sigma is None:
            self._sigma = factorize(self.ops.A_s + self.ops.M_sigma, "sigma_ritz", self.pivot_tol)
        return self._sigma

    @property
    def dirichlet_solver(self) -> ConstrainedSolver:
        """[[Af + M, -B^T, 0], [B, 0, m], [0, m^T, 0]] with Sigma and side DOFs fixed."""
        if self._dirichlet is None:
            ops = self.ops
            m = sp.csr_matrix(self._mean[:, None])
            L = sp.bmat(
                [
                    [ops.Af + ops.M, -ops.B.T, None],
                    [ops.B, None, m],
                    [None, m.T, None],
                ],
                format="csr",
            )
            fixed = np.union1d(self._sigma_dofs, self._side_dofs)
            self._dirichlet = ConstrainedSolver(L, fixed, "dirichlet_stokes_ritz", self.pivot_tol)
        return self._dirichlet

    @property
    def neumann_solver(self) -> ConstrainedSolver:
        """[[Af + M, -B^T], [B, 0]] with only the side DOFs fixed."""
        if self._neumann is None:
            ops = self.ops
            L = sp.bmat([[ops.Af + ops.M, -ops.B.T], [ops.B, None]], format="csr")
            self._neumann = ConstrainedSolver(L, self._side_dofs, "neumann_stokes", self.pivot_tol)
        return self._neumann

    # loads

    def stokes_ritz_load(self, fields: AnalyticFields) -> np.ndarray:
        """a_f(u, v) - b(p, v) + (u, v) per velocity DOF."""
        ops = self.ops
        deg = ops.load_degree
        return (
            assemble_strain_load(ops.V, fields.grad_u, ops.mu, deg)
            + assemble_volume_load(ops.V, fields.u, deg)
            - assemble_divergence_load(ops.V, fields.p, deg)
        )

    def divergence_load(self, fields: AnalyticFields) -> np.ndarray:
        """b(q, u) = (q, div u) per pressure DOF."""

        def div(x, y):
            g = np.asarray(fields.grad_u(x, y), dtype=float)
            return np.broadcast_to(g[0, 0] + g[1, 1], np.shape(x))

        return assemble_volume_load(self.ops.Q, div, self.ops.load_degree)

    def sigma_ritz_load(self, fields: AnalyticFields, use_velocity: bool = False) -> np.ndarray:
        """a_s(g, w) + (g, w)_Sigma with g = eta, or u|_Sigma when ``use_velocity``."""
        ops = self.ops
        if use_velocity:

            def g(x, y):
                return fields.u(x, y)

            def dg(x, y):
                return np.asarray(fields.grad_u(x, y), dtype=float)[:, 0]

        else:
            g, dg = fields.eta, fields.deta
        return assemble_as_load(ops.S, g, dg, ops.C0, ops.C1) + assemble_trace_load(ops.S, g)

    def residual(self, u_h: np.ndarray, p_h: np.ndarray, fields: AnalyticFields) -> np.ndarray:
        """G(v) = a_f(u_h - u, v) - b(p_h - p, v) + (u_h - u, v) per velocity DOF."""
        ops = self.ops
        return (ops.Af + ops.M) @ u_h - ops.B.T @ p_h - self.stokes_ritz_load(fields)

    def extension_transpose(self, G: np.ndarray, extension: str = "zero") -> np.ndarray:
        """E^T G for a velocity residual, E the zero-interior or discrete harmonic extension."""
        if extension not in EXTENSIONS:
            raise ValueError(f"Unknown extension '{extension}', expected one of {EXTENSIONS}")
        ops = self.ops
        out = ops.R @ G
        if extension == "harmonic":
            K = (ops.Af + ops.M).tocsr()
            inner = self._interior_dofs
            if self._harmonic is None:
                self._harmonic = factorize(K[inner][:, inner], "harmonic_extension", self.pivot_tol)
            # E w = R^T w - I_inner K_ii^-1 K_i,Sigma w
            z = self._harmonic.solve(G[inner])
            K_sigma_inner = K[self._sigma_dofs][:, inner]
            out = out - K_sigma_inner @ z
        return out

    # projections

    def ritz_RhS(self, fields: AnalyticFields, use_velocity: bool = False) -> np.ndarray:
        """Structure Ritz projection of eta (or of u|_Sigma)."""
        return self.sigma_solver.solve(self.sigma_ritz_load(fields, use_velocity))

    def ritz_RhD(
        self,
        fields: AnalyticFields,
        sigma_values: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Dirichlet Stokes-Ritz projection of (u, p).

        Args:
            fields: Analytic u, grad u and p
            sigma_values: Trace data overriding P~ R^S(u|_Sigma), projected by P~

        Returns:
            (velocity coefficients, pressure coefficients); the pressure has the mean of p
        """
        ops = self.ops
        if sigma_values is None:
            sigma_values = self.ritz_RhS(fields, use_velocity=True)
        boundary = tilde_P(sigma_values, self.nh)

        prescribed = np.zeros(ops.n_u + ops.n_p + 1)
        prescribed[: ops.n_u] = ops.V.interpolate(fields.u)
        prescribed[self._sigma_dofs] = boundary

        rhs = np.concatenate(
            [
                self.stokes_ritz_load(fields),
                self.divergence_load(fields),
                [self._integral_of_p(fields)],
            ]
        )
        x = self.dirichlet_solver.solve(rhs, prescribed)
        return x[: ops.n_u], x[ops.n_u : ops.n_u + ops.n_p]

    def _integral_of_p(self, fields: AnalyticFields) -> float:
        """Integral of the analytic pressure over Omega."""
        tab = self.ops.Q.tabulate_cells(self.ops.load_degree)
        values = np.asarray(fields.p(tab.points[:, 0], tab.points[:, 1]), dtype=float)
        values = np.broadcast_to(values, (tab.size,))
        return float(tab.weights @ values)

    def sigma_solve(
        self,
        fields: AnalyticFields,
        u_h: np.ndarray,
        p_h: np.ndarray,
        residual_fields: AnalyticFields,
        use_velocity: bool = False,
        extension: str = "zero",
    ) -> np.ndarray:
        """Solve (A_s + M_S) x = a_s(g, .) + (g, .)_S - E^T G(u_h, p_h; residual_fields)."""
        G = self.residual(u_h, p_h, residual_fields)
        rhs = self.sigma_ritz_load(fields, use_velocity) - self.extension_transpose(G, extension)
        return self.sigma_solver.solve(rhs)

    def initial_Rsh_eta(self, fields0: AnalyticFields, extension: str = "zero") -> np.ndarray:
        """R_sh eta(0), built from R^D of (u(0), p(0))."""
        u_d, p_d = self.ritz_RhD(fields0)
        return self.sigma_solve(fields0, u_d, p_d, fields0, extension=extension)

    def initial_Rh_eta(
        self,
        fields0: AnalyticFields,
        rates0: AnalyticFields,
        extension: str = "zero",
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """R_h eta(0) with the matching R_h u(0) and R_h p(0).

        Args:
            fields0: u, p and eta at t = 0
            rates0: Time derivatives of u and p at t = 0
            extension: Extension of trace tests to the bulk

        Returns:
            (R_h eta(0), R_h u(0), R_h p(0))
        """
        ut_d, pt_d = self.ritz_RhD(rates0)
        rsh_u = self.sigma_solve(
            fields0, ut_d, pt_d, rates0, use_velocity=True, extension=extension
        )
        u0, p0 = self.ritz_RhD(fields0, sigma_values=rsh_u)
        eta0 = self.sigma_solve(fields0, u0, p0, fields0, extension=extension)
        return eta0, u0, p0

    # coupled evolution

    def neumann_stokes(
        self, phi: np.ndarray, ell: np.ndarray, side_values: Optional[np.ndarray] = None
    ):
        """Solve a_f(u, v) - b(p, v) + (u, v) = phi(v), b(q, u) = ell(q)."""
        ops = self.ops
        prescribed = None
        if side_values is not None:
            prescribed = np.concatenate([side_values, np.zeros(ops.n_p)])
        x = self.neumann_solver.solve(np.concatenate([phi, ell]), prescribed)
        return x[: ops.n_u], x[ops.n_u :]

    def _evolution_data(self, fields: AnalyticFields) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        ops = self.ops
        phi = self.stokes_ritz_load(fields) + ops.R.T @ self.sigma_ritz_load(fields)
        return phi, self.divergence_load(fields), ops.V.interpolate(fields.u)

    def _evolve_rhs(self, fields: AnalyticFields, eta: np.ndarray):
        ops = self.ops
        phi, ell, side = self._evolution_data(fields)
        phi = phi - ops.R.T @ ((ops.A_s + ops.M_sigma) @ eta)
        u, p = self.neumann_stokes(phi, ell, side)
        return ops.R @ u, u, p, ell

    def ritz_evolve(
        self,
        trajectory: FieldTrajectory,
        T: float,
        ode_steps: int,
        rates0: Optional[AnalyticFields] = None,
        eta0: Optional[np.ndarray] = None,
    ) -> RitzTrajectory:
        """Integrate the coupled Ritz projection on [0, T] with classical RK4.

        The initial displacement is ``eta0`` if given, else R_h eta(0) when the initial
        time derivatives ``rates0`` are known, else R_sh eta(0).
        """
        if ode_steps < 1:
            raise ValueError(f"ode_steps must be >= 1, got {ode_steps}")
        if eta0 is None:
            if rates0 is not None:
                eta0, _, _ = self.initial_Rh_eta(trajectory(0.0), rates0)
            else:
                eta0 = self.initial_Rsh_eta(trajectory(0.0))
        dt = T / ode_steps
        times = np.linspace(0.0, T, ode_steps + 1)
        result = RitzTrajectory(times=times)
        y = np.asarray(eta0, dtype=float)

        for k, t in enumerate(times):
            k1, u, p, ell = self._evolve_rhs(trajectory(t), y)
            self._record(result, trajectory(t), y, u, p, ell)
            if k == ode_steps:
                break
            k2 = self._evolve_rhs(trajectory(t + dt / 2), y + dt / 2 * k1)[0]
            k3 = self._evolve_rhs(trajectory(t + dt / 2), y + dt / 2 * k2)[0]
            k4 = self._evolve_rhs(trajectory(t + dt), y + dt * k3)[0]
            y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

        logger.info(
            f"Ritz evolution on h={self.ops.mesh.h:.4g}: {ode_steps} RK4 steps, "
            f"max combined error {result.max_error():.4e}"
        )
        return result

    def _record(self, result: RitzTrajectory, fields: AnalyticFields, eta, u, p, ell) -> None:
        ops = self.ops
        h = ops.mesh.h
        errors = {
            "eta_L2Sigma": sigma_l2_error(ops.S, eta, fields.eta),
            "u_L2": l2_error(ops.V, u, fields.u, ops.load_degree),
            "u_L2Sigma": sigma_l2_error(ops.S, ops.R @ u, fields.u),
            "p_L2": l2_error(ops.Q, p, fields.p, ops.load_degree),
        }
        errors["combined"] = (
            errors["eta_L2Sigma"] + errors["u_L2"] + errors["u_L2Sigma"] + h * errors["p_L2"]
        )
        scale = max(float(np.abs(ell).max()), 1.0)
        result.eta.append(eta)
        result.u.append(u)
        result.p.append(p)
        result.errors.append(errors)
        result.divergence_residual.append(float(np.abs(ops.B @ u - ell).max()) / scale)

    # Neumann-to-Dirichlet map

    def ntd_symmetry_check(self, trials: int = 20, seed: int = 0) -> NtDCheck:
        """Symmetry and positivity of z -> (R u_z) with u_z the Neumann-Stokes response.

        The asymmetry |(z, Nf) - (f, Nz)| is relative to sqrt((z, Nz) (f, Nf)).
        """
        ops = self.ops
        rng = np.random.default_rng(seed)
        zeros_p = np.zeros(ops.n_p)

        def respond(z):
            u, _ = self.neumann_stokes(ops.R.T @ (ops.M_sigma @ z), zeros_p)
            return u

        K = ops.Af + ops.M
        max_asym, min_quad, max_ident = 0.0, np.inf, 0.0
        for _ in range(trials):
            z = rng.standard_normal(ops.S.n_dofs)
            f = rng.standard_normal(ops.S.n_dofs)
            u_z, u_f = respond(z), respond(f)
            a = float(z @ (ops.M_sigma @ (ops.R @ u_f)))
            b = float(f @ (ops.M_sigma @ (ops.R @ u_z)))
            quad = float(z @ (ops.M_sigma @ (ops.R @ u_z)))
            quad_f = float(f @ (ops.M_sigma @ (ops.R @ u_f)))
            # |(z, Nf)| <= sqrt((z, Nz) (f, Nf)) for positive N
            scale = np.sqrt(max(quad, 0.0) * max(quad_f, 0.0))
            max_asym = max(max_asym, abs(a - b) / max(scale, np.finfo(float).tiny))
            energy = float(u_z @ (K @ u_z))
            min_quad = min(min_quad, quad)
            max_ident = max(max_ident, abs(quad - energy) / max(abs(energy), np.finfo(float).tiny))
        logger.info(
            f"NtD check over {trials} pairs: max asymmetry {max_asym:.3e}, "
            f"min (z, Nz) {min_quad:.3e}"
        )
        return NtDCheck(
            max_asymmetry=max_asym,
            min_quadratic=float(min_quad),
            max_identity_error=max_ident,
            trials=trials,
        )


def supercloseness_errors(
    projector: RitzProjector, fields0: AnalyticFields, rates0: AnalyticFields
) -> float:
    """||R_sh eta(0) - R_h eta(0)||_{H1(Sigma)}."""
    rsh = projector.initial_Rsh_eta(fields0)
    rh, _, _ = projector.initial_Rh_eta(fields0, rates0)
    return sigma_h1_norm(projector.ops.S, rsh - rh)


def dirichlet_ritz_errors(projector: RitzProjector, fields: AnalyticFields) -> Dict[str, float]:
    """L2 and H1 errors of R^D, with the pressure L2 error."""
    ops = projector.ops
    u_h, p_h = projector.ritz_RhD(fields)
    return {
        "u_L2": l2_error(ops.V, u_h, fields.u, ops.load_degree),
        "u_H1": h1_seminorm_error(ops.V, u_h, fields.grad_u, ops.load_degree),
        "p_L2": l2_error(ops.Q, p_h, fields.p, ops.load_degree),
    }
