"""Stabilized kinematically coupled stepper.

Each step first advances the structure with the traction of the previous fluid state,
then solves the fluid with a Robin-type interface coupling to the new structure velocity:

Structure, for all trace tests w:
    rs/tau (s - u_prev, w)_S + a_s(eta_prev + tau s, w) = -(sigma_prev n, w)_S + (f_s, w)_S

Fluid, for all tests (v, q), with c = tau (1 + beta) / rs:
    rho_f/tau (u - u_prev, v) + a_f(u, v) - b(p, v) + b(q, u) + rs/tau (u - s, v)_S
    = (sigma_prev n, v)_S - (u - s, sigma(v, q) n)_S - c ((sigma - sigma_prev) n, sigma(v, q) n)_S

where rs = rho_s eps_s and (., .)_S integrates over Sigma.
"""

import logging
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from fsi_thinwall.forms import FsiOperators
from fsi_thinwall.linalg import PIVOT_TOL, ConstrainedSolver, Factorization, factorize, fingerprint
from fsi_thinwall.scheme.base import (
    BaseStepper,
    PhysicalParams,
    ProblemData,
    SchemeState,
    TractionCacheError,
)

logger = logging.getLogger(__name__)

PRESSURE_GAUGES = ("none", "mean_zero")


def check_traction_cache(state: SchemeState) -> None:
    """Raise TractionCacheError unless the cached tractions belong to (u, p)."""
    if state.traction_key != fingerprint(state.u, state.p):
        raise TractionCacheError(
            f"Traction cache of step {state.step} does not match its (u, p) coefficients"
        )


def build_solid_system(
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    end_map: Optional[sp.spmatrix] = None,
    pivot_tol: float = PIVOT_TOL,
) -> Tuple[sp.csr_matrix, Factorization]:
    """Assemble and factor the structure step matrix rs/tau M_S + tau A_s.

    Args:
        ops: Spatial operators
        params: Physical parameters
        tau: Time step
        end_map: Prolongation of the structure end condition (identity if None)
        pivot_tol: Relative pivot threshold

    Returns:
        (reduced matrix, factorization)

    Raises:
        ValueError: If tau is not positive
        SingularSystemError: If the matrix is singular
    """
    if not tau > 0:
        raise ValueError(f"Time step must be positive, got tau={tau}")
    A = params.rho_eps / tau * ops.M_sigma + tau * ops.A_s
    if end_map is not None:
        A = end_map.T @ A @ end_map
    A = sp.csr_matrix(A)
    return A, factorize(A, "solid", pivot_tol)


def step_solid(
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    state: SchemeState,
    factorization: Factorization,
    structure_load: Optional[np.ndarray] = None,
    end_map: Optional[sp.spmatrix] = None,
) -> np.ndarray:
    """Solve the structure step for the new Sigma velocity s.

    Raises:
        TractionCacheError: If the state's traction cache is stale
    """
    check_traction_cache(state)
    rhs = (
        params.rho_eps / tau * (ops.M_sigma @ (ops.R @ state.u))
        - ops.A_s @ state.eta
        - ops.traction_on_trace(state.traction)
    )
    if structure_load is not None:
        rhs = rhs + structure_load
    if end_map is None:
        return factorization.solve(rhs)
    return end_map @ factorization.solve(end_map.T @ rhs)


def _mean_value_vector(ops: FsiOperators) -> np.ndarray:
    tab = ops.Q.tabulate_cells(2 * ops.Q.kind.degree)
    return tab.values.T @ tab.weights


def build_fluid_system(
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    constrained: Optional[np.ndarray] = None,
    pressure_gauge: str = "none",
    pivot_tol: float = PIVOT_TOL,
) -> Tuple[sp.csr_matrix, ConstrainedSolver]:
    """Assemble and factor the nonsymmetric fluid step matrix.

    Unknowns are stacked as ``[u; p]``. With ``pressure_gauge="mean_zero"`` a Lagrange
    multiplier for the pressure mean is appended as the last unknown.

    Args:
        ops: Spatial operators
        params: Physical parameters
        tau: Time step
        constrained: Velocity DOFs with Dirichlet data (default: the velocity space's)
        pressure_gauge: "none" or "mean_zero"
        pivot_tol: Relative pivot threshold

    Returns:
        (full matrix, solver eliminating the constrained DOFs)
    """
    if not tau > 0:
        raise ValueError(f"Time step must be positive, got tau={tau}")
    if pressure_gauge not in PRESSURE_GAUGES:
        raise ValueError(
            f"Unknown pressure gauge '{pressure_gauge}', expected one of {PRESSURE_GAUGES}"
        )
    rs = params.rho_eps
    R = ops.R
    velocity = (
        params.rho_f / tau * ops.M + ops.Af + rs / tau * (R.T @ ops.M_sigma @ R)
    )
    saddle = sp.bmat([[velocity, -ops.B.T], [ops.B, None]], format="csr")
    trace_of_trial = sp.hstack([R, sp.csr_matrix((R.shape[0], ops.n_p))], format="csr")
    L = saddle + ops.K_wsigma @ trace_of_trial + params.stabilization(tau) * ops.K_sigmasigma
    L = sp.csr_matrix(L)
    if pressure_gauge == "mean_zero":
        m = np.concatenate([np.zeros(ops.n_u), _mean_value_vector(ops)])
        L = sp.bmat(
            [[L, sp.csr_matrix(m[:, None])], [sp.csr_matrix(m[None, :]), None]], format="csr"
        )
    if constrained is None:
        constrained = ops.V.constrained_dofs
    return L, ConstrainedSolver(L, constrained, "fluid", pivot_tol)


def step_fluid(
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    state: SchemeState,
    s_new: np.ndarray,
    solver: ConstrainedSolver,
    fluid_load: Optional[np.ndarray] = None,
    prescribed: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Solve the fluid step given the new Sigma velocity.

    Args:
        ops: Spatial operators
        params: Physical parameters
        tau: Time step
        state: Previous state (its cached tractions are used)
        s_new: Sigma velocity of the structure step
        solver: Factored fluid system
        fluid_load: Volume and natural boundary loads per velocity DOF
        prescribed: Full-length [u; p] vector with the Dirichlet data

    Returns:
        (u, p) coefficients
    """
    check_traction_cache(state)
    rs = params.rho_eps
    R = ops.R
    sigma_prev = state.traction
    rhs_u = (
        params.rho_f / tau * (ops.M @ state.u)
        + rs / tau * (R.T @ (ops.M_sigma @ s_new))
        + R.T @ ops.traction_on_trace(sigma_prev)
    )
    if fluid_load is not None:
        rhs_u = rhs_u + fluid_load
    rhs = np.concatenate([rhs_u, np.zeros(ops.n_p)])
    rhs += ops.K_wsigma @ s_new + params.stabilization(tau) * ops.traction_on_tests(sigma_prev)
    if solver.n > rhs.size:
        rhs = np.concatenate([rhs, np.zeros(solver.n - rhs.size)])
        if prescribed is not None:
            prescribed = np.concatenate([prescribed, np.zeros(solver.n - prescribed.size)])
    x = solver.solve(rhs, prescribed)
    return x[: ops.n_u], x[ops.n_u : ops.n_u + ops.n_p]


class PartitionedStepper(BaseStepper):
    """Structure-then-fluid stepper with traction stabilization.

    Attributes:
        pressure_gauge: "none" (default) or "mean_zero"
    """

    name = "partitioned"

    def __init__(
        self,
        ops: FsiOperators,
        params: PhysicalParams,
        tau: float,
        problem: Optional[ProblemData] = None,
        structure_ends: str = "natural",
        pressure_gauge: str = "none",
        pivot_tol: float = PIVOT_TOL,
    ):
        super().__init__(ops, params, tau, problem, structure_ends, pivot_tol)
        if pressure_gauge not in PRESSURE_GAUGES:
            raise ValueError(
                f"Unknown pressure gauge '{pressure_gauge}', expected one of {PRESSURE_GAUGES}"
            )
        self.pressure_gauge = pressure_gauge
        self.solid_matrix: Optional[sp.csr_matrix] = None
        self.fluid_matrix: Optional[sp.csr_matrix] = None
        self._solid: Optional[Factorization] = None
        self._fluid: Optional[ConstrainedSolver] = None

    def build(self) -> None:
        self.solid_matrix, self._solid = build_solid_system(
            self.ops, self.params, self.tau, self.end_map, self.pivot_tol
        )
        self.fluid_matrix, self._fluid = build_fluid_system(
            self.ops,
            self.params,
            self.tau,
            pressure_gauge=self.pressure_gauge,
            pivot_tol=self.pivot_tol,
        )
        self._built = True
        logger.info(
            f"Factored partitioned systems: solid n={self.solid_matrix.shape[0]}, "
            f"fluid n={self.fluid_matrix.shape[0]}"
        )

    def step_solid(self, state: SchemeState, t: float) -> np.ndarray:
        self.ensure_built()
        load = self.problem.structure_load(self.ops, t)
        return step_solid(self.ops, self.params, self.tau, state, self._solid, load, self.end_map)

    def step_fluid(
        self, state: SchemeState, s_new: np.ndarray, t: float
    ) -> Tuple[np.ndarray, np.ndarray]:
        self.ensure_built()
        load = self.problem.fluid_load(self.ops, t) + self.problem.boundary_load(self.ops, t)
        return step_fluid(
            self.ops,
            self.params,
            self.tau,
            state,
            s_new,
            self._fluid,
            load,
            self.dirichlet_vector(t),
        )

    def advance(self, state: SchemeState) -> SchemeState:
        """Structure step, displacement update, fluid step and traction refresh."""
        t = state.time + self.tau
        s = self.step_solid(state, t)
        eta = state.eta + self.tau * s
        u, p = self.step_fluid(state, s, t)
        new = self.refresh(state, u, p, eta, s)
        logger.debug(
            f"Partitioned step {new.step}: t={new.time:.6g}, |u|_max={np.abs(u).max():.4g}"
        )
        return new
