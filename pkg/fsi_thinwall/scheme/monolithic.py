"""Monolithic backward-Euler reference stepper.

The structure velocity is the fluid velocity on Sigma and structure tests are velocity
traces, so a single saddle-point solve per step advances the whole system:

    rho_f/tau (u - u_prev, v) + a_f(u, v) - b(p, v) + b(q, u)
    + rs/tau (u - u_prev, v)_S + a_s(eta_prev + tau u, v)_S = (f_f, v) + (f_s, v)_S

followed by eta = eta_prev + tau u|_S.
"""

import logging
from typing import Optional

import numpy as np
import scipy.sparse as sp

from fsi_thinwall.forms import FsiOperators
from fsi_thinwall.linalg import PIVOT_TOL, ConstrainedSolver
from fsi_thinwall.scheme.base import BaseStepper, PhysicalParams, ProblemData, SchemeState

logger = logging.getLogger(__name__)


def monolithic_constrained_dofs(ops: FsiOperators, structure_ends: str) -> np.ndarray:
    """Velocity DOFs fixed by the side conditions and the structure end condition.

    Raises:
        ValueError: If periodic structure ends are requested on a non-periodic mesh
    """
    constrained = ops.V.constrained_dofs
    if structure_ends == "periodic" and not ops.mesh.periodic:
        raise ValueError(
            "Monolithic stepper couples structure ends through the velocity; use a periodic mesh"
        )
    if structure_ends == "pinned":
        S = ops.S
        ends = S.nodes[S.endpoint_nodes()]
        constrained = np.union1d(constrained, ops.V.node_dofs(ends))
    return constrained


def build_monolithic_system(
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    constrained: Optional[np.ndarray] = None,
    pivot_tol: float = PIVOT_TOL,
) -> ConstrainedSolver:
    """Assemble and factor the coupled backward-Euler matrix."""
    if not tau > 0:
        raise ValueError(f"Time step must be positive, got tau={tau}")
    R = ops.R
    velocity = (
        params.rho_f / tau * ops.M
        + ops.Af
        + params.rho_eps / tau * (R.T @ ops.M_sigma @ R)
        + tau * (R.T @ ops.A_s @ R)
    )
    L = sp.bmat([[velocity, -ops.B.T], [ops.B, None]], format="csr")
    if constrained is None:
        constrained = ops.V.constrained_dofs
    return ConstrainedSolver(L, constrained, "monolithic", pivot_tol)


class MonolithicStepper(BaseStepper):
    """Fully coupled backward-Euler stepper used as a reference solution."""

    name = "monolithic"

    def __init__(
        self,
        ops: FsiOperators,
        params: PhysicalParams,
        tau: float,
        problem: Optional[ProblemData] = None,
        structure_ends: str = "natural",
        pivot_tol: float = PIVOT_TOL,
    ):
        super().__init__(ops, params, tau, problem, structure_ends, pivot_tol)
        self.constrained = monolithic_constrained_dofs(ops, structure_ends)
        self._solver: Optional[ConstrainedSolver] = None

    def build(self) -> None:
        self._solver = build_monolithic_system(
            self.ops, self.params, self.tau, self.constrained, self.pivot_tol
        )
        self._built = True
        logger.info(f"Factored monolithic system: n={self._solver.n}")

    def advance(self, state: SchemeState) -> SchemeState:
        """One backward-Euler step of the coupled system."""
        self.ensure_built()
        ops, params, tau = self.ops, self.params, self.tau
        t = state.time + tau
        R = ops.R
        u_sigma = R @ state.u
        rhs_u = (
            params.rho_f / tau * (ops.M @ state.u)
            + params.rho_eps / tau * (R.T @ (ops.M_sigma @ u_sigma))
            - R.T @ (ops.A_s @ state.eta)
            + self.problem.fluid_load(ops, t)
            + self.problem.boundary_load(ops, t)
            + R.T @ self.problem.structure_load(ops, t)
        )
        rhs = np.concatenate([rhs_u, np.zeros(ops.n_p)])
        x = self._solver.solve(rhs, self.dirichlet_vector(t))
        u, p = x[: ops.n_u], x[ops.n_u :]
        s = R @ u
        eta = state.eta + tau * s
        new = self.refresh(state, u, p, eta, s)
        logger.debug(f"Monolithic step {new.step}: t={new.time:.6g}")
        return new
