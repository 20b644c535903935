"""Base interfaces for time steppers and problem data."""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from fsi_thinwall.fem.space import TraceSpace
from fsi_thinwall.forms import FsiOperators
from fsi_thinwall.linalg import PIVOT_TOL, fingerprint

logger = logging.getLogger(__name__)

STRUCTURE_ENDS = ("natural", "pinned", "periodic")


class TractionCacheError(RuntimeError):
    """Raised when cached tractions no longer belong to the state's (u, p)."""


@dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters of the coupled problem.

    Attributes:
        rho_f: Fluid density
        mu: Fluid viscosity
        rho_s: Structure density
        eps_s: Wall thickness
        C0: Structure stiffness coefficient
        C1: Structure reaction coefficient
        beta: Traction stabilization parameter
    """

    rho_f: float = 1.0
    mu: float = 1.0
    rho_s: float = 1.0
    eps_s: float = 1.0
    C0: float = 1.0
    C1: float = 1.0
    beta: float = 0.5

    def __post_init__(self):
        for name in ("rho_f", "mu", "rho_s", "eps_s", "C0", "C1", "beta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"Physical parameter {name} must be finite and >= 0, got {value}")
        if self.mu <= 0:
            raise ValueError(f"Viscosity must be positive, got mu={self.mu}")
        if self.rho_s * self.eps_s <= 0:
            raise ValueError(f"rho_s * eps_s must be positive, got {self.rho_s * self.eps_s}")

    @property
    def rho_eps(self) -> float:
        return self.rho_s * self.eps_s

    def stabilization(self, tau: float) -> float:
        """Coefficient tau (1 + beta) / (rho_s eps_s) of the traction Gram block."""
        return tau * (1.0 + self.beta) / self.rho_eps


def beta0(beta: float) -> float:
    """Dissipation constant beta_0 = 1 - (sqrt(4 + beta^2) - beta) / 2.

    Raises:
        ValueError: If beta is negative
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return 1.0 - (math.sqrt(4.0 + beta * beta) - beta) / 2.0


@dataclass(frozen=True, eq=False)
class SchemeState:
    """Discrete fields after step n.

    Attributes:
        step: Step index n
        time: t_n
        u: Velocity coefficients
        p: Pressure coefficients
        eta: Sigma displacement (trace coefficients)
        s: Sigma velocity (trace coefficients)
        traction: sigma(u, p) n at the Sigma points, component-major
        traction_key: Fingerprint of the (u, p) the tractions were computed from
    """

    step: int
    time: float
    u: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    s: np.ndarray
    traction: np.ndarray
    traction_key: str

    def fingerprint(self) -> str:
        return fingerprint(self.u, self.p, self.eta, self.s, self.traction)

    def with_fields(self, **changes) -> "SchemeState":
        return replace(self, **changes)


def make_state(
    ops: FsiOperators,
    u: np.ndarray,
    p: np.ndarray,
    eta: np.ndarray,
    s: Optional[np.ndarray] = None,
    step: int = 0,
    time: float = 0.0,
) -> SchemeState:
    """Build a state with a fresh traction cache."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    return SchemeState(
        step=step,
        time=float(time),
        u=u,
        p=p,
        eta=np.asarray(eta, dtype=float),
        s=ops.R @ u if s is None else np.asarray(s, dtype=float),
        traction=ops.traction_values(u, p),
        traction_key=fingerprint(u, p),
    )


def zero_state(ops: FsiOperators, time: float = 0.0) -> SchemeState:
    return make_state(ops, np.zeros(ops.n_u), np.zeros(ops.n_p), np.zeros(ops.S.n_dofs), time=time)


class ProblemData(ABC):
    """Source terms, boundary loads and Dirichlet data of a run."""

    @abstractmethod
    def fluid_load(self, ops: FsiOperators, t: float) -> np.ndarray:
        """(f_f(t), v) per velocity DOF."""

    @abstractmethod
    def structure_load(self, ops: FsiOperators, t: float) -> np.ndarray:
        """(f_s(t), w)_Sigma per trace DOF."""

    def boundary_load(self, ops: FsiOperators, t: float) -> np.ndarray:
        """Natural boundary loads on the left/right sides per velocity DOF."""
        return np.zeros(ops.n_u)

    def dirichlet_values(self, ops: FsiOperators, t: float) -> np.ndarray:
        """Full-length velocity vector whose constrained entries hold the Dirichlet data."""
        return np.zeros(ops.n_u)


class ZeroProblem(ProblemData):
    """No sources, no inflow and homogeneous Dirichlet data."""

    def fluid_load(self, ops: FsiOperators, t: float) -> np.ndarray:
        return np.zeros(ops.n_u)

    def structure_load(self, ops: FsiOperators, t: float) -> np.ndarray:
        return np.zeros(ops.S.n_dofs)


def structure_end_map(S: TraceSpace, mode: str) -> sp.csr_matrix:
    """Prolongation from reduced to full trace DOFs for a structure end condition.

    Args:
        S: Trace space
        mode: "natural" (no constraint), "pinned" (zero at both ends of each Sigma line)
            or "periodic" (left and right ends of each line identified)

    Returns:
        (n_trace_dofs, n_reduced) sparse matrix
    """
    if mode not in STRUCTURE_ENDS:
        raise ValueError(
            f"Unknown structure end condition '{mode}', expected one of {STRUCTURE_ENDS}"
        )
    n = S.n
    column = np.arange(n)
    keep = np.ones(n, dtype=bool)
    ends = S.endpoint_nodes()
    xy = S.node_coords
    if mode == "pinned":
        keep[ends] = False
    elif mode == "periodic":
        for k in ends:
            if np.isclose(xy[k, 0], S.V.mesh.lx):
                partner = [
                    j
                    for j in ends
                    if np.isclose(xy[j, 0], 0.0) and np.isclose(xy[j, 1], xy[k, 1])
                ]
                column[k] = partner[0]
    kept = np.flatnonzero(keep)
    reduced = {int(c): i for i, c in enumerate(sorted(set(column[kept].tolist())))}
    rows = kept
    cols = np.array([reduced[int(column[k])] for k in kept], dtype=np.int64)
    scalar = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, len(reduced)))
    return sp.block_diag([scalar] * S.components, format="csr")


class BaseStepper(ABC):
    """Common driver of the time steppers.

    A stepper owns the factorized systems of one run; states are immutable and each
    ``advance`` returns a new one.

    Attributes:
        ops: Spatial operators
        params: Physical parameters
        tau: Time step
        problem: Loads and Dirichlet data
        structure_ends: Structure end condition
    """

    name = "base"

    def __init__(
        self,
        ops: FsiOperators,
        params: PhysicalParams,
        tau: float,
        problem: Optional[ProblemData] = None,
        structure_ends: str = "natural",
        pivot_tol: float = PIVOT_TOL,
    ):
        if not tau > 0:
            raise ValueError(f"Time step must be positive, got tau={tau}")
        if ops.mesh.periodic and structure_ends == "pinned":
            raise ValueError("Pinned structure ends need a non-periodic mesh")
        self.ops = ops
        self.params = params
        self.tau = float(tau)
        self.problem = problem or ZeroProblem()
        self.structure_ends = structure_ends
        self.pivot_tol = pivot_tol
        self.end_map = structure_end_map(ops.S, structure_ends)
        self._built = False
        logger.info(
            f"Initializing {self.__class__.__name__}: tau={self.tau:.4g}, beta={params.beta}, "
            f"structure ends={structure_ends}"
        )

    @abstractmethod
    def build(self) -> None:
        """Assemble and factor the step systems.

        Called lazily by ``advance``; subclasses set ``self._built``.
        """

    def is_built(self) -> bool:
        return self._built

    def ensure_built(self) -> None:
        if not self._built:
            self.build()

    def initial_state(
        self, u0: np.ndarray, p0: np.ndarray, eta0: np.ndarray, t0: float = 0.0
    ) -> SchemeState:
        """State at t0 with tractions computed from (u0, p0)."""
        return make_state(self.ops, u0, p0, eta0, time=t0)

    def refresh(
        self, state: SchemeState, u: np.ndarray, p: np.ndarray, eta: np.ndarray, s: np.ndarray
    ) -> SchemeState:
        """Next state, with the traction cache recomputed from (u, p)."""
        return make_state(self.ops, u, p, eta, s=s, step=state.step + 1, time=state.time + self.tau)

    def dirichlet_vector(self, t: float) -> np.ndarray:
        """Full-length (u, p) vector holding the Dirichlet data at t on constrained DOFs."""
        g = np.zeros(self.ops.n_u + self.ops.n_p)
        g[: self.ops.n_u] = self.problem.dirichlet_values(self.ops, t)
        return g

    @abstractmethod
    def advance(self, state: SchemeState) -> SchemeState:
        """Advance one time step."""

    def run(
        self,
        state: SchemeState,
        n_steps: int,
        callback: Optional[Callable[[SchemeState, SchemeState], None]] = None,
    ) -> SchemeState:
        """Advance ``n_steps`` steps, calling ``callback(new, previous)`` after each."""
        for _ in range(int(n_steps)):
            new = self.advance(state)
            if callback is not None:
                callback(new, state)
            state = new
        return state
