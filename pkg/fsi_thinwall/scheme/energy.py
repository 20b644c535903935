"""Discrete energy, dissipation and the per-step stability monitor."""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np

from fsi_thinwall.forms import FsiOperators
from fsi_thinwall.scheme.base import BaseStepper, PhysicalParams, SchemeState, beta0, make_state

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyReport:
    """Energy balance of one step.

    Attributes:
        step: Step index n
        time: t_n
        E0: Energy of the new state
        E1: Dissipation of the step
        beta0: Dissipation constant of beta
        per_step_residual: E0(n) - E0(n-1) + tau E1(n), nonpositive for a stable step
        monolithic: Kinetic plus elastic energy of the new state
    """

    step: int
    time: float
    E0: float
    E1: float
    beta0: float
    per_step_residual: float
    monolithic: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _quad(A, x: np.ndarray) -> float:
    return float(x @ (A @ x))


def energy_E0(ops: FsiOperators, params: PhysicalParams, tau: float, state: SchemeState) -> float:
    """E0 = rho_f/2 |u|^2 + 1/2 |eta|_s^2 + tau^2 (1+beta)/(2 rs) |sigma n|_S^2 + rs/2 |u|_S^2."""
    rs = params.rho_eps
    u_sigma = ops.R @ state.u
    return (
        0.5 * params.rho_f * _quad(ops.M, state.u)
        + 0.5 * _quad(ops.A_s, state.eta)
        + tau**2 * (1.0 + params.beta) / (2.0 * rs) * ops.sigma_norm_squared(state.traction)
        + 0.5 * rs * _quad(ops.M_sigma, u_sigma)
    )


def energy_E1(
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    state: SchemeState,
    state_prev: SchemeState,
) -> float:
    """Dissipation of the step from ``state_prev`` to ``state``."""
    rs = params.rho_eps
    b0 = beta0(params.beta)
    R = ops.R
    du = state.u - state_prev.u
    slip_prev = state.s - R @ state_prev.u
    slip = state.s - R @ state.u
    dsigma = state.traction - state_prev.traction
    return (
        _quad(ops.Af, state.u)
        + params.rho_f / (2.0 * tau) * _quad(ops.M, du)
        + rs / (2.0 * tau) * _quad(ops.M_sigma, slip_prev)
        + rs * b0 / (2.0 * tau) * _quad(ops.M_sigma, slip)
        + tau * b0 / (2.0 * rs) * ops.sigma_norm_squared(dsigma)
        + 0.5 * tau * _quad(ops.A_s, state.s)
    )


def monolithic_energy(ops: FsiOperators, params: PhysicalParams, state: SchemeState) -> float:
    """rho_f/2 |u|^2 + 1/2 |eta|_s^2 + rs/2 |u|_S^2."""
    u_sigma = ops.R @ state.u
    return (
        0.5 * params.rho_f * _quad(ops.M, state.u)
        + 0.5 * _quad(ops.A_s, state.eta)
        + 0.5 * params.rho_eps * _quad(ops.M_sigma, u_sigma)
    )


def energies(
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    state: SchemeState,
    state_prev: SchemeState,
) -> EnergyReport:
    """Energy report of two consecutive states.

    Args:
        ops: Spatial operators
        params: Physical parameters
        tau: Time step
        state: State after step n
        state_prev: State after step n - 1

    Returns:
        EnergyReport
    """
    E0 = energy_E0(ops, params, tau, state)
    E1 = energy_E1(ops, params, tau, state, state_prev)
    E0_prev = energy_E0(ops, params, tau, state_prev)
    return EnergyReport(
        step=state.step,
        time=state.time,
        E0=E0,
        E1=E1,
        beta0=beta0(params.beta),
        per_step_residual=E0 - E0_prev + tau * E1,
        monolithic=monolithic_energy(ops, params, state),
    )


class EnergyMonitor:
    """Stepper callback recording energy reports and flagging unstable steps.

    A step violates the monitor when its residual exceeds ``rtol * E0(0)``. With
    ``check=False`` the reports are only recorded, for runs driven by boundary inflow.

    Attributes:
        reports: One report per observed step
        violations: Steps whose residual exceeded the tolerance
    """

    def __init__(
        self,
        ops: FsiOperators,
        params: PhysicalParams,
        tau: float,
        initial: SchemeState,
        rtol: float = 1e-10,
        check: bool = True,
    ):
        self.ops = ops
        self.params = params
        self.tau = tau
        self.rtol = rtol
        self.check = check
        self.initial_energy = energy_E0(ops, params, tau, initial)
        self.reports: List[EnergyReport] = []
        self.violations: List[int] = []

    @property
    def tolerance(self) -> float:
        return self.rtol * self.initial_energy

    def __call__(self, state: SchemeState, state_prev: SchemeState) -> None:
        report = energies(self.ops, self.params, self.tau, state, state_prev)
        self.reports.append(report)
        logger.debug(
            f"Step {report.step}: E0={report.E0:.6e}, E1={report.E1:.6e}, "
            f"residual={report.per_step_residual:.3e}"
        )
        if self.check and report.per_step_residual > self.tolerance:
            self.violations.append(report.step)
            logger.warning(
                f"Energy residual {report.per_step_residual:.3e} exceeds tolerance "
                f"{self.tolerance:.3e} at step {report.step}"
            )

    @property
    def stable(self) -> bool:
        return not self.violations

    def max_residual(self) -> Optional[float]:
        if not self.reports:
            return None
        return max(r.per_step_residual for r in self.reports)

    def rows(self) -> List[Dict[str, float]]:
        return [r.to_dict() for r in self.reports]


def random_initial_state(ops: FsiOperators, seed: int = 0) -> SchemeState:
    """Random (u, p, eta) with homogeneous Dirichlet DOFs, for stability runs."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(ops.n_u)
    u[ops.V.constrained_dofs] = 0.0
    p = rng.standard_normal(ops.n_p)
    eta = rng.standard_normal(ops.S.n_dofs)
    return make_state(ops, u, p, eta)


def stability_run(
    stepper: BaseStepper, n_steps: int, seed: int = 0, rtol: float = 1e-10
) -> EnergyMonitor:
    """Run ``n_steps`` from random data without sources and monitor the energy balance."""
    initial = random_initial_state(stepper.ops, seed)
    monitor = EnergyMonitor(stepper.ops, stepper.params, stepper.tau, initial, rtol)
    stepper.run(initial, n_steps, monitor)
    logger.info(
        f"Stability run of '{stepper.name}' (beta={stepper.params.beta}, tau={stepper.tau}): "
        f"{n_steps} steps, max residual {monitor.max_residual():.3e}, "
        f"tolerance {monitor.tolerance:.3e}"
    )
    return monitor
