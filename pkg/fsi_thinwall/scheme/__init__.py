"""Time steppers for the coupled fluid/thin-structure problem."""

from fsi_thinwall.scheme.base import (
    STRUCTURE_ENDS,
    BaseStepper,
    PhysicalParams,
    ProblemData,
    SchemeState,
    TractionCacheError,
    ZeroProblem,
    beta0,
    make_state,
    structure_end_map,
    zero_state,
)
from fsi_thinwall.scheme.energy import (
    EnergyMonitor,
    EnergyReport,
    energies,
    monolithic_energy,
    random_initial_state,
    stability_run,
)
from fsi_thinwall.scheme.monolithic import MonolithicStepper
from fsi_thinwall.scheme.partitioned import (
    PartitionedStepper,
    build_fluid_system,
    build_solid_system,
    step_fluid,
    step_solid,
)
from fsi_thinwall.scheme.registry import StepperRegistry, create_stepper, time_self_convergence

__all__ = [
    "STRUCTURE_ENDS",
    "BaseStepper",
    "EnergyMonitor",
    "EnergyReport",
    "MonolithicStepper",
    "PartitionedStepper",
    "PhysicalParams",
    "ProblemData",
    "SchemeState",
    "StepperRegistry",
    "TractionCacheError",
    "ZeroProblem",
    "beta0",
    "build_fluid_system",
    "build_solid_system",
    "create_stepper",
    "energies",
    "make_state",
    "monolithic_energy",
    "random_initial_state",
    "step_fluid",
    "stability_run",
    "step_solid",
    "structure_end_map",
    "time_self_convergence",
    "zero_state",
]
