"""Registry of time steppers by name."""

import logging
from typing import Dict, List, Optional, Type

import numpy as np

from fsi_thinwall.forms import FsiOperators
from fsi_thinwall.scheme.base import BaseStepper, PhysicalParams, ProblemData, SchemeState
from fsi_thinwall.scheme.monolithic import MonolithicStepper
from fsi_thinwall.scheme.partitioned import PartitionedStepper

logger = logging.getLogger(__name__)


class StepperRegistry:
    """Maps stepper names to their classes."""

    _steppers: Dict[str, Type[BaseStepper]] = {
        PartitionedStepper.name: PartitionedStepper,
        MonolithicStepper.name: MonolithicStepper,
    }

    @classmethod
    def register(cls, stepper_cls: Type[BaseStepper]) -> None:
        """Register a stepper class under its ``name``.

        Raises:
            ValueError: If the name is taken by another class
        """
        existing = cls._steppers.get(stepper_cls.name)
        if existing is not None and existing is not stepper_cls:
            raise ValueError(f"Stepper name '{stepper_cls.name}' is already registered")
        cls._steppers[stepper_cls.name] = stepper_cls
        logger.debug(f"Registered stepper '{stepper_cls.name}'")

    @classmethod
    def names(cls) -> List[str]:
        return sorted(cls._steppers)

    @classmethod
    def get(cls, name: str) -> Type[BaseStepper]:
        if name not in cls._steppers:
            raise ValueError(f"Unsupported stepper: {name}, expected one of {cls.names()}")
        return cls._steppers[name]


def create_stepper(
    name: str,
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    problem: Optional[ProblemData] = None,
    **options,
) -> BaseStepper:
    """Instantiate a registered stepper.

    Args:
        name: "partitioned" or "monolithic"
        ops: Spatial operators
        params: Physical parameters
        tau: Time step
        problem: Loads and Dirichlet data
        **options: Stepper-specific keyword arguments (structure_ends, pressure_gauge, ...)

    Returns:
        Stepper instance

    Raises:
        ValueError: If the name is unknown
    """
    return StepperRegistry.get(name)(ops, params, tau, problem, **options)


def time_self_convergence(
    name: str,
    ops: FsiOperators,
    params: PhysicalParams,
    tau: float,
    n_steps: int,
    initial: SchemeState,
    problem: Optional[ProblemData] = None,
    **options,
) -> float:
    """L2 distance of the final velocities of N steps of tau and 2N steps of tau/2.

    Both runs start from ``initial`` and end at the same time.
    """
    coarse = create_stepper(name, ops, params, tau, problem, **options)
    fine = create_stepper(name, ops, params, tau / 2.0, problem, **options)
    u_coarse = coarse.run(initial, n_steps).u
    u_fine = fine.run(initial, 2 * n_steps).u
    diff = u_coarse - u_fine
    distance = float(np.sqrt(diff @ (ops.M @ diff)))
    logger.info(f"Self-convergence of '{name}' at tau={tau:.4g}, N={n_steps}: {distance:.4e}")
    return distance
