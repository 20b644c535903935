"""Analytic field bundles evaluated at a fixed time."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from fsi_thinwall.fem.space import Field
from fsi_thinwall.forms import GradientField


def zero_vector(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.zeros((2, np.size(x)))


def zero_scalar(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.zeros(np.size(x))


def zero_gradient(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.zeros((2, 2, np.size(x)))


@dataclass(frozen=True)
class AnalyticFields:
    """Velocity, pressure and Sigma displacement given as functions of (x, y).

    Attributes:
        u: Velocity, (x, y) -> (2, n)
        grad_u: Velocity gradient, (x, y) -> (2, 2, n) with [i, j] = d u_i / d x_j
        p: Pressure, (x, y) -> (n,)
        eta: Sigma displacement, (x, y) -> (2, n), evaluated on Sigma points
        deta: x-derivative of the displacement along Sigma
        time: Time the fields belong to, if any
    """

    u: Field = zero_vector
    grad_u: GradientField = zero_gradient
    p: Field = zero_scalar
    eta: Field = zero_vector
    deta: Field = zero_vector
    time: Optional[float] = None

    def scaled(self, c: float) -> "AnalyticFields":
        """Fields multiplied by the constant c."""

        def scale(f: Callable) -> Callable:
            return lambda x, y: c * np.asarray(f(x, y), dtype=float)

        return AnalyticFields(
            u=scale(self.u),
            grad_u=scale(self.grad_u),
            p=scale(self.p),
            eta=scale(self.eta),
            deta=scale(self.deta),
            time=self.time,
        )


ZERO_FIELDS = AnalyticFields()

# t -> fields at t
FieldTrajectory = Callable[[float], AnalyticFields]
