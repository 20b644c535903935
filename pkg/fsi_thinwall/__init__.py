"""
Partitioned fluid/thin-structure interaction solver and verification harness.

This package provides a 2D finite element discretization of a Stokes fluid coupled
to thin elastic walls, the stabilized kinematically coupled time stepper, the Ritz
projections used in its error analysis, and the studies that check them.
"""

__version__ = "0.1.0"
__license__ = "Apache-2.0"

from fsi_thinwall.config import SimConfig
from fsi_thinwall.forms import FsiOperators, assemble_operators
from fsi_thinwall.mesh import build_rect_mesh
from fsi_thinwall.scheme import PhysicalParams, create_stepper

__all__ = [
    "FsiOperators",
    "PhysicalParams",
    "SimConfig",
    "assemble_operators",
    "build_rect_mesh",
    "create_stepper",
]
