"""Quadrature, reference elements and finite element spaces on the structured mesh."""

from fsi_thinwall.fem.elements import ElementKind, eval_basis
from fsi_thinwall.fem.quadrature import QuadRule, gauss_edge_rule, quad_rule
from fsi_thinwall.fem.space import FeSpace, TraceSpace, build_space, build_trace_space

__all__ = [
    "ElementKind",
    "FeSpace",
    "QuadRule",
    "TraceSpace",
    "build_space",
    "build_trace_space",
    "eval_basis",
    "gauss_edge_rule",
    "quad_rule",
]
