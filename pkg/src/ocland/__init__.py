"""Optimal-control landscape analysis: one-shot and dynamic-programming
solution routes for finite-horizon discrete-time problems, with stationary-
point censuses and cross-route correspondence checks."""

from .expect import Gaussian, MonteCarloEngine, QuadratureEngine, Uniform, make_engine
from .expr import ExprError, parse_expression, pretty
from .feasible import Box, Polytope, ProductSet, SpectralFloor, product_set
from .model import ControlProblem, PolicyBasis, PolicyParams
from .registry import registry_lookup, registry_names
from .smooth import ExprMap, SmoothFn

__all__ = [
    "Box", "ControlProblem", "ExprError", "ExprMap", "Gaussian",
    "MonteCarloEngine", "PolicyBasis", "PolicyParams", "Polytope",
    "ProductSet", "QuadratureEngine", "SmoothFn", "SpectralFloor", "Uniform",
    "make_engine", "parse_expression", "pretty", "product_set",
    "registry_lookup", "registry_names",
]

__version__ = "0.1.0"
