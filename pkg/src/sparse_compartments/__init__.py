"""Sparse, population-conserving identification of compartment ODE models."""

__version__ = "0.1.0"

from .dictionary import DesignMatrix, PolyDictionary, build_dictionary, eval_design
from .identify import IdentifyOptions, identify_model
from .lp import LinearProgram, LpOptions, LpSolution, solve_lp
from .simulate import ModelSpec, Trajectory, integrate, make_sir, make_sis, rhs

__all__ = [
    "DesignMatrix",
    "IdentifyOptions",
    "LinearProgram",
    "LpOptions",
    "LpSolution",
    "ModelSpec",
    "PolyDictionary",
    "Trajectory",
    "build_dictionary",
    "eval_design",
    "identify_model",
    "integrate",
    "make_sir",
    "make_sis",
    "rhs",
    "solve_lp",
]
