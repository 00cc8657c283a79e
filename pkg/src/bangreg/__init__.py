"""Bang-bang affine optimal control: solver, structural metric, certification, experiments."""

from .bangbang import SweepOptions, fb_sweep_solve, pointwise_minimizer, reference_solution
from .control import PiecewiseConstantControl, l1_distance
from .dynamics import ResidualTuple, Solution, solve_adjoint, solve_state, switching_function, verify_inclusion
from .errors import BangRegError
from .expr import parse
from .metrics import dstar, dY, dZ, sigma_eps, zero_set
from .polytope import make_box, make_simplex
from .problem import AffineProblem, CertificationConstants, builtin, make_problem

__version__ = "0.1.0"

__all__ = [
    "AffineProblem", "BangRegError", "CertificationConstants", "PiecewiseConstantControl",
    "ResidualTuple", "Solution", "SweepOptions", "builtin", "dY", "dZ", "dstar", "fb_sweep_solve",
    "l1_distance", "make_box", "make_problem", "make_simplex", "parse", "pointwise_minimizer",
    "reference_solution", "sigma_eps", "solve_adjoint", "solve_state", "switching_function",
    "verify_inclusion", "zero_set",
]
