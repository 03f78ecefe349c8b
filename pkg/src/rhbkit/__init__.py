"""Polynomial recast and reconstruction harmonic balance for nonlinear oscillators."""
from .expr import OdeSystem, ParseError, PointConstraint, parse_system, system_to_text
from .poly import PolySystem, degree_of, eval_partials, eval_rhs, from_json, to_json, to_text
from .recast import RecastError, recast
from .harmonic import (CollocationGrid, HarmonicBasis, IncommensurateError, alias_of, build_A,
                       build_E, build_pinv, min_collocation, variant_grid)
from .balance import AlgebraicProblem, BalanceScheme, FourierVector, assemble
from .solvers import SolveReport, SolverConfig, solve, solve_lm, solve_newton, sweep

__version__ = "0.1.0"

__all__ = [
    "OdeSystem", "ParseError", "PointConstraint", "parse_system", "system_to_text",
    "PolySystem", "degree_of", "eval_partials", "eval_rhs", "from_json", "to_json", "to_text",
    "RecastError", "recast",
    "CollocationGrid", "HarmonicBasis", "IncommensurateError", "alias_of", "build_A", "build_E",
    "build_pinv", "min_collocation", "variant_grid",
    "AlgebraicProblem", "BalanceScheme", "FourierVector", "assemble",
    "SolveReport", "SolverConfig", "solve", "solve_lm", "solve_newton", "sweep",
]
