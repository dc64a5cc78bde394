"""Heaviside composite optimization: models, integer programs and solvers."""
from .core_model import (
    AHSProblem,
    Box,
    HeavisideExpression,
    HeavisideTerm,
    MHSTerm,
    PAFunction,
    check_feasible,
    evaluate_objective,
    load_problem,
    save_problem,
)
from .idsa import IDSAConfig, idsa_run, verify_run
from .milp import MILPConfig, solve_milp
from .oracle import enumerate_optimum
from .pip import PIPConfig, pip_solve
from .reformulation import eps_problem, mhs_to_ahs
from .runner import solve_problem

__version__ = "0.1.0"

__all__ = [
    "AHSProblem", "Box", "HeavisideExpression", "HeavisideTerm", "MHSTerm", "PAFunction",
    "check_feasible", "evaluate_objective", "load_problem", "save_problem",
    "IDSAConfig", "idsa_run", "verify_run", "MILPConfig", "solve_milp", "enumerate_optimum",
    "PIPConfig", "pip_solve", "eps_problem", "mhs_to_ahs", "solve_problem",
]
