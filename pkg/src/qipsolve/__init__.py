"""Expansion-based solver for quantified integer programs with polyhedral
uncertainty: a CEGAR engine over multi-games with an exact branch-and-bound
base oracle, a binary-search optimizer, benchmark generators, and an
exhaustive minimax reference oracle."""

from .bruteforce import GuardExceeded, OracleReport, minimax_feasible, minimax_value
from .cegar import Engine, SolveStats, Unknown, solve_qip, universal_domain_constraints
from .generators import Graph, McnBudgets, gen_mcn, gen_qrandomparity
from .ip import Budget, IpOutcome, IpProblem, propagate_bounds, solve_ip
from .model import (
    Assignment,
    LinearConstraint,
    Objective,
    QipInstance,
    Quantifier,
    Relation,
    Variable,
    build_instance,
    instantiate,
    normalize,
    objective_bounds,
    validate_instance,
)
from .optimize import OptResult, VerifyResult, optimize, verify_bound
from .parser import ParseError, SourceSpan, parse_qip, serialize_qip

__all__ = [
    "Assignment", "Budget", "Engine", "Graph", "GuardExceeded", "IpOutcome",
    "IpProblem", "LinearConstraint", "McnBudgets", "Objective", "OptResult",
    "OracleReport", "ParseError", "QipInstance", "Quantifier", "Relation",
    "SolveStats", "SourceSpan", "Unknown", "Variable", "VerifyResult",
    "build_instance", "gen_mcn", "gen_qrandomparity", "instantiate",
    "minimax_feasible", "minimax_value", "normalize", "objective_bounds",
    "optimize", "parse_qip", "propagate_bounds", "serialize_qip", "solve_ip",
    "solve_qip", "universal_domain_constraints", "validate_instance",
    "verify_bound",
]

__version__ = "0.1.0"
