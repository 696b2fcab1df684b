"""Model files, generators, the enumeration oracle and the solver runner."""
from .bruteforce import DEFAULT_CAP, BruteForceResult, OracleRefused, brute_force
from .generators import SplitMix64, finitize, generate
from .io import ParseError, parse_model, read_model, save_model, write_model
from .runner import SOLVERS, SolverResult, run_solver

__all__ = [
    "DEFAULT_CAP", "BruteForceResult", "OracleRefused", "brute_force",
    "SplitMix64", "finitize", "generate",
    "ParseError", "parse_model", "read_model", "save_model", "write_model",
    "SOLVERS", "SolverResult", "run_solver",
]
