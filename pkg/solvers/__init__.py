"""Solvers of the reduced relay beamforming problem."""

from .base_solver import BaseSolver
from .zero_solver import ZeroSolver, ZeroCandidate, solve_zero, bootstrap_multipliers
from .homotopy_solver import HomotopySolver, solve
from .realification import ComplexCandidate, rotate, classify_case, realify, realify_single_active
from .oracle import (
    OracleResult, oracle_minimize, kkt_residual, check_solution, CheckSummary, CheckTolerances,
)
from .report import HomotopyState, PathDiagnostics, BranchOutcome, SolveReport

__all__ = [
    'BaseSolver',
    'ZeroSolver', 'ZeroCandidate', 'solve_zero', 'bootstrap_multipliers',
    'HomotopySolver', 'solve',
    'ComplexCandidate', 'rotate', 'classify_case', 'realify', 'realify_single_active',
    'OracleResult', 'oracle_minimize', 'kkt_residual', 'check_solution', 'CheckSummary', 'CheckTolerances',
    'HomotopyState', 'PathDiagnostics', 'BranchOutcome', 'SolveReport',
]
