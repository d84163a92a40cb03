"""Particle in a one-dimensional box: high-order eigensolver, Ehrenfest
boundary terms and local balance laws."""

from .balance import (BalanceField, exchange_identity, momentum_balance,
                      position_balance, probability_balance)
from .dynamics import MatrixElements, StateExpansion, evaluate_at, project
from .eigensolver import EigenSolution, SolverError, assemble_hamiltonian, solve
from .grid import Grid, GridError, build_grid, diff_matrix, integrate, quadrature
from .model import (BoundarySpec, ModelError, PhysicalScales, Potential,
                    characteristic_numbers)
from .observables import StateVector, ehrenfest_rhs, expectation, stationary_force_balance

__version__ = "0.1.0"

__all__ = [
    "BalanceField", "BoundarySpec", "EigenSolution", "Grid", "GridError", "MatrixElements",
    "ModelError", "PhysicalScales", "Potential", "SolverError", "StateExpansion",
    "StateVector", "assemble_hamiltonian", "build_grid", "characteristic_numbers",
    "diff_matrix", "ehrenfest_rhs", "evaluate_at", "exchange_identity", "expectation",
    "integrate", "momentum_balance", "position_balance", "probability_balance", "project",
    "quadrature", "solve", "stationary_force_balance",
]
