"""Truncated-Fock-space open-system engine with a Gaussian-covariance oracle."""
from .correlation import CorrelationGrid, cross_correlation, fit_wing_time_constants
from .flux import (ConvergedSolution, EliminationRow, PairFlux, pair_flux, solve_converged,
                   virtual_mode_convergence)
from .gaussian import GaussianSteadyState, drift_matrix, gaussian_oracle, quadratic_form
from .lindblad import (QuantumState, evolve, lindblad_solve, liouvillian, steady_state,
                       vacuum_stability)
from .space import HilbertSpace, build_hamiltonian

__all__ = [
    "CorrelationGrid", "cross_correlation", "fit_wing_time_constants",
    "ConvergedSolution", "EliminationRow", "PairFlux", "pair_flux", "solve_converged",
    "virtual_mode_convergence",
    "GaussianSteadyState", "drift_matrix", "gaussian_oracle", "quadratic_form",
    "QuantumState", "evolve", "lindblad_solve", "liouvillian", "steady_state", "vacuum_stability",
    "HilbertSpace", "build_hamiltonian",
]
