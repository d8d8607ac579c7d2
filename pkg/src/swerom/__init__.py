"""Tensor-based reduced-order models for the parametric 1D dam-break problem."""
from .bases import LocalBasis, PodModes, build_basis
from .errors import (DivergenceError, IterationError, NumericalError, StabilityError,
                     StoreIOError, SweromError, ValidationError)
from .fom import FieldState, ParameterPair, RunConfig, Trajectory, run_fom
from .metrics import AggregateReport, ErrorReport, aggregate, rel_error_l2h1, rel_error_l2l2
from .riemann import RiemannSolution, dry_bed_solution, solve_middle_state, wet_bed_solution
from .rom import RomTrajectory, run_rom
from .sampling import ParameterGrid, chebyshev_nodes, monte_carlo_params, uniform_nodes
from .tensor import TuckerModel, hosvd_truncate, reconstruct

__version__ = "0.1.0"

__all__ = [
    "AggregateReport", "DivergenceError", "ErrorReport", "FieldState", "IterationError",
    "LocalBasis", "NumericalError", "ParameterGrid", "ParameterPair", "PodModes",
    "RiemannSolution", "RomTrajectory", "RunConfig", "StabilityError", "StoreIOError",
    "SweromError", "Trajectory", "TuckerModel", "ValidationError", "aggregate", "build_basis",
    "chebyshev_nodes", "dry_bed_solution", "hosvd_truncate", "monte_carlo_params",
    "reconstruct", "rel_error_l2h1", "rel_error_l2l2", "run_fom", "run_rom",
    "solve_middle_state", "uniform_nodes", "wet_bed_solution",
]
