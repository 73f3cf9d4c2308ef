"""Tikhonov regularization of bang-bang optimal control problems for a 1D semilinear elliptic equation."""
from .control import (
    ControlProblem,
    RegularizedSolution,
    evaluate,
    gradient_smooth,
    hessian_quadratic_form,
    objective,
    project_box,
    soft_threshold,
    stationarity_residual,
)
from .harness import asc_sweep, fit_loglog_slope, gradient_check, growth_check, rate_sweep
from .manufactured import ExactSolution, build_problem, build_section7, build_sparse
from .mesh_fem import FEFunction, Mesh, band_measure, build_mesh, norm, solve_tridiagonal
from .nonlinearity import Nonlinearity, make_nonlinearity
from .optimizer import SolverOptions, alpha_grid, solve_path, solve_regularized
from .pde import solve_adjoint, solve_linearized, solve_state

__version__ = "0.1.0"
