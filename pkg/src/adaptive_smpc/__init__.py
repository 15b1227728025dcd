"""Adaptive stochastic MPC for finite-impulse-response plants with bounded noise.

The package combines a set-membership feasible parameter set, a projected
recursive least-squares estimate, distributionally robust tightening of an
output chance constraint and a receding-horizon convex program. An adaptive
robust controller is included as a baseline.
"""
from .chance import ChanceSpec, build_gamma, kappa_of
from .fir import FirDims, advance_regressor, build_shift_operators, prediction_maps, simulate_output
from .fps import (FeasibleParamSet, FpsInitSpec, ModelInconsistencyError, fps_chebyshev_center,
                  fps_contains, fps_vertices, init_fps, update_fps)
from .mpc import MpcConfig, MpcSolution, assemble_robust, assemble_stochastic, solve
from .polytope import HPolytope, chebyshev_center, enumerate_vertices, remove_redundant
from .rls import ModelEstimate, project_estimate, rls_update
from .sim import (ScenarioConfig, ScenarioError, default_scenario, load_scenario, run_closed_loop,
                  run_estimation, run_monte_carlo)
from .solvers import SolveReport, Status, solve_lp, solve_qp, solve_qp_soc

__version__ = "0.1.0"

__all__ = [
    "ChanceSpec", "build_gamma", "kappa_of",
    "FirDims", "advance_regressor", "build_shift_operators", "prediction_maps", "simulate_output",
    "FeasibleParamSet", "FpsInitSpec", "ModelInconsistencyError", "fps_chebyshev_center",
    "fps_contains", "fps_vertices", "init_fps", "update_fps",
    "MpcConfig", "MpcSolution", "assemble_robust", "assemble_stochastic", "solve",
    "HPolytope", "chebyshev_center", "enumerate_vertices", "remove_redundant",
    "ModelEstimate", "project_estimate", "rls_update",
    "ScenarioConfig", "ScenarioError", "default_scenario", "load_scenario", "run_closed_loop",
    "run_estimation", "run_monte_carlo",
    "SolveReport", "Status", "solve_lp", "solve_qp", "solve_qp_soc",
]
