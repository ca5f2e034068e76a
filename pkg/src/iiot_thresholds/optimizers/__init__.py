"""Threshold optimizers and the shared feasibility check."""

from .common import (
    FEASIBILITY_TOL,
    METHODS,
    CoverageProblem,
    ErrorBudget,
    OptimizerResult,
    check_feasibility,
    make_result,
)
from .equal import equal_delta_asymptotic, solve_equal_delta
from .evolutionary import EvoConfig, PenaltyFitness, solve_ga, solve_pso
from .knn import ClusterGraph, build_cluster_graph, scale_into_feasibility, solve_knn_bayes
from .qlearning import QConfig, QTable, level_grid, solve_qlearning
from .registry import OPTION_KEYS, solve
from .sca import BcdConfig, ScaConfig, solve_bcd, solve_sca
from .voronoi import VARIANTS, solve_voronoi, voronoi_thresholds

__all__ = [
    "FEASIBILITY_TOL", "METHODS", "CoverageProblem", "ErrorBudget", "OptimizerResult",
    "check_feasibility", "make_result", "equal_delta_asymptotic", "solve_equal_delta",
    "EvoConfig", "PenaltyFitness", "solve_ga", "solve_pso", "ClusterGraph", "build_cluster_graph",
    "scale_into_feasibility", "solve_knn_bayes", "QConfig", "QTable", "level_grid", "solve_qlearning",
    "OPTION_KEYS", "solve", "BcdConfig", "ScaConfig", "solve_bcd", "solve_sca", "VARIANTS",
    "solve_voronoi", "voronoi_thresholds",
]
