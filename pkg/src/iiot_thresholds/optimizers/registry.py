"""Dispatch by method tag with per-method option dictionaries."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..network import Deployment, SensingModel
from ..sim import RewardConfig
from .common import METHODS, ErrorBudget, OptimizerResult
from .equal import solve_equal_delta
from .evolutionary import EvoConfig, solve_ga, solve_pso
from .knn import solve_knn_bayes
from .qlearning import QConfig, solve_qlearning
from .sca import BcdConfig, ScaConfig, solve_bcd, solve_sca
from .voronoi import solve_voronoi, voronoi_thresholds

__all__ = ["solve", "OPTION_KEYS"]

OPTION_KEYS = {
    "equal": (),
    "sca": ("max_iters", "tol", "prox", "curvature"),
    "bcd": ("max_iters", "tol"),
    "voronoi_min": (),
    "voronoi_mean": (),
    "voronoi_max": (),
    "knn": ("k", "g", "tol"),
    "ga": ("population", "generations", "mutation_rate", "crossover_rate", "elitism", "tournament",
           "mutation_scale", "penalty"),
    "pso": ("population", "generations", "inertia", "cognitive", "social", "max_velocity", "penalty",
            "voronoi_seed", "init_spread"),
    "qlearn": ("levels", "learning_rate", "discount", "epsilon_start", "epsilon_end", "ttis", "episodes",
               "mu1", "mu2", "silent_collision_bonus"),
}


def _check_options(method: str, options: dict) -> dict:
    unknown = set(options) - set(OPTION_KEYS[method])
    if unknown:
        raise ValueError(f"unknown option(s) for {method}: {', '.join(sorted(unknown))}")
    return dict(options)


def solve(
    method: str,
    dep: Deployment,
    cals,
    model: SensingModel,
    budget: ErrorBudget,
    options: Optional[dict] = None,
    seed: int = 0,
) -> OptimizerResult:
    """Run the optimizer named ``method`` on one deployment.

    SCA and BCD start from the Voronoi-(i) thresholds; PSO does too when
    ``voronoi_seed`` is set.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    opts = _check_options(method, options or {})
    area = dep.area
    if method == "equal":
        return solve_equal_delta(cals, model, budget, area)
    if method.startswith("voronoi_"):
        return solve_voronoi(dep, cals, model, budget, method.split("_", 1)[1])
    if method in ("sca", "bcd"):
        start = voronoi_thresholds(dep, model, "min")
        if method == "sca":
            return solve_sca(cals, model, budget, ScaConfig(delta0=start, **opts), area)
        return solve_bcd(cals, model, budget, BcdConfig(delta0=start, **opts), area)
    if method == "knn":
        return solve_knn_bayes(dep, cals, model, budget, seed=seed, **opts)
    if method in ("ga", "pso"):
        if opts.pop("voronoi_seed", False):
            opts["init_delta"] = voronoi_thresholds(dep, model, "min")
        cfg = EvoConfig(seed=seed, **opts)
        return (solve_ga if method == "ga" else solve_pso)(cals, model, budget, cfg, area)
    episodes = int(opts.pop("episodes", 1))
    reward = RewardConfig(
        mu1=float(opts.pop("mu1", 1.0)),
        mu2=float(opts.pop("mu2", 1.0)),
        silent_collision_bonus=bool(opts.pop("silent_collision_bonus", True)),
    )
    return solve_qlearning(dep, cals, model, budget, QConfig(seed=seed, reward=reward, **opts), episodes)
