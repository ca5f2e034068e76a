"""Genetic algorithm and particle swarm over threshold vectors.

Individuals live in radius coordinates ``x_j = -ln(delta_j) / t_max_j`` in
[0, 1], ``t_max_j`` being the full-coverage floor; thresholds span many
orders of magnitude, and a linear search over delta would never reach the
small values that useful coverage needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..network import Area, SensingModel
from ..rng import make_rng
from .common import CoverageProblem, ErrorBudget, FEASIBILITY_TOL, OptimizerResult, make_result

__all__ = ["EvoConfig", "solve_ga", "solve_pso", "PenaltyFitness"]


@dataclass
class EvoConfig:
    """Settings shared by GA and PSO.

    ``generations`` defaults to ``ceil(sqrt(N))``; ``penalty`` to ``10 N``.
    ``mutation_scale`` is the Gaussian step in radius coordinates.  The last
    three weights are the PSO inertia, cognitive and social factors.
    """

    population: int = 40
    generations: Optional[int] = None
    mutation_rate: float = 0.2
    crossover_rate: float = 0.9
    elitism: int = 2
    seed: int = 0
    tournament: int = 3
    mutation_scale: float = 0.1
    penalty: Optional[float] = None
    inertia: float = 0.7298
    cognitive: float = 1.49618
    social: float = 1.49618
    max_velocity: float = 0.2
    init_delta: Optional[np.ndarray] = None
    init_spread: float = 0.05

    def __post_init__(self):
        if self.population < 2:
            raise ValueError(f"population must be >= 2, got {self.population}")
        for name in ("mutation_rate", "crossover_rate"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0 <= self.elitism <= self.population:
            raise ValueError("elitism must be between 0 and the population size")
        if self.tournament < 1:
            raise ValueError("tournament size must be >= 1")

    def n_generations(self, n: int) -> int:
        g = max(1, math.ceil(math.sqrt(n))) if self.generations is None else int(self.generations)
        if g < 1:
            raise ValueError(f"generations must be >= 1, got {g}")
        return g


class PenaltyFitness:
    """``W + lam * max(0, E[P_e] - alpha E)`` for a batch of individuals."""

    def __init__(self, cals, model: SensingModel, budget: ErrorBudget, area: Optional[Area], penalty=None):
        self.prob = CoverageProblem(cals, model, budget, area)
        self.model = model
        self.t_max = -np.log(self.prob.delta_floor)
        self.scale = 2.0 / (model.eta**2 * self.prob.w)
        self.limit = budget.per_tti(model)
        self.penalty = 10.0 * self.prob.n if penalty is None else float(penalty)
        self.evaluations = 0

    def to_delta(self, x) -> np.ndarray:
        return np.exp(-np.clip(x, 0.0, 1.0) * self.t_max)

    def to_x(self, delta) -> np.ndarray:
        return np.clip(-np.log(np.asarray(delta, dtype=float)) / self.t_max, 0.0, 1.0)

    def __call__(self, xs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(fitness, power, error)`` per row of ``xs``."""
        xs = np.atleast_2d(xs)
        a = (xs * self.t_max) ** 2 * self.scale
        q = -np.expm1(-a)
        total = a.sum(axis=1, keepdims=True)
        success = np.sum(q * np.exp(-(total - a)), axis=1)
        power = self.model.alpha * q.mean(axis=1)
        error = self.model.alpha * (1.0 - success)
        self.evaluations += len(xs)
        fitness = power + self.penalty * np.maximum(0.0, error - self.limit)
        return fitness, power, error


class _BestTracker:
    """Lowest-power feasible point seen, with a fallback to the best fitness."""

    def __init__(self, limit: float, alpha: float):
        self.limit = limit
        self.alpha = alpha
        self.feasible_x = None
        self.feasible_power = np.inf
        self.fallback_x = None
        self.fallback_fit = np.inf
        self.trace = []

    def offer(self, xs, fit, power, error, evaluations):
        # same margin convention as check_feasibility
        ok = (self.limit - error) / self.alpha >= -FEASIBILITY_TOL
        if ok.any():
            i = int(np.flatnonzero(ok)[np.argmin(power[ok])])
            if power[i] < self.feasible_power:
                self.feasible_power = float(power[i])
                self.feasible_x = xs[i].copy()
        i = int(np.argmin(fit))
        if fit[i] < self.fallback_fit:
            self.fallback_fit = float(fit[i])
            self.fallback_x = xs[i].copy()
        self.trace.append((int(evaluations), self.feasible_power if self.feasible_x is not None else None))

    def best(self):
        return self.feasible_x if self.feasible_x is not None else self.fallback_x


def _initial_population(cfg: EvoConfig, fit: PenaltyFitness, rng, n: int) -> np.ndarray:
    pop = rng.random((cfg.population, n))
    if cfg.init_delta is not None:
        x0 = fit.to_x(np.asarray(cfg.init_delta, dtype=float).reshape(-1))
        pop = np.clip(x0[None, :] + cfg.init_spread * rng.standard_normal((cfg.population, n)), 0.0, 1.0)
        pop[0] = x0
    return pop


def _tournament(rng, fitness: np.ndarray, size: int) -> int:
    picks = np.sort(rng.integers(0, len(fitness), size=size))
    return int(picks[np.argmin(fitness[picks])])  # argmin keeps the lowest index on ties


def solve_ga(
    cals, model: SensingModel, budget: ErrorBudget, cfg: EvoConfig = EvoConfig(), area: Optional[Area] = None
) -> OptimizerResult:
    """Elitist GA with tournament selection, uniform crossover and Gaussian
    mutation.  Returns the lowest-power feasible individual ever evaluated,
    or the best penalised one when none was feasible."""
    fit = PenaltyFitness(cals, model, budget, area, cfg.penalty)
    n = fit.prob.n
    rng = make_rng(cfg.seed)
    best = _BestTracker(fit.limit, model.alpha)
    pop = _initial_population(cfg, fit, rng, n)
    f, p, e = fit(pop)
    best.offer(pop, f, p, e, fit.evaluations)
    history = [float(f.min())]
    generations = cfg.n_generations(n)
    for _ in range(generations):
        order = np.argsort(f, kind="stable")
        children = [pop[i].copy() for i in order[: cfg.elitism]]
        while len(children) < cfg.population:
            a = pop[_tournament(rng, f, cfg.tournament)]
            b = pop[_tournament(rng, f, cfg.tournament)]
            if rng.random() < cfg.crossover_rate:
                mask = rng.random(n) < 0.5
                child = np.where(mask, a, b)
            else:
                child = a.copy()
            mutate = rng.random(n) < cfg.mutation_rate
            child = np.clip(child + mutate * cfg.mutation_scale * rng.standard_normal(n), 0.0, 1.0)
            children.append(child)
        pop = np.array(children)
        f, p, e = fit(pop)
        best.offer(pop, f, p, e, fit.evaluations)
        history.append(float(f.min()))
    return make_result("ga", cals, model, budget, fit.to_delta(best.best()), iterations=generations,
                       evaluations=fit.evaluations, seed=cfg.seed, best_fitness=history, trace=best.trace)


def solve_pso(
    cals, model: SensingModel, budget: ErrorBudget, cfg: EvoConfig = EvoConfig(), area: Optional[Area] = None
) -> OptimizerResult:
    """Global-best particle swarm with inertia, cognitive and social terms.

    Setting ``cfg.init_delta`` (e.g. the Voronoi thresholds) seeds the swarm
    around that vector instead of uniformly.
    """
    fit = PenaltyFitness(cals, model, budget, area, cfg.penalty)
    n = fit.prob.n
    rng = make_rng(cfg.seed)
    best = _BestTracker(fit.limit, model.alpha)
    x = _initial_population(cfg, fit, rng, n)
    v = cfg.max_velocity * (2.0 * rng.random(x.shape) - 1.0)
    f, p, e = fit(x)
    best.offer(x, f, p, e, fit.evaluations)
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmin(pbest_f))
    history = [float(pbest_f[g])]
    iterations = cfg.n_generations(n)
    for _ in range(iterations):
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        v = cfg.inertia * v + cfg.cognitive * r1 * (pbest - x) + cfg.social * r2 * (pbest[g] - x)
        v = np.clip(v, -cfg.max_velocity, cfg.max_velocity)
        x = np.clip(x + v, 0.0, 1.0)
        f, p, e = fit(x)
        best.offer(x, f, p, e, fit.evaluations)
        better = f < pbest_f
        pbest[better] = x[better]
        pbest_f[better] = f[better]
        g = int(np.argmin(pbest_f))
        history.append(float(pbest_f[g]))
    return make_result("pso", cals, model, budget, fit.to_delta(best.best()), iterations=iterations,
                       evaluations=fit.evaluations, seed=cfg.seed, best_fitness=history, trace=best.trace)
