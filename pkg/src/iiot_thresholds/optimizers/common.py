"""Shared result type, feasibility check and coverage-space helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..metrics import expected_p_e, expected_power, success_from_coverage
from ..network import Area, SensingModel, threshold_floor, w_vector

__all__ = [
    "ErrorBudget",
    "OptimizerResult",
    "check_feasibility",
    "make_result",
    "CoverageProblem",
    "METHODS",
    "FEASIBILITY_TOL",
]

METHODS = (
    "equal", "sca", "bcd", "voronoi_min", "voronoi_mean", "voronoi_max",
    "knn", "ga", "pso", "qlearn",
)
FEASIBILITY_TOL = 1e-9
_A_CAP = 40.0


@dataclass(frozen=True)
class ErrorBudget:
    """Tolerated error probability per event.

    The constraint reads ``E[P_e] <= alpha * E`` with ``E[P_e]`` per TTI, i.e.
    at most a fraction ``E`` of events is missed or lost to a collision.
    """

    E: float = 0.1

    def __post_init__(self):
        if not 0 < self.E < 1:
            raise ValueError(f"error budget must be in (0, 1), got {self.E}")

    def per_tti(self, model: SensingModel) -> float:
        return model.alpha * self.E


def check_feasibility(cals, model: SensingModel, delta, budget: ErrorBudget) -> tuple[bool, float]:
    """Return ``(feasible, margin)`` with ``margin = E - E[P_e] / alpha``."""
    margin = budget.E - expected_p_e(cals, model, delta) / model.alpha
    return bool(margin >= -FEASIBILITY_TOL), float(margin)


@dataclass
class OptimizerResult:
    method: str
    delta: np.ndarray
    feasible: bool
    objective: float
    p_e: float
    margin: float
    iterations: int = 0
    evaluations: int = 0
    seed: Optional[int] = None
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "delta": [float(d) for d in self.delta],
            "feasible": self.feasible,
            "objective": self.objective,
            "p_e": self.p_e,
            "margin": self.margin,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "info": _jsonable(self.info),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def make_result(method, cals, model, budget, delta, iterations=0, evaluations=0, seed=None, **info):
    delta = np.clip(np.asarray(delta, dtype=float).reshape(-1), np.finfo(float).tiny, 1.0)
    feasible, margin = check_feasibility(cals, model, delta, budget)
    return OptimizerResult(
        method=method,
        delta=delta,
        feasible=feasible,
        objective=expected_power(cals, model, delta),
        p_e=expected_p_e(cals, model, delta),
        margin=margin,
        iterations=iterations,
        evaluations=evaluations,
        seed=seed,
        info=info,
    )


class CoverageProblem:
    """The threshold problem in coverage coordinates.

    ``q_j`` (the coverage probability of device ``j``) is a monotone
    reparametrisation of ``delta_j``; in it the power objective is linear and
    the error constraint is affine in each coordinate separately.  ``q_j`` is
    bounded by the coverage of the threshold floor (a disk spanning the
    area, or where coverage is numerically complete when no area is given).
    """

    def __init__(self, cals, model: SensingModel, budget: ErrorBudget, area: Optional[Area] = None):
        self.w = w_vector(cals)
        self.model = model
        self.budget = budget
        self.area = area
        self.n = len(self.w)
        if area is not None:
            self.delta_floor = np.full(self.n, threshold_floor(area, model))
            a_max = 2.0 * (np.log(self.delta_floor) / model.eta) ** 2 / self.w
        else:
            # without an area, stop where exp(-a) is negligible
            a_max = np.full(self.n, _A_CAP)
            self.delta_floor = np.exp(-model.eta * np.sqrt(a_max * self.w / 2.0))
        self.q_max = -np.expm1(-a_max)
        self.evaluations = 0

    # -- coordinate maps
    def to_q(self, delta) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        a = 2.0 * (np.log(delta) / self.model.eta) ** 2 / self.w
        return np.minimum(-np.expm1(-a), self.q_max)

    def to_delta(self, q) -> np.ndarray:
        q = np.clip(np.asarray(q, dtype=float), 0.0, self.q_max)
        a = -np.log1p(-q)
        radius = np.sqrt(a * self.w / 2.0)
        return np.maximum(np.exp(-self.model.eta * radius), self.delta_floor)

    # -- objective and constraint in q
    def power(self, q) -> float:
        return self.model.alpha * float(np.mean(q))

    def event_error(self, q) -> float:
        """``E[P_e] / alpha`` as a function of coverage."""
        self.evaluations += 1
        return 1.0 - success_from_coverage(q)

    def violation(self, q) -> float:
        return self.event_error(q) - self.budget.E

    def error_gradient(self, q) -> np.ndarray:
        """Gradient of ``E[P_e] / alpha`` in ``q``."""
        q = np.asarray(q, dtype=float)
        grad = np.empty(self.n)
        for k in range(self.n):
            rest = np.delete(q, k)
            grad[k] = np.prod(1.0 - rest) - success_from_coverage(rest)
        self.evaluations += 1
        return -grad

    def coordinate_terms(self, q, j: int) -> tuple[float, float]:
        """Success as ``S = base + slope * q_j`` with the others held fixed."""
        rest = np.delete(np.asarray(q, dtype=float), j)
        base = success_from_coverage(rest)
        slope = float(np.prod(1.0 - rest)) - base
        return base, slope
