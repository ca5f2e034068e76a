"""Equal-threshold benchmark: every device shares one threshold."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from ..metrics import success_from_coverage
from ..network import Area, SensingModel, w_vector
from .common import ErrorBudget, OptimizerResult, make_result

__all__ = ["solve_equal_delta", "equal_delta_asymptotic", "BISECTION_TOL"]

BISECTION_TOL = 1e-13
_GRID = 4096


def _success_at(t: float, w: np.ndarray, eta: float) -> float:
    """Analytic success per event when every device uses ``delta = exp(-t)``."""
    a = 2.0 * (t / eta) ** 2 / w
    return success_from_coverage(-np.expm1(-a))


def solve_equal_delta(
    cals, model: SensingModel, budget: ErrorBudget, area: Optional[Area] = None
) -> OptimizerResult:
    """Largest common threshold meeting the error budget.

    Works on ``t = -ln(delta)``: a dense scan locates the first feasible
    grid point (the success curve rises from zero, so the feasible set of
    largest ``delta`` starts there), then bisection pins the boundary.  With
    ``area`` given, ``delta`` stays above the full-coverage floor.  When no
    common threshold is feasible the one with the highest success is
    returned, flagged infeasible.
    """
    w = w_vector(cals)
    if w.size < 1:
        raise ValueError("need at least one device")
    eta = model.eta
    target = 1.0 - budget.E
    # a_min = 40 makes every exp(-a) < 5e-18
    t_max = eta * math.sqrt(40.0 * float(w.max()) / 2.0)
    if area is not None:
        t_max = min(t_max, eta * area.diagonal)
    # uniform in t^2 since the exponents are linear in it
    ts = np.sqrt(np.linspace(0.0, t_max * t_max, _GRID))
    succ = np.array([_success_at(t, w, eta) for t in ts])
    evals = _GRID
    hit = np.flatnonzero(succ >= target)
    if hit.size == 0:
        k = int(np.argmax(succ))
        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, _GRID - 1)]
        best = minimize_scalar(lambda t: -_success_at(t, w, eta), bounds=(lo, hi), method="bounded",
                               options={"xatol": 1e-12})
        evals += int(best.nfev)
        t_best = float(best.x) if -best.fun >= succ[k] else float(ts[k])
        if -best.fun >= target:
            hit = np.array([k])
            ts = ts.copy()
            ts[k] = t_best
        else:
            return make_result("equal", cals, model, budget, np.full(w.size, math.exp(-t_best)),
                               iterations=0, evaluations=evals, bisection=False)
    i = int(hit[0])
    if i == 0:
        return make_result("equal", cals, model, budget, np.ones(w.size), evaluations=evals)
    lo, hi = float(ts[i - 1]), float(ts[i])  # infeasible, feasible
    iters = 0
    while hi - lo > BISECTION_TOL * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if _success_at(mid, w, eta) >= target:
            hi = mid
        else:
            lo = mid
        iters += 1
    evals += iters
    return make_result("equal", cals, model, budget, np.full(w.size, math.exp(-hi)),
                       iterations=iters, evaluations=evals, bisection=True)


def equal_delta_asymptotic(w: float, n: int, E: float = 0.1, eta: float = 1.0) -> float:
    """Large-N closed form of the equal-threshold solution.

    ``exp(-eta * sqrt(w (ln N - ln(1 - E)) / (2 (N - 1))))``; it keeps only
    the silent-others factor of the success term.
    """
    if n < 2:
        raise ValueError(f"asymptotic form needs n >= 2, got {n}")
    if not 0 < E < 1:
        raise ValueError(f"error budget must be in (0, 1), got {E}")
    return math.exp(-eta * math.sqrt(w * (math.log(n) - math.log(1.0 - E)) / (2.0 * (n - 1))))
