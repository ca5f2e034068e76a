"""Successive convex approximation and block coordinate descent.

Both run in coverage coordinates ``q`` (see :class:`CoverageProblem`): the
power objective is ``alpha * mean(q)`` and the constraint is
``S(q) >= 1 - E`` with ``S`` the analytic success probability per event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..network import Area, SensingModel
from .common import CoverageProblem, ErrorBudget, OptimizerResult, make_result

__all__ = ["ScaConfig", "BcdConfig", "solve_sca", "solve_bcd", "default_iterations"]


def default_iterations(n: int) -> int:
    return max(1, math.ceil(math.sqrt(n)))


def _inverse_sqrt(k: int) -> float:
    return 1.0 / math.sqrt(k + 1)


@dataclass
class ScaConfig:
    """SCA settings.

    ``step`` maps the iteration index to the learning rate in (0, 1].
    ``prox`` weighs the proximal term of the surrogate (relative to the
    per-device objective weight); ``curvature`` is the starting curvature
    bound of the concave minorant of ``S`` and doubles on every rejection.
    """

    delta0: Optional[np.ndarray] = None
    max_iters: Optional[int] = None
    step: Callable[[int], float] = _inverse_sqrt
    tol: float = 1e-7
    inner_tol: float = 1e-12
    prox: float = 1.0
    curvature: float = 1.0
    max_backtracks: int = 60

    def iterations(self, n: int) -> int:
        g = default_iterations(n) if self.max_iters is None else int(self.max_iters)
        if g < 1:
            raise ValueError(f"max_iters must be >= 1, got {g}")
        return g


@dataclass
class BcdConfig:
    delta0: Optional[np.ndarray] = None
    max_iters: Optional[int] = None
    order: Optional[Sequence[int]] = None
    tol: float = 1e-10

    def iterations(self, n: int) -> int:
        g = default_iterations(n) if self.max_iters is None else int(self.max_iters)
        if g < 1:
            raise ValueError(f"max_iters must be >= 1, got {g}")
        return g


def _initial_q(prob: CoverageProblem, delta0) -> np.ndarray:
    if delta0 is None:
        return prob.q_max.copy()
    delta0 = np.asarray(delta0, dtype=float).reshape(-1)
    if delta0.size != prob.n:
        raise ValueError(f"delta0 has length {delta0.size}, expected {prob.n}")
    return prob.to_q(delta0)


def _surrogate_step(q, c, grad_s, slack, curv, prox, q_max, tol):
    """Minimise ``c.x + prox/2 |x - q|^2`` over the box subject to

        slack + grad_s.(x - q) - curv/2 |x - q|^2 >= 0,

    a concave minorant of ``S(x) - target``.  For a fixed multiplier ``lam``
    the minimiser is a clipped gradient step; ``lam`` is found by bisection
    on the (monotone) constraint value.  If no point satisfies the
    constraint, the box point maximising the minorant is returned.
    """

    def x_of(lam):
        return np.clip(q + (lam * grad_s - c) / (prox + lam * curv), 0.0, q_max)

    def model(x):
        d = x - q
        return slack + grad_s @ d - 0.5 * curv * (d @ d)

    x0 = x_of(0.0)
    if model(x0) >= 0:
        return x0, True
    x_inf = np.clip(q + grad_s / curv, 0.0, q_max)
    if model(x_inf) < 0:
        return x_inf, False
    lo, hi = 0.0, 1.0
    while model(x_of(hi)) < 0:
        hi *= 2.0
        if hi > 1e300:
            return x_inf, True
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if model(x_of(mid)) >= 0:
            hi = mid
        else:
            lo = mid
    return x_of(hi), True


def solve_sca(
    cals,
    model: SensingModel,
    budget: ErrorBudget,
    cfg: ScaConfig = ScaConfig(),
    area: Optional[Area] = None,
) -> OptimizerResult:
    """Successive convex approximation.

    Each iteration replaces ``S`` by its linearisation minus a curvature
    term, solves the resulting convex problem and moves a fraction
    ``step(k)`` toward its solution.  While infeasible the full step is
    taken, which restores feasibility once the minorant admits a point.  A
    move that breaks the true constraint (or, before feasibility, fails to
    raise the success probability) doubles the curvature and is retried, so
    accepted iterates descend monotonically once feasible.
    """
    prob = CoverageProblem(cals, model, budget, area)
    n = prob.n
    c = np.full(n, 1.0 / n)
    prox = cfg.prox / n
    target = 1.0 - budget.E
    q = _initial_q(prob, cfg.delta0)
    curv = cfg.curvature
    history = [prob.power(q)]
    accepted = 0
    it = 0
    for it in range(cfg.iterations(n)):
        s_q = 1.0 - prob.event_error(q)
        feasible_now = s_q >= target
        grad_s = -prob.error_gradient(q)
        theta = cfg.step(it)
        if not 0 < theta <= 1:
            raise ValueError(f"step size must be in (0, 1], got {theta}")
        if not feasible_now:
            # restoration: jump to the surrogate point, which satisfies the minorant
            theta = 1.0
        moved = False
        for _ in range(cfg.max_backtracks):
            x_hat, _ = _surrogate_step(q, c, grad_s, s_q - target, curv, prox, prob.q_max, cfg.inner_tol)
            cand = q + theta * (x_hat - q)
            s_c = 1.0 - prob.event_error(cand)
            if feasible_now:
                ok = s_c >= target and c @ cand <= c @ q
            else:
                ok = s_c > s_q
            if ok:
                moved = True
                break
            curv *= 2.0
        if not moved:
            break
        change = float(np.max(np.abs(cand - q)))
        q = cand
        accepted += 1
        if 1.0 - prob.event_error(q) >= target:
            history.append(prob.power(q))
        if change < cfg.tol:
            break
    delta = prob.to_delta(q)
    return make_result("sca", cals, model, budget, delta, iterations=it + 1,
                       evaluations=prob.evaluations, accepted=accepted, history=history)


def _coordinate_update(prob: CoverageProblem, q: np.ndarray, j: int, target: float) -> float:
    """Smallest feasible ``q_j`` with the others fixed.

    ``S`` is affine in ``q_j``, so the feasible part of ``[0, q_max_j]`` is
    an interval and its lower end is the exact minimiser.  When the interval
    is empty the endpoint with the larger ``S`` is taken.
    """
    base, slope = prob.coordinate_terms(q, j)
    prob.evaluations += 1
    top = float(prob.q_max[j])
    if base >= target:
        return 0.0
    if slope > 0 and base + slope * top >= target:
        return min(max((target - base) / slope, 0.0), top)
    return top if slope > 0 else 0.0


def solve_bcd(
    cals,
    model: SensingModel,
    budget: ErrorBudget,
    cfg: BcdConfig = BcdConfig(),
    area: Optional[Area] = None,
) -> OptimizerResult:
    """Block coordinate descent over single thresholds.

    Sweeps the devices in ``cfg.order`` (default ascending index) and sets
    each coverage to the smallest value keeping the constraint, until a
    sweep changes nothing or ``max_iters`` sweeps have run.
    """
    prob = CoverageProblem(cals, model, budget, area)
    n = prob.n
    order = list(range(n)) if cfg.order is None else [int(j) for j in cfg.order]
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the device indices")
    target = 1.0 - budget.E
    q = _initial_q(prob, cfg.delta0)
    history = []
    sweeps = 0
    for sweeps in range(1, cfg.iterations(n) + 1):
        change = 0.0
        for j in order:
            new = _coordinate_update(prob, q, j, target)
            change = max(change, abs(new - q[j]))
            q[j] = new
            if 1.0 - prob.event_error(q) >= target - 1e-12:
                history.append(prob.power(q))
        if change < cfg.tol:
            break
    delta = prob.to_delta(q)
    return make_result("bcd", cals, model, budget, delta, iterations=sweeps,
                       evaluations=prob.evaluations, history=history)
