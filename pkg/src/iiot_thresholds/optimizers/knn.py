"""Nearest-neighbour graph with a Bayes-rule threshold update."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..metrics import conditional_activation_matrix, expected_power
from ..network import Deployment, SensingModel, threshold_floor, w_vector
from ..rng import make_rng
from ..voronoi import voronoi_partition
from .common import ErrorBudget, OptimizerResult, check_feasibility, make_result

__all__ = ["ClusterGraph", "build_cluster_graph", "solve_knn_bayes", "scale_into_feasibility"]

_DIST_NODES = 8
_SCALE_GRID = 256


@dataclass(frozen=True)
class ClusterGraph:
    """Symmetric K-nearest-neighbour graph.

    ``neighbors[j]`` holds device ids sorted by distance and ``distances[j]``
    the matching separations.  ``clusters`` counts connected components.
    """

    k: int
    neighbors: tuple
    distances: tuple
    clusters: int

    def is_symmetric(self) -> bool:
        return all(j in self.neighbors[h] for j, nb in enumerate(self.neighbors) for h in nb)


def build_cluster_graph(dep: Deployment, k: int) -> ClusterGraph:
    """Link every device with its ``k`` nearest others, then symmetrise."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = dep.n
    k_eff = min(k, n - 1)
    links = [set() for _ in range(n)]
    if k_eff > 0:
        _, idx = cKDTree(dep.positions).query(dep.positions, k=k_eff + 1)
        idx = np.asarray(idx).reshape(n, -1)
        for j in range(n):
            for h in idx[j]:
                if h != j and h < n:
                    links[j].add(int(h))
                    links[int(h)].add(j)
    neighbors, distances = [], []
    for j in range(n):
        nb = np.array(sorted(links[j]), dtype=int)
        d = np.hypot(*(dep.positions[nb] - dep.positions[j]).T) if nb.size else np.zeros(0)
        order = np.argsort(d, kind="stable")
        neighbors.append(tuple(int(v) for v in nb[order]))
        distances.append(tuple(float(v) for v in d[order]))
    rows = [j for j in range(n) for _ in neighbors[j]]
    cols = [h for j in range(n) for h in neighbors[j]]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    clusters, _ = connected_components(adj, directed=False)
    return ClusterGraph(k=k, neighbors=tuple(neighbors), distances=tuple(distances), clusters=int(clusters))


def _mean_conditional(dep, model, delta, nodes, weights) -> np.ndarray:
    """``Pr(A_j | A_h)`` averaged over events that trigger ``h``.

    Given ``h`` fires, the event is taken uniform on its coverage disk, so
    its distance ``d`` to ``h`` has density ``2 d / rho_h^2``.
    """
    rho = -np.log(delta) / model.eta
    out = np.zeros((dep.n, dep.n))
    for x, wt in zip(nodes, weights):
        # nodes on (0, 1); d = rho * x and the density contributes 2 x
        out += wt * 2.0 * x * conditional_activation_matrix(dep, model, delta, rho * x)
    return out


def scale_into_feasibility(cals, model, budget, delta, floor: float) -> tuple[np.ndarray, bool]:
    """Scale all coverage radii by one factor to meet the budget.

    Scans factors up to the one that puts the largest radius at the area
    floor and keeps the feasible factor with the lowest power; without one,
    returns ``delta`` unchanged and ``False``.
    """
    t = -np.log(delta)
    t_cap = -np.log(floor)
    if t.max() <= 0:
        t = np.full_like(t, 1e-6 * t_cap)
    best = None
    for s in np.linspace(0.0, t_cap / t.max(), _SCALE_GRID + 1)[1:]:
        cand = np.exp(-s * t)
        feasible, _ = check_feasibility(cals, model, cand, budget)
        if feasible:
            obj = expected_power(cals, model, cand)
            if best is None or obj < best[0]:
                best = (obj, cand)
    if best is None:
        return delta, False
    return best[1], True


def solve_knn_bayes(
    dep: Deployment,
    cals,
    model: SensingModel,
    budget: ErrorBudget,
    k: int = 3,
    g: Optional[int] = None,
    seed: int = 0,
    tol: float = 1e-4,
) -> OptimizerResult:
    """Propagate activation probabilities over the neighbour graph.

    Thresholds start uniform in (0, 1].  Devices are visited by decreasing
    inscribed Voronoi radius (those needing the widest coverage first); each
    sets its coverage probability to ``sum_h Pr(A_j | A_h) q_h`` over its
    neighbours and inverts the calibrated CDF for ``delta_j``.  Sweeps stop
    after ``g`` rounds (default ``ceil(sqrt(N))``) or when no threshold moves
    by ``tol``.  An infeasible outcome is rescaled uniformly if that helps.
    """
    graph = build_cluster_graph(dep, k)
    w = w_vector(cals)
    n = dep.n
    g = max(1, int(np.ceil(np.sqrt(n)))) if g is None else int(g)
    if g < 1:
        raise ValueError(f"g must be >= 1, got {g}")
    floor = threshold_floor(dep.area, model)
    a_cap = 2.0 * (np.log(floor) / model.eta) ** 2 / w
    q_cap = -np.expm1(-a_cap)
    rng = make_rng(seed)
    delta = 1.0 - rng.random(n)  # uniform on (0, 1]
    delta = np.maximum(delta, floor)
    order = np.argsort([-c.omega_min for c in voronoi_partition(dep)], kind="stable")
    nodes, weights = np.polynomial.legendre.leggauss(_DIST_NODES)
    nodes, weights = 0.5 * (nodes + 1.0), 0.5 * weights
    clamped = 0
    sweeps = 0
    change = np.inf
    evaluations = 0
    for sweeps in range(1, g + 1):
        cond = _mean_conditional(dep, model, delta, nodes, weights)
        evaluations += 1
        old = delta.copy()
        q = -np.expm1(-2.0 * (np.log(delta) / model.eta) ** 2 / w)
        for j in order:
            nb = list(graph.neighbors[j])
            target = float(cond[j, nb] @ q[nb]) if nb else float(q[j])
            if target > q_cap[j]:
                target = float(q_cap[j])
                clamped += 1
            a = -np.log1p(-target) if target > 0 else 0.0
            delta[j] = max(np.exp(-model.eta * np.sqrt(a * w[j] / 2.0)), floor)
            q[j] = target
        change = float(np.max(np.abs(delta - old)))
        if change < tol:
            break
    scaled = False
    feasible, _ = check_feasibility(cals, model, delta, budget)
    if not feasible:
        delta, scaled = scale_into_feasibility(cals, model, budget, delta, floor)
    return make_result("knn", cals, model, budget, delta, iterations=sweeps, evaluations=evaluations,
                       seed=seed, clusters=graph.clusters, clamped=clamped, scaled=scaled,
                       last_change=change)
