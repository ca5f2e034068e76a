import json
import math

import numpy as np
import pytest

from iiot_thresholds.metrics import expected_p_e, expected_power
from iiot_thresholds.network import (
    Area,
    Deployment,
    SensingModel,
    calibrate_w,
    generate_deployment,
    threshold_floor,
)
from iiot_thresholds.optimizers import (
    METHODS,
    BcdConfig,
    CoverageProblem,
    ErrorBudget,
    EvoConfig,
    QConfig,
    QTable,
    ScaConfig,
    build_cluster_graph,
    check_feasibility,
    equal_delta_asymptotic,
    level_grid,
    make_result,
    solve,
    solve_bcd,
    solve_equal_delta,
    solve_ga,
    solve_knn_bayes,
    solve_pso,
    solve_qlearning,
    solve_sca,
    solve_voronoi,
    voronoi_thresholds,
)
from iiot_thresholds.optimizers.equal import BISECTION_TOL
from iiot_thresholds.rng import make_rng
from instances import TOY_AREA, TOY_BUDGET, TOY_MODEL, symmetric_pair, toy
from oracles import single_device_expected_reward

AREA = Area(50.0, 50.0)
MODEL = SensingModel(alpha=0.1, eta=1.0)
BUDGET = ErrorBudget(0.1)


@pytest.fixture(scope="module")
def desk25():
    dep = generate_deployment(AREA, 25, seed=5)
    return dep, calibrate_w(dep, MODEL, samples=100_000, seed=5)


# -- budget and feasibility


def test_budget_domain():
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            ErrorBudget(bad)
    assert ErrorBudget(0.1).per_tti(MODEL) == pytest.approx(0.01)


def test_all_ones_infeasible():
    feasible, margin = check_feasibility(np.full(5, 900.0), MODEL, np.ones(5), BUDGET)
    assert not feasible and margin == pytest.approx(BUDGET.E - 1.0)


def test_full_coverage_collides_and_is_infeasible(desk25):
    dep, cals = desk25
    floor = threshold_floor(AREA, MODEL)
    feasible, margin = check_feasibility(cals, MODEL, np.full(25, floor), BUDGET)
    assert not feasible and margin < -0.8


def test_feasibility_flag_agrees_with_simulation_away_from_boundary():
    from iiot_thresholds.sim import SimConfig, run_slots

    checked = 0
    for s in range(3):
        dep = generate_deployment(AREA, 25, seed=s)
        cals = calibrate_w(dep, MODEL, samples=100_000, seed=s)
        for method in ("equal", "sca", "bcd", "voronoi_min", "voronoi_max"):
            res = solve(method, dep, cals, MODEL, BUDGET, {"max_iters": 200} if method == "sca" else None)
            rep = run_slots(dep, MODEL, res.delta, SimConfig(100_000, seed=s))
            if abs(rep.p_e_event - BUDGET.E) > 3 * rep.p_e_event_se:
                assert res.feasible == (rep.p_e_event < BUDGET.E), (s, method)
                checked += 1
    assert checked >= 10


def test_result_json(desk25):
    dep, cals = desk25
    res = solve_voronoi(dep, cals, MODEL, BUDGET, "min")
    data = json.loads(res.to_json())
    assert data["method"] == "voronoi_min" and len(data["delta"]) == 25
    assert data["feasible"] == res.feasible


def test_make_result_clips_into_unit_interval():
    res = make_result("x", np.full(2, 900.0), MODEL, BUDGET, [1.5, 0.0])
    assert np.all((res.delta > 0) & (res.delta <= 1))


def test_coverage_problem_round_trip(desk25):
    dep, cals = desk25
    prob = CoverageProblem(cals, MODEL, BUDGET, AREA)
    delta = np.exp(-make_rng(1).uniform(0.5, 20, 25))
    assert np.allclose(prob.to_delta(prob.to_q(delta)), delta, rtol=1e-9)
    q = prob.to_q(delta)
    assert prob.power(q) == pytest.approx(expected_power(cals, MODEL, delta))
    assert prob.event_error(q) == pytest.approx(expected_p_e(cals, MODEL, delta) / MODEL.alpha)


# -- equal threshold benchmark


def test_equal_single_device_closed_form():
    w = 1591.55
    res = solve_equal_delta([w], MODEL, BUDGET)
    # success per event is 1 - exp(-a), so the boundary is a = ln(1/E)
    closed = math.exp(-MODEL.eta * math.sqrt(w * math.log(1 / BUDGET.E) / 2))
    assert res.feasible
    assert res.delta[0] == pytest.approx(closed, rel=1e-9)


def test_equal_bisection_postcondition(desk25):
    dep, cals = desk25
    budget = ErrorBudget(0.7)
    res = solve_equal_delta(cals, MODEL, budget, AREA)
    assert res.feasible and res.info["bisection"]
    assert not check_feasibility(cals, MODEL, res.delta * (1 + 1e-3), budget)[0]
    assert abs(res.margin) < 1e-6


def test_equal_sparse_pair_is_infeasible():
    dep = Deployment(AREA, [(5.0, 5.0), (45.0, 45.0)])
    cals = calibrate_w(dep, MODEL, samples=20_000, seed=0)
    assert not solve_equal_delta(cals, MODEL, BUDGET, AREA).feasible


def test_equal_infeasible_at_desk_scale_budget(desk25):
    dep, cals = desk25
    # a common threshold gives at most N q (1 - q)^(N - 1) < 0.9 success per event
    res = solve_equal_delta(cals, MODEL, BUDGET, AREA)
    success = 1.0 - (BUDGET.E - res.margin)
    assert not res.feasible
    assert 0.3 < success < 0.4


def test_asymptote_reference_value():
    v = equal_delta_asymptotic(1591.55, 100)
    assert v == pytest.approx(math.exp(-math.sqrt(1591.55 * (math.log(100) - math.log(0.9)) / 198)))
    assert v == pytest.approx(2.0e-3, rel=0.1)


def test_asymptote_limits_and_errors():
    assert equal_delta_asymptotic(1591.55, 10**12) > 0.999
    with pytest.raises(ValueError):
        equal_delta_asymptotic(1591.55, 1)


def test_asymptote_approaches_bisection_at_loose_budget():
    budget = ErrorBudget(0.7)
    gaps = []
    for n in (50, 100, 200, 400):
        res = solve_equal_delta(np.full(n, 1591.55), MODEL, budget)
        asym = equal_delta_asymptotic(1591.55, n, E=budget.E)
        gaps.append(abs(asym - res.delta[0]) / res.delta[0])
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_bisection_tolerance():
    assert BISECTION_TOL <= 1e-6


# -- SCA / BCD


@pytest.mark.parametrize("seed", [0, 4, 7])
def test_sca_toy_near_grid_optimum(seed):
    dep, cals, w_star = toy(seed)
    res = solve_sca(cals, TOY_MODEL, TOY_BUDGET,
                    ScaConfig(delta0=voronoi_thresholds(dep, TOY_MODEL), max_iters=100), TOY_AREA)
    assert res.feasible
    assert res.objective <= 1.05 * w_star


def test_sca_history_monotone(desk25):
    dep, cals = desk25
    res = solve_sca(cals, MODEL, BUDGET, ScaConfig(delta0=voronoi_thresholds(dep, MODEL), max_iters=200), AREA)
    hist = np.array(res.info["history"][1:])  # first entry is the starting point
    assert res.feasible
    assert np.all(np.diff(hist) <= 1e-15)


def test_sca_symmetric_pair():
    dep, w = symmetric_pair()
    res = solve_sca(w, MODEL, ErrorBudget(0.7), ScaConfig(delta0=np.full(2, 0.2), max_iters=200), AREA)
    assert res.feasible
    assert abs(res.delta[0] - res.delta[1]) <= 1e-3


def test_sca_config_validation():
    with pytest.raises(ValueError):
        ScaConfig(max_iters=0).iterations(4)
    assert ScaConfig().iterations(25) == 5
    with pytest.raises(ValueError):
        solve_sca(np.full(2, 400.0), MODEL, BUDGET, ScaConfig(step=lambda k: 2.0))


@pytest.mark.parametrize("seed", [1, 5])
def test_bcd_toy_near_grid_optimum(seed):
    dep, cals, w_star = toy(seed)
    res = solve_bcd(cals, TOY_MODEL, TOY_BUDGET, BcdConfig(delta0=voronoi_thresholds(dep, TOY_MODEL)), TOY_AREA)
    assert res.feasible
    assert res.objective <= 1.05 * w_star


def test_bcd_updates_never_raise_power(desk25):
    dep, cals = desk25
    res = solve_bcd(cals, MODEL, BUDGET, BcdConfig(delta0=voronoi_thresholds(dep, MODEL)), AREA)
    assert res.feasible
    assert np.all(np.diff(res.info["history"]) <= 1e-15)


def test_bcd_order_permutation_on_symmetric_pair():
    dep, w = symmetric_pair()
    budget = ErrorBudget(0.7)
    a = solve_bcd(w, MODEL, budget, BcdConfig(delta0=np.full(2, 0.2), order=[0, 1]), AREA)
    b = solve_bcd(w, MODEL, budget, BcdConfig(delta0=np.full(2, 0.2), order=[1, 0]), AREA)
    assert a.feasible and b.feasible
    assert a.objective == pytest.approx(b.objective, rel=1e-6)
    assert np.allclose(a.delta, b.delta[::-1])


def test_bcd_order_must_be_permutation():
    with pytest.raises(ValueError):
        solve_bcd(np.full(2, 400.0), MODEL, BUDGET, BcdConfig(order=[0, 0]))


# -- Voronoi


def test_voronoi_centred_device():
    dep = Deployment(AREA, [(25.0, 25.0)])
    for eta in (1.0, 0.3):
        m = SensingModel(eta=eta)
        assert voronoi_thresholds(dep, m, "min")[0] == pytest.approx(math.exp(-25 * eta))


def test_voronoi_variant_ordering(desk25):
    dep, _ = desk25
    lo, mid, hi = (voronoi_thresholds(dep, MODEL, v) for v in ("min", "mean", "max"))
    assert np.all(lo >= mid) and np.all(mid >= hi)


def test_voronoi_tags_and_bad_variant(desk25):
    dep, cals = desk25
    assert solve_voronoi(dep, cals, MODEL, BUDGET, "max").method == "voronoi_max"
    with pytest.raises(ValueError):
        voronoi_thresholds(dep, MODEL, "median")


# -- KNN


def test_cluster_graph_symmetric(desk25):
    dep, _ = desk25
    graph = build_cluster_graph(dep, 3)
    assert graph.is_symmetric()
    assert all(len(nb) >= 3 for nb in graph.neighbors)
    assert graph.clusters >= 1
    with pytest.raises(ValueError):
        build_cluster_graph(dep, 0)


def test_cluster_graph_counts_components():
    dep = Deployment(AREA, [(1, 1), (2, 1), (48, 48), (49, 48)])
    assert build_cluster_graph(dep, 1).clusters == 2


def test_knn_reaches_fixed_point(desk25):
    dep, cals = desk25
    res = solve_knn_bayes(dep, cals, MODEL, BUDGET, k=3, g=50, seed=1)
    assert res.info["last_change"] < 1e-4
    assert np.all((res.delta > 0) & (res.delta <= 1))


def test_knn_equilateral_symmetry():
    c, r = np.array([25.0, 25.0]), 6.0
    pts = [tuple(c + r * np.array([math.cos(t), math.sin(t)])) for t in (0.5, 0.5 + 2 * math.pi / 3,
                                                                         0.5 + 4 * math.pi / 3)]
    dep = Deployment(AREA, pts)
    res = solve_knn_bayes(dep, np.full(3, 1200.0), MODEL, BUDGET, k=2, g=20, seed=3)
    assert np.ptp(res.delta) <= 1e-6


def test_knn_deterministic(desk25):
    dep, cals = desk25
    a = solve_knn_bayes(dep, cals, MODEL, BUDGET, seed=9)
    b = solve_knn_bayes(dep, cals, MODEL, BUDGET, seed=9)
    assert np.array_equal(a.delta, b.delta)


# -- GA / PSO


def test_evo_config_validation():
    with pytest.raises(ValueError):
        EvoConfig(population=1)
    with pytest.raises(ValueError):
        EvoConfig(mutation_rate=1.5)
    assert EvoConfig().n_generations(25) == 5


@pytest.mark.parametrize("solver", [solve_ga, solve_pso])
def test_best_fitness_monotone_and_deterministic(solver, desk25):
    dep, cals = desk25
    cfg = EvoConfig(generations=30, seed=4)
    a = solver(cals, MODEL, BUDGET, cfg, AREA)
    b = solver(cals, MODEL, BUDGET, cfg, AREA)
    assert np.all(np.diff(a.info["best_fitness"]) <= 0)
    assert np.array_equal(a.delta, b.delta) and a.objective == b.objective


@pytest.mark.parametrize("solver", [solve_ga, solve_pso])
@pytest.mark.parametrize("seed", [2, 8])
def test_evo_toy_near_grid_optimum(solver, seed):
    dep, cals, w_star = toy(seed)
    res = solver(cals, TOY_MODEL, TOY_BUDGET, EvoConfig(generations=100, seed=seed), TOY_AREA)
    assert res.feasible
    assert res.objective <= 1.10 * w_star


def _evaluations_to(trace, target):
    return next((ev for ev, p in trace if p is not None and p <= target), math.inf)


def test_voronoi_seeded_swarm_converges_faster():
    wins = 0
    for s in range(10):
        dep = generate_deployment(AREA, 25, seed=1000 + s)
        cals = calibrate_w(dep, MODEL, samples=100_000, seed=s)
        ref = solve("sca", dep, cals, MODEL, BUDGET, {"max_iters": 200}).objective
        seeded = solve("pso", dep, cals, MODEL, BUDGET, {"generations": 100, "voronoi_seed": True}, seed=s)
        plain = solve("pso", dep, cals, MODEL, BUDGET, {"generations": 100}, seed=s)
        target = 1.10 * ref
        wins += _evaluations_to(seeded.info["trace"], target) < _evaluations_to(plain.info["trace"], target)
    assert wins >= 6


# -- Q-learning


def test_level_grid():
    dep = Deployment(AREA, [(1.0, 1.0)])
    grid = level_grid(dep, MODEL, 20)
    assert grid[-1] == 1.0 and grid[0] == pytest.approx(threshold_floor(AREA, MODEL))
    assert np.all(np.diff(np.log(grid)) > 0)
    with pytest.raises(ValueError):
        level_grid(dep, MODEL, 0)


def test_empty_action_grid_is_an_error():
    dep = Deployment(AREA, [(1.0, 1.0)])
    with pytest.raises(ValueError):
        solve_qlearning(dep, [900.0], MODEL, BUDGET, QConfig(levels=0))


def test_qtable_update_identity():
    table = QTable(1, 3, learning_rate=1.0, discount=0.5)
    rng = make_rng(0)
    last = {}
    for step, (a, r) in enumerate([(0, 1.0), (2, -3.0), (0, 0.25), (1, 7.0), (2, 2.0)]):
        table.update(0, a, r, None)
        last[a] = r
        for action, reward in last.items():
            assert table.values[0, action] == reward
    assert table.choose(0, 0.0, rng) == 1


def test_qtable_ties_and_validation():
    assert QTable(2, 4, 0.5, 0.9).greedy(1) == 0
    with pytest.raises(ValueError):
        QTable(1, 2, 0.0, 0.9)
    with pytest.raises(ValueError):
        QConfig(epsilon_start=1.5)


def test_single_device_bandit_matches_enumeration():
    pos = (18.0, 31.0)
    dep = Deployment(AREA, [pos])
    grid = level_grid(dep, MODEL, 2)
    oracle = [single_device_expected_reward(50, 50, pos, MODEL.eta, MODEL.alpha, d) for d in grid]
    res = solve_qlearning(dep, [900.0], MODEL, BUDGET, QConfig(levels=2, ttis=4_000, seed=1))
    assert res.info["levels"][0] == int(np.argmax(oracle))


def test_qlearning_deterministic_and_in_grid(desk25):
    dep, cals = desk25
    cfg = QConfig(ttis=500, seed=3)
    a = solve_qlearning(dep, cals, MODEL, BUDGET, cfg)
    b = solve_qlearning(dep, cals, MODEL, BUDGET, cfg)
    assert np.array_equal(a.delta, b.delta)
    assert set(np.round(a.delta, 12)) <= set(np.round(level_grid(dep, MODEL), 12))


# -- registry


def test_registry_runs_every_method():
    dep = generate_deployment(AREA, 5, seed=2)
    cals = calibrate_w(dep, MODEL, samples=20_000, seed=2)
    small = {"qlearn": {"ttis": 200}, "ga": {"generations": 3}, "pso": {"generations": 3}}
    for method in METHODS:
        res = solve(method, dep, cals, MODEL, BUDGET, small.get(method), seed=1)
        assert res.method == method
        assert np.all((res.delta > 0) & (res.delta <= 1))
        assert res.feasible == check_feasibility(cals, MODEL, res.delta, BUDGET)[0]


def test_registry_rejects_unknowns():
    dep = generate_deployment(AREA, 3, seed=2)
    cals = np.full(3, 900.0)
    with pytest.raises(ValueError):
        solve("simplex", dep, cals, MODEL, BUDGET)
    with pytest.raises(ValueError):
        solve("ga", dep, cals, MODEL, BUDGET, {"temperature": 3})
