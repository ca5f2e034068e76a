"""Slotted-time Monte Carlo simulator.

Each TTI carries an event with probability ``alpha``; the epicenter is uniform
on the area unless a fixed one is configured.  Device ``j`` transmits when
``exp(-eta d_j) >= delta_j``.  An event TTI is a success with exactly one
transmitter, a collision with two or more and a miss with none.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .network import Deployment, SensingModel, _check_delta, coverage_radius
from .rng import make_rng

__all__ = [
    "SimConfig",
    "TtiOutcome",
    "SimReport",
    "run_slots",
    "estimate_error_mc",
    "RewardConfig",
    "RlState",
    "rl_environment_step",
    "classify",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = "1"
IDLE, SUCCESS, COLLISION, MISS = "idle", "success", "collision", "miss"
OUTCOMES = (IDLE, SUCCESS, COLLISION, MISS)
_CHUNK = 65_536


@dataclass(frozen=True)
class SimConfig:
    tti_count: int
    seed: int = 0
    fixed_epicenter: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.tti_count < 1:
            raise ValueError(f"tti_count must be >= 1, got {self.tti_count}")


@dataclass(frozen=True)
class TtiOutcome:
    event_occurred: bool
    epicenter: Optional[tuple[float, float]]
    transmitters: frozenset
    classification: str


def classify(event_occurred: bool, n_tx: int) -> str:
    if not event_occurred:
        return IDLE
    if n_tx == 0:
        return MISS
    return SUCCESS if n_tx == 1 else COLLISION


def _binom_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n > 0 else float("nan")


@dataclass
class SimReport:
    """Tallies of a simulation run.

    Rates named ``p_*`` are per TTI (comparable with the analytic metrics);
    ``*_event`` rates are conditional on an event having occurred.  ``w`` is
    the mean per-device fraction of TTIs spent transmitting.
    """

    tti_count: int
    events: int
    success: int
    collision: int
    miss: int
    idle: int
    active_fraction: list[float]
    p_e: float
    p_e_se: float
    p_miss: float
    p_miss_se: float
    p_col: float
    p_col_se: float
    p_e_event: float
    p_e_event_se: float
    w: float
    w_se: float
    seed: int = 0
    schema_version: str = field(default=SCHEMA_VERSION)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "SimReport":
        if str(data.get("schema_version")) != SCHEMA_VERSION:
            raise ValueError(f"unsupported SimReport schema {data.get('schema_version')!r}")
        return cls(**data)


def _uniform_points(rng: np.random.Generator, area, n: int) -> np.ndarray:
    return rng.random((n, 2)) * np.array([area.L, area.H])


def run_slots(dep: Deployment, model: SensingModel, delta, cfg: SimConfig) -> SimReport:
    """Simulate ``cfg.tti_count`` TTIs and tally the outcomes."""
    delta = _check_delta(delta).reshape(-1)
    if delta.size != dep.n:
        raise ValueError(f"threshold vector has length {delta.size}, expected {dep.n}")
    radius = -np.log(delta) / model.eta
    rng = make_rng(cfg.seed)
    n = dep.n
    active = np.zeros(n, dtype=np.int64)
    success = collision = miss = events = 0
    sum_frac = sum_frac_sq = 0.0
    remaining = cfg.tti_count
    while remaining > 0:
        block = min(remaining, _CHUNK)
        remaining -= block
        has_event = rng.random(block) < model.alpha
        k = int(has_event.sum())
        if cfg.fixed_epicenter is not None:
            pts = np.repeat(np.array(cfg.fixed_epicenter, dtype=float)[None, :], k, axis=0)
        else:
            pts = _uniform_points(rng, dep.area, k)
        # d <= -ln(delta)/eta  <=>  exp(-eta d) >= delta
        tx = dep.distances_to(pts) <= radius[None, :] if k else np.zeros((0, n), bool)
        count = tx.sum(axis=1)
        active += tx.sum(axis=0)
        events += k
        success += int(np.sum(count == 1))
        collision += int(np.sum(count >= 2))
        miss += int(np.sum(count == 0))
        frac = count / n
        sum_frac += float(frac.sum())
        sum_frac_sq += float(np.dot(frac, frac))
    t = cfg.tti_count
    p_e = (collision + miss) / t
    p_miss = miss / t
    p_col = collision / t
    w = sum_frac / t
    w_var = max(sum_frac_sq / t - w * w, 0.0)
    p_e_event = (collision + miss) / events if events else float("nan")
    return SimReport(
        tti_count=t,
        events=events,
        success=success,
        collision=collision,
        miss=miss,
        idle=t - events,
        active_fraction=(active / t).tolist(),
        p_e=p_e,
        p_e_se=_binom_se(p_e, t),
        p_miss=p_miss,
        p_miss_se=_binom_se(p_miss, t),
        p_col=p_col,
        p_col_se=_binom_se(p_col, t),
        p_e_event=p_e_event,
        p_e_event_se=_binom_se(p_e_event, events) if events else float("nan"),
        w=w,
        w_se=math.sqrt(w_var / t),
        seed=cfg.seed,
    )


def estimate_error_mc(
    dep: Deployment, model: SensingModel, delta, epicenters: int, seed: int
) -> tuple[float, float]:
    """Average of the per-epicenter error ``alpha - P_suc`` over uniform points.

    Returns ``(estimate, standard_error)``.
    """
    if epicenters < 1000:
        raise ValueError(f"need at least 1e3 epicenters, got {epicenters}")
    delta = _check_delta(delta).reshape(-1)
    radius = -np.log(delta) / model.eta
    rng = make_rng(seed)
    singles = 0
    remaining = epicenters
    while remaining > 0:
        block = min(remaining, _CHUNK)
        remaining -= block
        pts = _uniform_points(rng, dep.area, block)
        count = (dep.distances_to(pts) <= radius[None, :]).sum(axis=1)
        singles += int(np.sum(count == 1))
    fail = 1.0 - singles / epicenters
    return model.alpha * fail, model.alpha * _binom_se(fail, epicenters)


@dataclass(frozen=True)
class RewardConfig:
    """Weights of the per-TTI reward.

    ``mu1`` scales the collision term and ``mu2`` the miss term.  With
    ``silent_collision_bonus`` a device that stayed silent during a collision
    gets ``rho = -1`` (turning its collision penalty into a bonus); otherwise
    its ``rho`` is 0.
    """

    mu1: float = 1.0
    mu2: float = 1.0
    silent_collision_bonus: bool = True


@dataclass(frozen=True)
class RlState:
    """Per-device threshold-level index plus the last TTI's outcome class."""

    levels: tuple[int, ...]
    last_outcome: str = IDLE


def _utility_terms(dep, model, delta, cals_w, epicenter) -> np.ndarray:
    """``sum_h Pr(A_j | A_h) Pr(p >= delta_h)`` for each device ``j``.

    ``Pr(p >= delta_h)`` is the calibrated coverage probability of ``h``; the
    conditional term is evaluated at the realised event distance to ``h``.
    """
    from .metrics import conditional_activation_matrix

    d = dep.distances_to(np.asarray(epicenter))[0]
    q = -np.expm1(-2.0 * np.log(delta) ** 2 / (model.eta**2 * cals_w))
    cond = conditional_activation_matrix(dep, model, delta, d)
    return cond @ q


def rl_environment_step(
    state: RlState,
    action,
    dep: Deployment,
    model: SensingModel,
    rng: np.random.Generator,
    level_thresholds,
    cals_w=None,
    reward: RewardConfig = RewardConfig(),
    include_utility: bool = True,
) -> tuple[RlState, np.ndarray]:
    """Apply per-device threshold levels and simulate one TTI.

    ``action`` holds one level index per device into ``level_thresholds``.
    Returns the next state and the per-device reward vector; the network
    reward is its sum.  Device ``j`` receives

        sum_h Pr(A_j | A_h) Pr(p >= delta_h) - mu1 p(d_j) rho_j - mu2 p(d_j) sigma

    where ``rho_j`` is 1 for a transmitter in a collision, -1 for a silent
    device in a collision (see :class:`RewardConfig`), 0 otherwise, and
    ``sigma`` is 1 on a miss.  TTIs without an event yield zero reward.
    """
    levels = np.asarray(action, dtype=int).reshape(-1)
    grid = np.asarray(level_thresholds, dtype=float)
    if levels.size != dep.n:
        raise ValueError(f"action has {levels.size} entries, expected {dep.n}")
    if len(grid) == 0 or np.any(levels < 0) or np.any(levels >= len(grid)):
        raise ValueError("action level outside the threshold grid")
    delta = _check_delta(grid[levels])
    n = dep.n
    rewards = np.zeros(n)
    if rng.random() >= model.alpha:
        return RlState(tuple(int(v) for v in levels), IDLE), rewards
    epicenter = rng.random(2) * np.array([dep.area.L, dep.area.H])
    dist = dep.distances_to(epicenter)[0]
    power = np.exp(-model.eta * dist)
    tx = power >= delta
    outcome = classify(True, int(tx.sum()))
    if outcome == COLLISION:
        rho = np.where(tx, 1.0, -1.0 if reward.silent_collision_bonus else 0.0)
    else:
        rho = np.zeros(n)
    sigma = 1.0 if outcome == MISS else 0.0
    rewards = -reward.mu1 * power * rho - reward.mu2 * power * sigma
    if include_utility and n > 1:
        w = np.full(n, 2.0 * dep.area.measure / math.pi) if cals_w is None else np.asarray(cals_w, float)
        rewards = rewards + _utility_terms(dep, model, delta, w, epicenter)
    return RlState(tuple(int(v) for v in levels), outcome), rewards
