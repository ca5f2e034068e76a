"""Closed-form power and error metrics for a threshold vector.

Notation used throughout: for device ``j`` with calibrated scale ``w_j``,

    a_j = 2 ln(delta_j)^2 / (eta^2 w_j),   e_j = exp(-a_j),   q_j = 1 - e_j,

so ``q_j`` is the probability that a uniform epicenter falls inside the
device's coverage disk.  Treating coverage of different devices as
independent, the expected success probability is

    E[P_suc] = alpha * sum_h q_h * prod_{j != h} e_j
             = alpha * (sum_h prod_{j != h} e_j - N prod_j e_j).

``P_e`` values are per TTI and therefore scaled by ``alpha``.
"""

from __future__ import annotations

import math

import numpy as np

from .network import (
    Deployment,
    SensingModel,
    _check_delta,
    w_vector,
)

__all__ = [
    "coverage_probabilities",
    "expected_power",
    "expected_p_suc",
    "expected_p_e",
    "expected_p_miss",
    "expected_error_split",
    "success_from_coverage",
    "grad_expected_p_e",
    "grad_p_e_wrt_coverage",
    "hessian_expected_p_e",
    "transmit_matrix",
    "p_miss_at_event",
    "p_suc_at_event",
    "p_col_at_event",
    "p_e_at_event",
    "conditional_activation",
    "conditional_activation_matrix",
]


def _exponents(cals, model: SensingModel, delta) -> tuple[np.ndarray, np.ndarray]:
    w = w_vector(cals)
    delta = _check_delta(delta).reshape(-1)
    if delta.shape != w.shape:
        raise ValueError(f"threshold vector has length {delta.size}, expected {w.size}")
    a = 2.0 * np.log(delta) ** 2 / (model.eta**2 * w)
    return a, delta


def coverage_probabilities(cals, model: SensingModel, delta) -> np.ndarray:
    """``q_j``: probability that device ``j`` covers a uniform epicenter."""
    a, _ = _exponents(cals, model, delta)
    return -np.expm1(-a)


def expected_power(cals, model: SensingModel, delta) -> float:
    """Mean per-device activation probability ``W``."""
    return model.alpha * float(np.mean(coverage_probabilities(cals, model, delta)))


def success_from_coverage(q) -> float:
    """``sum_h q_h prod_{j != h} (1 - q_j)`` for independent coverage."""
    q = np.asarray(q, dtype=float)
    e = 1.0 - q
    full = e <= 0
    if full.sum() >= 2:
        return 0.0
    if full.sum() == 1:
        return float(np.prod(e[~full]))
    log_e = np.log(e)
    return float(np.sum(q * np.exp(log_e.sum() - log_e)))


def expected_p_suc(cals, model: SensingModel, delta) -> float:
    a, _ = _exponents(cals, model, delta)
    q = -np.expm1(-a)
    total = a.sum()
    return model.alpha * float(np.sum(q * np.exp(-(total - a))))


def expected_p_e(cals, model: SensingModel, delta) -> float:
    """Per-TTI error probability ``alpha - E[P_suc]``."""
    return model.alpha - expected_p_suc(cals, model, delta)


def expected_p_miss(cals, model: SensingModel, delta) -> float:
    a, _ = _exponents(cals, model, delta)
    return model.alpha * math.exp(-float(a.sum()))


def expected_error_split(cals, model: SensingModel, delta) -> dict[str, float]:
    """Analytic ``p_e``, ``p_miss`` and ``p_col`` (per TTI)."""
    p_suc = expected_p_suc(cals, model, delta)
    p_miss = expected_p_miss(cals, model, delta)
    p_e = model.alpha - p_suc
    return {"p_e": p_e, "p_miss": p_miss, "p_col": max(p_e - p_miss, 0.0)}


def _t_terms(a: np.ndarray) -> np.ndarray:
    """``T_j = sum_{h != j} q_h prod_{i != h} e_i - prod_i e_i``.

    Equal to ``sum_{h != j} prod_{i != h} e_i - N prod_i e_i`` but free of the
    cancellation in that form.
    """
    total = a.sum()
    q = -np.expm1(-a)
    terms = q * np.exp(-(total - a))
    return terms.sum() - terms - math.exp(-total)


def grad_expected_p_e(cals, model: SensingModel, delta) -> np.ndarray:
    """Gradient of :func:`expected_p_e` with respect to the thresholds.

    Component ``j`` is ``4 alpha ln(delta_j) / (eta^2 w_j delta_j) * T_j``.
    """
    a, delta = _exponents(cals, model, delta)
    w = w_vector(cals)
    b = 4.0 * np.log(delta) / (model.eta**2 * w * delta)
    return model.alpha * b * _t_terms(a)


def grad_p_e_wrt_coverage(cals, model: SensingModel, delta) -> np.ndarray:
    """Gradient of :func:`expected_p_e` with respect to ``q``.

    ``dS/dq_k = prod_{j != k} e_j - S_{-k}`` where ``S_{-k}`` is the success
    term of the other devices; finite at ``delta_k = 1`` where the threshold
    gradient vanishes.
    """
    q = coverage_probabilities(cals, model, delta)
    n = len(q)
    grad = np.empty(n)
    for k in range(n):
        rest = np.delete(q, k)
        grad[k] = np.prod(1.0 - rest) - success_from_coverage(rest)
    return -model.alpha * grad


def hessian_expected_p_e(cals, model: SensingModel, delta) -> np.ndarray:
    """Hessian of :func:`expected_p_e` with respect to the thresholds."""
    a, delta = _exponents(cals, model, delta)
    if np.any(delta >= 1):
        raise ValueError("the Hessian is only defined for thresholds in (0, 1)")
    w = w_vector(cals)
    n = len(a)
    k2 = model.eta**2 * w
    ln = np.log(delta)
    b = 4.0 * ln / (k2 * delta)
    c = 4.0 * (1.0 - ln) / (k2 * delta**2)
    total = a.sum()
    q = -np.expm1(-a)
    terms = q * np.exp(-(total - a))  # q_h prod_{i != h} e_i
    p_all = math.exp(-total)
    t = terms.sum() - terms - p_all
    # U_jk = sum_{h != j,k} q_h prod_{i != h} e_i - 2 prod_i e_i
    u = terms.sum() - terms[:, None] - terms[None, :] - 2.0 * p_all
    hess_s = np.outer(b, b) * u
    hess_s[np.diag_indices(n)] = t * (b * b - c)
    return -model.alpha * hess_s


def transmit_matrix(dep: Deployment, model: SensingModel, delta, points) -> np.ndarray:
    """Boolean ``(events, N)``: device transmits iff ``exp(-eta d) >= delta``."""
    delta = _check_delta(delta).reshape(-1)
    if delta.size != dep.n:
        raise ValueError(f"threshold vector has length {delta.size}, expected {dep.n}")
    power = np.exp(-model.eta * dep.distances_to(points))
    return power >= delta[None, :]


def _event_result(value: np.ndarray, points) -> float | np.ndarray:
    return float(value[0]) if np.asarray(points).ndim == 1 else value


def p_miss_at_event(dep, model, delta, e):
    """``alpha`` if no device clears its threshold for the event, else 0."""
    count = transmit_matrix(dep, model, delta, e).sum(axis=1)
    return _event_result(np.where(count == 0, model.alpha, 0.0), e)


def p_suc_at_event(dep, model, delta, e):
    """``alpha`` iff exactly one device transmits."""
    count = transmit_matrix(dep, model, delta, e).sum(axis=1)
    return _event_result(np.where(count == 1, model.alpha, 0.0), e)


def p_col_at_event(dep, model, delta, e):
    """``alpha - P_miss - P_suc``: ``alpha`` iff two or more devices transmit."""
    count = transmit_matrix(dep, model, delta, e).sum(axis=1)
    return _event_result(np.where(count >= 2, model.alpha, 0.0), e)


def p_e_at_event(dep, model, delta, e):
    """``alpha - P_suc`` at the given epicenter(s)."""
    count = transmit_matrix(dep, model, delta, e).sum(axis=1)
    return _event_result(np.where(count == 1, 0.0, model.alpha), e)


ANGLE_SAMPLES = 4096


def _angular_fraction(dep: Deployment, h: int, j: int, d_ih: float, radius: float) -> float:
    """Share of in-area points at distance ``d_ih`` from ``h`` within ``radius`` of ``j``."""
    phi = (np.arange(ANGLE_SAMPLES) + 0.5) * (2.0 * np.pi / ANGLE_SAMPLES)
    ph = dep.positions[h]
    pts = ph + d_ih * np.column_stack([np.cos(phi), np.sin(phi)])
    inside = dep.area.contains(pts)
    if not inside.any():
        return 0.0
    dj = np.hypot(*(pts[inside] - dep.positions[j]).T)
    return float(np.mean(dj <= radius))


def conditional_activation(
    dep: Deployment, model: SensingModel, delta_j: float, h: int, j: int, d_ih: float
) -> float:
    """Probability that device ``j`` is triggered by an event that triggered ``h``.

    The event sits at distance ``d_ih`` from ``h`` at a uniformly random angle;
    ``j`` (at separation ``r`` from ``h``) transmits when the event lies within
    its coverage radius ``rho``.  By the cosine rule that happens on an angular
    window of half-width ``arccos((d^2 + r^2 - rho^2) / (2 d r))``.  Angles
    whose event point would leave the rectangle are discounted with the octant
    correction ``2 pi - 8 arccos(R / max(R, d))``; when that correction is not
    positive the in-area angular fraction is integrated numerically.
    """
    if h == j:
        raise ValueError("conditional activation needs two distinct devices")
    if not d_ih > 0:
        raise ValueError("event distance must be positive")
    delta_j = float(_check_delta(delta_j))
    r_jh = float(np.hypot(*(dep.positions[j] - dep.positions[h])))
    if r_jh == 0:
        raise ValueError("devices h and j coincide")
    rho_sq = math.log(delta_j) ** 2 / model.eta**2
    arg = (d_ih**2 + r_jh**2 - rho_sq) / (2.0 * d_ih * r_jh)
    half_window = math.acos(min(1.0, max(-1.0, arg)))
    xh, yh = dep.positions[h]
    R = min(xh, yh, dep.area.L - xh, dep.area.H - yh)
    r = max(R, d_ih)
    denom = 2.0 * math.pi - 8.0 * math.acos(min(1.0, R / r))
    if denom <= 0:
        value = _angular_fraction(dep, h, j, d_ih, math.sqrt(rho_sq))
    else:
        value = 2.0 * half_window / denom
    return min(1.0, max(0.0, value))


def conditional_activation_matrix(
    dep: Deployment, model: SensingModel, delta, d_event, angle_samples: int = 512
) -> np.ndarray:
    """All pairs at once: entry ``[j, h]`` is ``conditional_activation(.., h, j, d_event[h])``.

    The diagonal and pairs with ``d_event[h] == 0`` are set to 0.  The numeric
    fallback uses ``angle_samples`` angles per device ``h``.
    """
    delta = _check_delta(delta).reshape(-1)
    d = np.asarray(d_event, dtype=float).reshape(-1)
    pos = dep.positions
    n = len(pos)
    sep = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])  # [j, h]
    rho_sq = (np.log(delta) / model.eta) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = (d[None, :] ** 2 + sep**2 - rho_sq[:, None]) / (2.0 * d[None, :] * sep)
    half = np.arccos(np.clip(np.nan_to_num(arg, nan=1.0, posinf=1.0, neginf=-1.0), -1.0, 1.0))
    R = np.minimum.reduce([pos[:, 0], pos[:, 1], dep.area.L - pos[:, 0], dep.area.H - pos[:, 1]])
    r = np.maximum(R, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(r > 0, R / np.where(r > 0, r, 1.0), 1.0)
    denom = 2.0 * np.pi - 8.0 * np.arccos(np.clip(ratio, -1.0, 1.0))
    out = np.where(denom[None, :] > 0, 2.0 * half / np.where(denom > 0, denom, 1.0)[None, :], 0.0)
    phi = (np.arange(angle_samples) + 0.5) * (2.0 * np.pi / angle_samples)
    ring = np.column_stack([np.cos(phi), np.sin(phi)])
    radius = np.sqrt(rho_sq)
    for h in np.flatnonzero((denom <= 0) & (d > 0)):
        pts = pos[h] + d[h] * ring
        pts = pts[dep.area.contains(pts)]
        if len(pts) == 0:
            out[:, h] = 0.0
            continue
        dj = np.hypot(pts[:, None, 0] - pos[None, :, 0], pts[:, None, 1] - pos[None, :, 1])
        out[:, h] = np.mean(dj <= radius[None, :], axis=0)
    out[:, d <= 0] = 0.0
    np.fill_diagonal(out, 0.0)
    return np.clip(out, 0.0, 1.0)
