"""Thresholds from Voronoi cell geometry."""

from __future__ import annotations

import numpy as np

from ..network import Deployment, SensingModel
from ..voronoi import voronoi_partition
from .common import ErrorBudget, OptimizerResult, make_result

__all__ = ["VARIANTS", "voronoi_thresholds", "solve_voronoi"]

VARIANTS = ("min", "mean", "max")


def voronoi_thresholds(dep: Deployment, model: SensingModel, variant: str = "min", cells=None) -> np.ndarray:
    """``exp(-eta * Omega_j)`` with ``Omega_j`` the chosen cell distance."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown Voronoi variant {variant!r}; expected one of {VARIANTS}")
    cells = voronoi_partition(dep) if cells is None else cells
    omega = np.array([getattr(c, f"omega_{variant}") for c in cells])
    return np.exp(-model.eta * omega)


def solve_voronoi(
    dep: Deployment, cals, model: SensingModel, budget: ErrorBudget, variant: str = "min"
) -> OptimizerResult:
    """Cover the inscribed (``min``), average (``mean``) or circumscribed
    (``max``) disk of each device's Voronoi cell."""
    delta = voronoi_thresholds(dep, model, variant)
    return make_result(f"voronoi_{variant}", cals, model, budget, delta)
