"""Deployments, sensing model and the squared-distance CDF.

A device ``j`` at ``(x_j, y_j)`` transmits on an event at distance ``d`` when
the sensed power ``exp(-eta * d)`` clears its threshold ``delta_j``, i.e. when
the event falls inside a disk of radius ``-ln(delta_j) / eta``.  With the
epicenter uniform on the area, the activation probability is therefore the
CDF of ``Z = d**2`` evaluated at ``ln(delta_j)**2 / eta**2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .rng import make_rng

__all__ = [
    "Area",
    "Device",
    "Deployment",
    "SensingModel",
    "DeviceGeometry",
    "CalibratedCdf",
    "sensing_power",
    "coverage_radius",
    "threshold_for_radius",
    "threshold_floor",
    "disk_coverage_fraction",
    "exact_cdf_z",
    "arcsin_cdf_z",
    "approx_cdf_z",
    "calibrate_w",
    "activation_probability",
    "generate_deployment",
    "load_deployment",
    "save_deployment",
]

# Upper end of the squared-distance range where the exponential CDF form is
# fitted and validated, in units of 1/eta**2.
VALID_Z_SCALE = 200.0


@dataclass(frozen=True)
class Area:
    """Rectangle ``[0, L] x [0, H]`` in meters."""

    L: float
    H: float

    def __post_init__(self):
        if not (self.L > 0 and self.H > 0) or not (math.isfinite(self.L) and math.isfinite(self.H)):
            raise ValueError(f"area sides must be finite and positive, got L={self.L}, H={self.H}")

    @property
    def measure(self) -> float:
        return self.L * self.H

    @property
    def diagonal(self) -> float:
        return math.hypot(self.L, self.H)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        return (
            (p[:, 0] >= -tol) & (p[:, 0] <= self.L + tol)
            & (p[:, 1] >= -tol) & (p[:, 1] <= self.H + tol)
        )


@dataclass(frozen=True)
class Device:
    id: int
    x: float
    y: float


class Deployment:
    """An area plus fixed device coordinates.

    Positions are held as a read-only ``(N, 2)`` float array; ``devices``
    gives the same data as :class:`Device` records.
    """

    __slots__ = ("area", "positions")

    def __init__(self, area: Area, positions):
        pos = np.array(positions, dtype=float, copy=True).reshape(-1, 2)
        if pos.shape[0] < 1:
            raise ValueError("a deployment needs at least one device")
        if not np.all(np.isfinite(pos)):
            raise ValueError("device positions must be finite")
        if not np.all(area.contains(pos)):
            raise ValueError("all devices must lie inside the area")
        pos.setflags(write=False)
        object.__setattr__(self, "area", area)
        object.__setattr__(self, "positions", pos)

    def __setattr__(self, name, value):
        raise AttributeError("Deployment is immutable")

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Deployment):
            return NotImplemented
        return self.area == other.area and np.array_equal(self.positions, other.positions)

    def __repr__(self) -> str:
        return f"Deployment(area={self.area!r}, n={len(self)})"

    @property
    def n(self) -> int:
        return len(self)

    @property
    def devices(self) -> list[Device]:
        return [Device(i, float(x), float(y)) for i, (x, y) in enumerate(self.positions)]

    def geometry(self, j: int) -> "DeviceGeometry":
        x, y = self.positions[j]
        return DeviceGeometry.at(self.area, float(x), float(y))

    def distances_to(self, points) -> np.ndarray:
        """Distances from each point (rows) to each device (columns)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        diff = p[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def to_dict(self) -> dict:
        return {
            "L": float(self.area.L),
            "H": float(self.area.H),
            "devices": [{"x": float(x), "y": float(y)} for x, y in self.positions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Deployment":
        area = Area(float(data["L"]), float(data["H"]))
        pos = [(float(d["x"]), float(d["y"])) for d in data["devices"]]
        return cls(area, pos)


@dataclass(frozen=True)
class SensingModel:
    """Sensitivity decay ``eta`` (1/m) and per-TTI event probability ``alpha``."""

    eta: float = 1.0
    alpha: float = 0.1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")

    @property
    def z_max(self) -> float:
        """Largest squared distance on which the exponential CDF is fitted."""
        return VALID_Z_SCALE / self.eta**2


@dataclass(frozen=True)
class DeviceGeometry:
    """Squared far-side distances ``u``, ``v`` and inner radius ``R``."""

    u: float
    v: float
    R: float

    @classmethod
    def at(cls, area: Area, x: float, y: float) -> "DeviceGeometry":
        u = max(x, area.L - x) ** 2
        v = max(y, area.H - y) ** 2
        R = min(x, y, area.L - x, area.H - y)
        return cls(u, v, R)


@dataclass(frozen=True)
class CalibratedCdf:
    """Per-device scale ``w`` of ``F_Z(z) ~ 1 - exp(-2 z / w)``.

    ``z_max`` is the upper end of the fitted range and ``fit_error`` the
    largest absolute gap to the empirical CDF seen on it.
    """

    w: float
    z_max: float
    fit_error: float = 0.0

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"w must be positive, got {self.w}")


def sensing_power(model: SensingModel, d):
    """Sensed event power ``exp(-eta * d)`` at distance ``d``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    out = np.exp(-model.eta * d)
    return float(out) if out.ndim == 0 else out


def coverage_radius(model: SensingModel, delta):
    """Radius inside which the sensed power clears ``delta``."""
    delta = _check_delta(delta)
    out = -np.log(delta) / model.eta
    return float(out) if out.ndim == 0 else out


def threshold_for_radius(model: SensingModel, radius):
    out = np.exp(-model.eta * np.asarray(radius, dtype=float))
    return float(out) if out.ndim == 0 else out


def threshold_floor(area: Area, model: SensingModel) -> float:
    """Threshold whose coverage disk spans the area from any device."""
    return math.exp(-model.eta * area.diagonal)


def _quadrant_area(a, b, r):
    """Area of ``{0<=x<=a, 0<=y<=b, x^2+y^2<=r^2}`` (broadcasts)."""
    a, b, r = np.broadcast_arrays(*(np.asarray(t, dtype=float) for t in (a, b, r)))
    r = np.maximum(r, 0.0)

    def primitive(x):
        # integral of sqrt(r^2 - t^2) dt from 0 to x, for 0 <= x <= r
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(r > 0, np.clip(x / np.where(r > 0, r, 1.0), -1.0, 1.0), 0.0)
        return 0.5 * (x * np.sqrt(np.maximum(r * r - x * x, 0.0)) + r * r * np.arcsin(ratio))

    xa = np.minimum(a, r)
    x0 = np.sqrt(np.maximum(r * r - b * b, 0.0))  # circle height drops below b here
    x0 = np.minimum(x0, xa)
    return b * x0 + primitive(xa) - primitive(x0)


def disk_coverage_fraction(area: Area, x: float, y: float, radius):
    """Fraction of the area within ``radius`` of ``(x, y)`` (exact)."""
    r = np.asarray(radius, dtype=float)
    left, right = x, area.L - x
    down, up = y, area.H - y
    total = (
        _quadrant_area(right, up, r) + _quadrant_area(left, up, r)
        + _quadrant_area(left, down, r) + _quadrant_area(right, down, r)
    )
    out = np.clip(total / area.measure, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _check_z(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be non-negative")
    return z


def exact_cdf_z(geom: DeviceGeometry, area: Area, z):
    """CDF of the squared event distance, computed geometrically.

    ``P(Z <= z)`` is the area of the disk of radius ``sqrt(z)`` clipped to the
    rectangle, over the rectangle's area.  ``u`` and ``v`` locate the device up
    to reflection, which leaves the clipped area unchanged.
    """
    z = _check_z(z)
    far_x, far_y = math.sqrt(geom.u), math.sqrt(geom.v)
    return disk_coverage_fraction(area, far_x, far_y, np.sqrt(z))


def arcsin_cdf_z(geom: DeviceGeometry, area: Area, z):
    """Closed-form arcsine expression built from ``u`` alone, clamped to [0, 1].

    Kept as a reference; it ignores ``v`` and is only meaningful where the
    disk does not reach the edges.  Use :func:`exact_cdf_z` for the true CDF.
    """
    z = _check_z(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(z > 0, np.sqrt(geom.u / np.where(z > 0, z, 1.0)), 0.0)
    theta = np.arcsin(np.clip(s, 0.0, 1.0))
    out = 2.0 * z / area.measure * (theta + 0.5 * np.sin(2.0 * theta))
    out = np.clip(np.where(z > 0, out, 0.0), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def approx_cdf_z(cal: CalibratedCdf, z):
    """Exponential CDF approximation ``1 - exp(-2 z / w)``."""
    z = _check_z(z)
    out = -np.expm1(-2.0 * z / cal.w)
    return float(out) if out.ndim == 0 else out


def _check_delta(delta) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    if np.any(~(delta > 0)) or np.any(delta > 1):
        raise ValueError("thresholds must lie in (0, 1]")
    return delta


def activation_probability(cal: CalibratedCdf, model: SensingModel, delta):
    """Per-TTI transmission probability ``alpha * F_Z(ln(delta)^2 / eta^2)``."""
    delta = _check_delta(delta)
    z = np.log(delta) ** 2 / model.eta**2
    out = model.alpha * -np.expm1(-2.0 * z / cal.w)
    return float(out) if out.ndim == 0 else out


def _fit_w(z_grid: np.ndarray, ecdf: np.ndarray) -> float:
    """Least-squares fit of ``w`` in ``1 - exp(-2 z / w)`` to an empirical CDF."""
    mid = len(z_grid) // 2
    f_mid = min(max(ecdf[mid], 1e-6), 1 - 1e-9)
    c0 = -math.log1p(-f_mid) / z_grid[mid]

    def residual(p):
        return -np.expm1(-math.exp(p[0]) * z_grid) - ecdf

    sol = least_squares(residual, x0=[math.log(c0)], method="lm", xtol=1e-14, ftol=1e-14)
    return 2.0 / math.exp(sol.x[0])


def calibrate_w(
    dep: Deployment,
    model: SensingModel,
    samples: int = 100_000,
    seed: int = 0,
    grid_points: int = 256,
) -> list[CalibratedCdf]:
    """Fit ``w`` per device against a Monte Carlo CDF of the squared distance.

    Event positions are sampled uniformly on the area (shared by all devices);
    for each device the empirical CDF of ``Z`` is evaluated on ``grid_points``
    equally spaced values in ``(0, z_max]`` and ``w`` is fitted by least
    squares.
    """
    if samples < 10_000:
        raise ValueError(f"calibration needs at least 1e4 samples, got {samples}")
    area = dep.area
    rng = make_rng(seed)
    ev = rng.random((samples, 2)) * np.array([area.L, area.H])
    z_max = model.z_max
    z_grid = np.linspace(z_max / grid_points, z_max, grid_points)
    out = []
    for x, y in dep.positions:
        z = np.sort((ev[:, 0] - x) ** 2 + (ev[:, 1] - y) ** 2)
        ecdf = np.searchsorted(z, z_grid, side="right") / samples
        w = _fit_w(z_grid, ecdf)
        err = float(np.max(np.abs(-np.expm1(-2.0 * z_grid / w) - ecdf)))
        out.append(CalibratedCdf(w=w, z_max=z_max, fit_error=err))
    return out


def generate_deployment(area: Area, n: int, seed: int) -> Deployment:
    """``n`` devices placed i.i.d. uniformly on ``area``."""
    if n < 1:
        raise ValueError(f"need at least one device, got n={n}")
    rng = make_rng(seed)
    pos = rng.random((n, 2)) * np.array([area.L, area.H])
    return Deployment(area, pos)


def save_deployment(dep: Deployment, path) -> None:
    Path(path).write_text(json.dumps(dep.to_dict(), indent=2))


def load_deployment(path) -> Deployment:
    return Deployment.from_dict(json.loads(Path(path).read_text()))


def w_vector(cals: Sequence[CalibratedCdf] | np.ndarray) -> np.ndarray:
    """Per-device ``w`` as a float array (accepts calibrations or raw values)."""
    if isinstance(cals, np.ndarray):
        return cals.astype(float)
    return np.array([c.w if isinstance(c, CalibratedCdf) else float(c) for c in cals], dtype=float)
