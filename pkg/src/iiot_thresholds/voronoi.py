"""Voronoi cells clipped to the deployment rectangle.

Each cell is built by clipping the rectangle with the perpendicular-bisector
half-planes of the other sites, nearest first; a site farther than twice the
current cell's circumradius cannot cut the cell, so the loop stops there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Deployment

__all__ = ["VoronoiCell", "voronoi_partition", "polygon_area", "BOUNDARY_SAMPLES"]

BOUNDARY_SAMPLES = 256


@dataclass(frozen=True)
class VoronoiCell:
    device: int
    site: tuple[float, float]
    polygon: np.ndarray  # (k, 2) counter-clockwise, not repeated at the end
    omega_min: float
    omega_mean: float
    omega_max: float

    @property
    def area(self) -> float:
        return polygon_area(self.polygon)


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clip(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon with ``normal . p <= offset``."""
    s = poly @ normal - offset
    inside = s <= 0
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    out = []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        sp, sq = s[i], s[(i + 1) % k]
        if sp <= 0:
            out.append(p)
        if (sp < 0 < sq) or (sq < 0 < sp):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return np.array(out) if out else poly[:0]


def _point_segment_distance(p, a, b) -> np.ndarray:
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.where(denom > 0, np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.hypot(*(closest - p).T)


def _boundary_samples(poly: np.ndarray, count: int) -> np.ndarray:
    """``count`` points spaced uniformly by arc length along the boundary."""
    nxt = np.roll(poly, -1, axis=0)
    seg = np.hypot(*(nxt - poly).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.arange(count) * (cum[-1] / count)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(poly) - 1)
    frac = np.where(seg[idx] > 0, (s - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0), 0.0)
    return poly[idx] + frac[:, None] * (nxt[idx] - poly[idx])


def _dedupe(positions: np.ndarray, scale: float) -> np.ndarray:
    """Nudge coincident sites apart by ``1e-9 * min(L, H)``."""
    pos = positions.copy()
    eps = 1e-9 * scale
    seen: dict[tuple[float, float], int] = {}
    for i, (x, y) in enumerate(pos):
        key = (float(x), float(y))
        k = seen.get(key, 0)
        if k:
            angle = 2.0 * np.pi * k / 7.0
            pos[i] += eps * k * np.array([np.cos(angle), np.sin(angle)])
        seen[key] = k + 1
    return pos


def voronoi_partition(dep: Deployment, boundary_samples: int = BOUNDARY_SAMPLES) -> list[VoronoiCell]:
    """Voronoi cells of the deployment, clipped to its rectangle.

    ``omega_min`` and ``omega_max`` are the smallest and largest site-to-
    boundary distances; ``omega_mean`` averages the distance over
    ``boundary_samples`` points spread uniformly by arc length.
    """
    area = dep.area
    pos = dep.positions
    n = len(pos)
    if n > 1 and np.all(pos == pos[0]):
        raise ValueError("all devices are coincident; the diagram is degenerate")
    if n > 1:
        # clamp keeps nudged sites inside the rectangle
        pos = _dedupe(pos, min(area.L, area.H))
        pos = np.clip(pos, 0.0, [area.L, area.H])
    rect = np.array([[0.0, 0.0], [area.L, 0.0], [area.L, area.H], [0.0, area.H]])
    cells = []
    for i in range(n):
        p = pos[i]
        d = np.hypot(*(pos - p).T)
        order = np.argsort(d, kind="stable")
        poly = rect
        reach = np.max(np.hypot(*(poly - p).T))
        for k in order:
            if k == i:
                continue
            if d[k] > 2.0 * reach:
                break
            q = pos[k]
            normal = q - p
            offset = 0.5 * (np.dot(q, q) - np.dot(p, p))
            poly = _clip(poly, normal, offset)
            if len(poly) == 0:
                raise ValueError(f"cell {i} vanished while clipping")
            reach = np.max(np.hypot(*(poly - p).T))
        nxt = np.roll(poly, -1, axis=0)
        pts = np.repeat(p[None, :], len(poly), axis=0)
        edge_d = _point_segment_distance(pts, poly, nxt)
        samples = _boundary_samples(poly, boundary_samples)
        cells.append(
            VoronoiCell(
                device=i,
                site=(float(dep.positions[i, 0]), float(dep.positions[i, 1])),
                polygon=poly,
                omega_min=float(edge_d.min()),
                omega_mean=float(np.mean(np.hypot(*(samples - p).T))),
                omega_max=float(reach),
            )
        )
    return cells
