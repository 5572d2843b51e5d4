"""Composite quadrature on graded meshes.

Meshes are fine (cell width ``1/cells_per_unit``) inside the zones where a
family has scale-``rho`` structure and grow geometrically away from them, so
discretisation error stays well below the residuals being measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

RULES = ("midpoint", "trapezoid", "gauss-legendre-composite")


@dataclass(frozen=True)
class QuadratureSpec:
    """How integrals over R^d are discretised.

    ``cells_per_unit(k)`` gives the fine cell density at level ``k``; when
    omitted it defaults to ``ceil(8 / rho_k)`` of the ladder in use.
    ``truncation_radius(k)`` bounds integrals where neither factor has finite
    support; it defaults to ``rho_k ** -0.5``.  ``angular_order`` is the
    number of directions per great circle for polar grids (d >= 2).
    """

    rule: str = "gauss-legendre-composite"
    order: int = 10
    cells_per_unit: Callable[[int], int] | None = None
    truncation_radius: Callable[[int], float] | None = None
    angular_order: int | None = None
    grading: float = 1.5
    coarse_cell: float = 0.125
    estimate_error: bool = True

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}; expected one of {RULES}")
        if self.order < 1 or (self.angular_order is not None and self.angular_order < 4) or not self.grading > 1:
            raise ValueError("invalid quadrature parameters")

    def angular(self, d: int) -> int:
        """Directions per great circle: 64 on the circle, 32 on the 2-sphere unless set."""
        if self.angular_order is not None:
            return self.angular_order
        return 64 if d == 2 else 32

    def fine_width(self, k: int, ladder) -> float:
        if self.cells_per_unit is not None:
            return 1.0 / self.cells_per_unit(k)
        if ladder is None:
            return 1.0 / 64
        return 1.0 / math.ceil(8.0 / ladder[k])

    def truncation(self, k: int, ladder) -> float:
        if self.truncation_radius is not None:
            return self.truncation_radius(k)
        if ladder is None:
            raise ValueError("no truncation radius for a level-free integrand")
        return ladder[k] ** -0.5


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=None)
def reference_rule(rule: str, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    if rule == "midpoint":
        return np.array([0.5]), np.array([1.0])
    if rule == "trapezoid":
        return np.array([0.0, 1.0]), np.array([0.5, 0.5])
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def composite(breaks: np.ndarray, rule: str = "gauss-legendre-composite", order: int = 5):
    """Nodes and weights of the composite rule over consecutive breakpoints."""
    t, w = reference_rule(rule, order)
    a = np.asarray(breaks[:-1], float)
    h = np.diff(np.asarray(breaks, float))
    nodes = a[:, None] + h[:, None] * t[None, :]
    weights = h[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def axis_mesh(
    lo: float,
    hi: float,
    *,
    fine: float,
    coarse: float,
    zones: Iterable[tuple[float, float]] = (),
    grading: float = 1.5,
    breaks: Iterable[float] = (),
    singular: Iterable[float] = (),
    edge_levels: int = 4,
) -> np.ndarray:
    """Breakpoints on [lo, hi].

    Cells are ``fine`` wide inside each zone ``(center, halfwidth)`` and grow
    by ``grading`` per cell away from the zones, up to ``coarse``.  The
    endpoints and ``breaks`` (support edges, kinks) get ``edge_levels`` halving
    steps, which bump profiles need because their derivatives concentrate near
    the edge of the support; points in ``singular`` get many more.
    """
    if not hi > lo:
        return np.array([lo, hi]) if hi == lo else np.array([])
    coarse = max(coarse, fine)
    zones = [(c - w, c + w) for c, w in zones]
    mandatory = {lo, hi}
    for z0, z1 in zones:
        mandatory.update(p for p in (z0, z1) if lo < p < hi)
    mandatory.update(p for p in breaks if lo < p < hi)
    sing = [p for p in singular if lo <= p <= hi]
    mandatory.update(sing)
    stops = np.array(sorted(mandatory))

    def width(x: float) -> float:
        if not zones:
            return coarse
        dist = min(max(z0 - x, x - z1, 0.0) for z0, z1 in zones)
        return min(coarse, fine + (grading - 1.0) * dist)

    points = [lo]
    x = lo
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    while x < hi - tol:
        nxt = stops[stops > x + tol][0]
        step = width(x)
        # look ahead so cells also shrink when approaching a zone
        step = min(step, width(min(x + step, nxt)) * grading)
        x = nxt if x + step >= nxt - 0.25 * step else x + step
        points.append(x)
    pts = np.array(points)
    graded = [(p, edge_levels) for p in stops if p not in sing and not _is_zone_edge(p, zones)]
    graded += [(p, 44) for p in sing]
    extra = []
    for p, levels in graded:
        i = np.searchsorted(pts, p)
        left = p - pts[i - 1] if i > 0 else 0.0
        right = pts[i + 1] - p if i + 1 < pts.size else 0.0
        for j in range(1, levels + 1):
            if left:
                extra.append(p - left * 2.0**-j)
            if right:
                extra.append(p + right * 2.0**-j)
    if extra:
        pts = np.union1d(pts, np.array(extra))
    return pts


def _is_zone_edge(p: float, zones) -> bool:
    return any(p == z0 or p == z1 for z0, z1 in zones)


def coarsen(breaks: np.ndarray, keep: Iterable[float] = ()) -> np.ndarray:
    """Every other breakpoint, retaining endpoints and protected points."""
    keep = np.asarray(list(keep), float)
    sub = breaks[::2]
    if sub[-1] != breaks[-1]:
        sub = np.append(sub, breaks[-1])
    if keep.size:
        inside = keep[(keep > breaks[0]) & (keep < breaks[-1])]
        sub = np.union1d(sub, inside)
    return sub


def sphere_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions on the unit sphere S^{d-1} with weights summing to its area."""
    if d == 2:
        theta = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(theta), np.sin(theta)], axis=1), np.full(n, 2.0 * np.pi / n)
    if d == 3:
        m = max(2, n // 2)
        u, wu = np.polynomial.legendre.leggauss(m)
        phi = 2.0 * np.pi * np.arange(n) / n
        s = np.sqrt(1.0 - u**2)
        dirs = np.stack(
            [
                np.outer(s, np.cos(phi)).ravel(),
                np.outer(s, np.sin(phi)).ravel(),
                np.repeat(u, n),
            ],
            axis=1,
        )
        return dirs, np.repeat(wu, n) * (2.0 * np.pi / n)
    raise ValueError(f"no sphere rule for d={d}")


@dataclass(frozen=True)
class PolarGrid:
    """Tensor grid ``center + r * direction`` with the ``r^{d-1}`` Jacobian folded in."""

    center: np.ndarray
    radii: np.ndarray
    rweights: np.ndarray
    dirs: np.ndarray
    aweights: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.center + (self.radii[:, None, None] * self.dirs[None, :, :]).reshape(-1, self.dirs.shape[1])

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.rweights, self.aweights).ravel()


def polar_grid(
    center: Sequence[float],
    radial_breaks: np.ndarray,
    *,
    rule: str,
    order: int,
    angular: int,
) -> PolarGrid:
    center = np.asarray(center, float)
    d = center.size
    r, wr = composite(radial_breaks, rule, order)
    dirs, wa = sphere_rule(d, angular)
    return PolarGrid(center, r, wr * r ** (d - 1), dirs, wa)


def chunks(n: int, per_item: int, budget: int = 2_000_000):
    """Slices splitting ``n`` items so that ``items * per_item <= budget``."""
    size = max(1, budget // max(1, per_item))
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))
