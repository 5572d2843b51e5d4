"""Scale-ladder versions of the approximate-equality relations.

Every relation is decided the same way: a residual is computed at each level
of the ladder, a convergence order is fitted as the log-log slope of residual
against scale, and the claim passes when the finest residual is below a
tolerance *and* the fitted order is positive enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .battery import TestBattery
from .calculus import (
    DEFAULT_QUAD,
    MultiIndex,
    QuadratureSpec,
    common_ladder,
    derivative,
    fd_weights,
    pair_many,
    zero_family,
)
from .errors import BatteryClassMismatch, DivergentFamily, SmoothnessExceeded
from .scalefield import SmoothFamily, _as_points

# residuals below this are indistinguishable from rounding noise
NOISE_FLOOR = 1e-12
DEFAULT_TOLERANCE = 1e-3
DEFAULT_MIN_ORDER = 0.5
DIVERGENCE_SLOPE = 0.1

_CLAIM_CLASS = {"order0": "C0", "c1": "C1", "general": "Cinf"}


def fit_order(rhos: Sequence[float], residuals: Sequence[float], floor: float = NOISE_FLOOR) -> float:
    """Least-squares slope of ``log(residual)`` against ``log(rho)``.

    Residuals are clamped to ``floor`` first; when every residual is at the
    floor the family is exact to rounding and the order is ``inf``.
    """
    r = np.maximum(np.abs(np.asarray(residuals, float)), floor)
    rho = np.asarray(rhos, float)
    if np.all(r <= floor):
        return math.inf
    if not np.all(np.isfinite(r)):
        return -math.inf
    slope, _ = np.polyfit(np.log(rho), np.log(r), 1)
    return float(slope)


@dataclass(frozen=True)
class ApproxVerdict:
    """Per-level residuals of one approximate-equality claim and its verdict."""

    residuals: np.ndarray
    rhos: np.ndarray
    fitted_order: float
    passed: bool
    tolerance_at_finest: float
    min_order: float
    witness: str
    quadrature_errors: np.ndarray | None = None
    claim: str = ""
    details: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_residuals(
        cls,
        residuals,
        rhos,
        *,
        tolerance: float = DEFAULT_TOLERANCE,
        min_order: float = DEFAULT_MIN_ORDER,
        witness: str = "",
        quadrature_errors=None,
        claim: str = "",
        details: dict | None = None,
    ) -> "ApproxVerdict":
        res = np.asarray(residuals, float)
        rhos = np.asarray(rhos, float)
        order = fit_order(rhos, res)
        passed = bool(res[-1] <= tolerance and order >= min_order)
        qe = None if quadrature_errors is None else np.asarray(quadrature_errors, float)
        return cls(res, rhos, order, passed, tolerance, min_order, witness, qe, claim, details or {})

    @property
    def finest(self) -> float:
        return float(self.residuals[-1])

    def to_record(self) -> dict:
        rec = {
            "claim": self.claim,
            "passed": self.passed,
            "fitted_order": self.fitted_order,
            "tolerance_at_finest": self.tolerance_at_finest,
            "min_order": self.min_order,
            "witness": self.witness,
            "rhos": self.rhos.tolist(),
            "residuals": self.residuals.tolist(),
        }
        if self.quadrature_errors is not None:
            rec["quadrature_error_estimates"] = self.quadrature_errors.tolist()
        return rec


def _rhos(ladder, n: int) -> np.ndarray:
    if ladder is None:
        raise ValueError("an approximate-equality verdict needs at least one ladder-indexed family")
    return ladder.rhos[:n]


def multi_indices(d: int, order: int) -> list[MultiIndex]:
    return [MultiIndex(a) for a in product(range(order + 1), repeat=d) if sum(a) <= order]


def ball_grid(d: int, radius: float, n: int | None = None) -> np.ndarray:
    """Tensor sampling grid of the closed ball (odd counts, so the origin is included)."""
    if n is None:
        n = {1: 401, 2: 61, 3: 21}.get(d, 11)
    n += 1 - n % 2
    ax = np.linspace(-radius, radius, n)
    pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return pts[np.sum(pts * pts, axis=1) <= radius * radius * (1 + 1e-12)]


# --------------------------------------------------------------------------
# C^k and D' closeness


def approx_ck(
    f: SmoothFamily,
    g: SmoothFamily | None,
    k: int,
    radius: float,
    *,
    grid=None,
    tolerance: float = DEFAULT_TOLERANCE,
    min_order: float = DEFAULT_MIN_ORDER,
) -> ApproxVerdict:
    """``f ~ g`` in C^k: all derivatives up to order ``k`` close on a ball."""
    d = f.dimension
    g = zero_family(d) if g is None else g
    for fam in (f, g):
        if k > fam.declared_smoothness:
            raise SmoothnessExceeded(f"{fam.label or 'family'} is only C^{fam.declared_smoothness}")
    pts = ball_grid(d, radius) if grid is None else _as_points(grid, d)
    if pts.shape[0] == 0:
        raise ValueError("empty sampling grid")
    ladder, n = common_ladder(f, g)
    rhos = _rhos(ladder, n)
    res = np.zeros(n)
    worst = [""] * n
    for alpha in multi_indices(d, k):
        fa, ga = derivative(f, alpha), derivative(g, alpha)
        for lev in range(n):
            diff = np.abs(fa(lev, pts) - ga(lev, pts))
            i = int(np.argmax(diff))
            if diff[i] > res[lev] or not worst[lev]:
                res[lev] = max(res[lev], float(diff[i]))
                worst[lev] = f"alpha={alpha.entries} x={pts[i].tolist()}"
    return ApproxVerdict.from_residuals(
        res, rhos, tolerance=tolerance, min_order=min_order, witness=worst[-1],
        claim=f"{f.label} ~C^{k} {g.label}",
    )


def approx_dprime(
    f: SmoothFamily,
    g: SmoothFamily | None,
    battery: TestBattery,
    quad: QuadratureSpec = DEFAULT_QUAD,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    min_order: float = DEFAULT_MIN_ORDER,
) -> ApproxVerdict:
    """``f ~ g`` in D': every battery pairing close."""
    g = zero_family(f.dimension) if g is None else g
    tf = pair_many(f, battery.families, quad)
    tg = pair_many(g, battery.families, quad)
    ladder, n = common_ladder(f, g)
    diff = np.abs(tf.values - tg.values)
    res = diff.max(axis=0)
    j = int(np.argmax(diff[:, -1]))
    return ApproxVerdict.from_residuals(
        res, _rhos(ladder, n), tolerance=tolerance, min_order=min_order,
        witness=battery.labels[j],
        quadrature_errors=(tf.errors + tg.errors + tf.tails + tg.tails).max(axis=0),
        claim=f"{f.label} ~D' {g.label}",
        details={"per_member": dict(zip(battery.labels, diff.tolist()))},
    )


def verify_delta(
    delta: SmoothFamily,
    battery: TestBattery,
    quad: QuadratureSpec = DEFAULT_QUAD,
    *,
    claim: str | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    min_order: float = DEFAULT_MIN_ORDER,
) -> ApproxVerdict:
    """Residual ``max_phi |int delta phi - phi(0)|`` across the battery.

    ``claim`` is one of ``order0``, ``c1`` or ``general`` and must match the
    battery class (C0, C1, Cinf); when omitted it is inferred from the battery.
    """
    if claim is not None:
        if claim not in _CLAIM_CLASS:
            raise ValueError(f"unknown delta claim {claim!r}")
        if _CLAIM_CLASS[claim] != battery.regularity:
            raise BatteryClassMismatch(
                f"a {claim} delta claim is tested against the {_CLAIM_CLASS[claim]} battery, not {battery.regularity}"
            )
    if "c1-delta-candidate" in delta.tags and battery.regularity == "C0":
        raise BatteryClassMismatch(
            f"{delta.label} is only a candidate against C1 test functions; the C0 battery contains kinks"
        )
    if delta.dimension != battery.dimension:
        raise BatteryClassMismatch(f"{delta.dimension}-dimensional delta vs {battery.dimension}-dimensional battery")
    t = pair_many(delta, battery.families, quad)
    diff = np.abs(t.values - battery.values_at_origin[:, None])
    res = diff.max(axis=0)
    j = int(np.argmax(diff[:, -1]))
    ladder, n = common_ladder(delta)
    return ApproxVerdict.from_residuals(
        res, _rhos(ladder, n), tolerance=tolerance, min_order=min_order,
        witness=battery.labels[j],
        quadrature_errors=(t.errors + t.tails).max(axis=0),
        claim=f"{delta.label} is a delta ({battery.regularity} battery)",
        details={"per_member": dict(zip(battery.labels, diff.tolist())), "pairings": t.values.tolist()},
    )


@dataclass(frozen=True)
class MembershipVerdict:
    passed: bool
    slopes: dict
    worst_member: str
    worst_slope: float
    pairings: np.ndarray
    rhos: np.ndarray
    max_slope: float = DIVERGENCE_SLOPE

    def to_record(self) -> dict:
        return {
            "passed": self.passed,
            "worst_member": self.worst_member,
            "worst_slope": self.worst_slope,
            "max_slope": self.max_slope,
            "slopes": self.slopes,
        }


def _growth_slope(rhos, values) -> float:
    """Slope of log|value| against log(1/rho); positive means growth."""
    return -fit_order(rhos, values)


def dprime_membership(
    f: SmoothFamily,
    battery: TestBattery,
    quad: QuadratureSpec = DEFAULT_QUAD,
    *,
    alpha=None,
    max_slope: float = DIVERGENCE_SLOPE,
) -> MembershipVerdict:
    """Bounded pairings across levels (no divergence trend).

    With ``alpha`` the pairings of ``d^alpha f`` are tested through
    ``(-1)^|alpha| int f d^alpha phi``, so ``f`` itself is never differentiated.
    """
    fams = battery.families
    sign = 1.0
    if alpha is not None:
        alpha = MultiIndex.coerce(alpha, f.dimension)
        fams = [derivative(p, alpha) for p in fams]
        sign = (-1.0) ** alpha.order
    t = pair_many(f, fams, quad)
    ladder, n = common_ladder(f)
    rhos = _rhos(ladder, n)
    vals = sign * t.values
    slopes = {lab: _growth_slope(rhos, v) for lab, v in zip(battery.labels, vals)}
    worst = max(slopes, key=lambda s: slopes[s])
    return MembershipVerdict(
        bool(slopes[worst] <= max_slope), slopes, worst, slopes[worst], vals, rhos, max_slope
    )


# --------------------------------------------------------------------------
# standard part and S-continuity


@dataclass(frozen=True)
class StandardFunctionSample:
    grid: np.ndarray
    values: np.ndarray
    cauchy_gap: float
    derivative_samples: dict = field(default_factory=dict)
    derivative_gaps: dict = field(default_factory=dict)
    interchange: dict = field(default_factory=dict)

    @property
    def interchange_ok(self) -> bool:
        return all(v["discrepancy"] <= v["tolerance"] for v in self.interchange.values())

    def to_record(self) -> dict:
        return {
            "cauchy_gap": self.cauchy_gap,
            "interchange": {str(k): v for k, v in self.interchange.items()},
            "n_points": int(self.grid.shape[0]),
        }


def finiteness_probe(f: SmoothFamily, pts: np.ndarray, order: int, max_slope: float = DIVERGENCE_SLOPE) -> dict:
    """Growth slope of ``max |d^alpha f_l|`` on the grid for every ``|alpha| <= order``."""
    ladder, n = common_ladder(f)
    if ladder is None:
        return {}
    rhos = _rhos(ladder, n)
    slopes = {}
    for alpha in multi_indices(f.dimension, order):
        fa = derivative(f, alpha)
        peaks = [float(np.max(np.abs(fa(lev, pts)))) for lev in range(n)]
        slope = _growth_slope(rhos, peaks)
        slopes[alpha.entries] = slope
        if slope > max_slope:
            i = int(np.argmax(np.abs(fa(n - 1, pts))))
            raise DivergentFamily(
                f"d^{alpha.entries} of {f.label or 'family'} grows like rho^-{slope:.2f} "
                f"(peak {peaks[-1]:.3g} at x={pts[i].tolist()})"
            )
    return slopes


def _tensor_axes(grid, d: int):
    if d == 1:
        ax = np.asarray(grid, float).ravel()
        return [ax], ax[:, None]
    axes = [np.asarray(a, float) for a in grid]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return axes, pts


def _fd_along(values: np.ndarray, axis: int, h: float):
    """Fourth-order first derivative with steps h and 2h on the common interior nodes."""
    offs, w = fd_weights(1)
    p = 2 * int(offs.max())
    n = values.shape[axis]
    sl = lambda a, b: tuple(slice(a, b) if i == axis else slice(None) for i in range(values.ndim))

    def stencil(m):
        return sum(wi * values[sl(p + m * int(o), n - p + m * int(o))] for o, wi in zip(offs, w)) / (m * h)

    return stencil(1), stencil(2), sl(p, n - p)


def standard_part(f: SmoothFamily, grid, k: int = 0) -> StandardFunctionSample:
    """Finest-level values of a finite family plus derivative samples and Cauchy gaps.

    ``grid`` is a 1-D array of equispaced points (d = 1) or a tuple of
    equispaced axes (tensor grid).  For ``k >= 1`` the finite-difference
    derivative of the value grid is compared with the samples of ``d_j f``.
    """
    d = f.dimension
    axes, pts = _tensor_axes(grid, d)
    if pts.shape[0] == 0:
        raise ValueError("empty grid")
    ladder, n = common_ladder(f)
    finiteness_probe(f, pts, k)
    last = n - 1
    values = f(last, pts)
    gap = 0.0 if n < 2 else float(np.max(np.abs(values - f(last - 1, pts))))
    dsamples, dgaps = {}, {}
    for alpha in multi_indices(d, k):
        if alpha.order == 0:
            continue
        fa = derivative(f, alpha)
        v = fa(last, pts)
        dsamples[alpha.entries] = v
        dgaps[alpha.entries] = 0.0 if n < 2 else float(np.max(np.abs(v - fa(last - 1, pts))))
    interchange = {}
    if k >= 1:
        shape = tuple(a.size for a in axes)
        vgrid = values.reshape(shape)
        for j in range(d):
            e = MultiIndex.unit(d, j).entries
            h = float(axes[j][1] - axes[j][0])
            d4, d4_coarse, inner = _fd_along(vgrid, j, h)
            target = dsamples[e].reshape(shape)[inner]
            # the 2h stencil is 16x less accurate, so this bounds the h-stencil error
            fd_err = float(np.max(np.abs(d4 - d4_coarse))) if d4.size else 0.0
            # rounding in the stencil is about eps * |u| / h
            fd_err = max(fd_err, 16.0 * np.finfo(float).eps * float(np.max(np.abs(vgrid), initial=0.0)) / h)
            disc = float(np.max(np.abs(d4 - target))) if d4.size else 0.0
            interchange[e] = {
                "discrepancy": disc,
                "fd_error_estimate": fd_err,
                "cauchy_gap": max(gap, dgaps[e]),
                "tolerance": max(gap, dgaps[e], fd_err),
            }
    return StandardFunctionSample(pts, values, gap, dsamples, dgaps, interchange)


@dataclass(frozen=True)
class SModulusTable:
    radii: np.ndarray
    rhos: np.ndarray
    modulus: np.ndarray  # (levels, radii)
    fitted_order: float
    s_continuous: bool
    min_order: float = DEFAULT_MIN_ORDER

    def to_record(self) -> dict:
        return {
            "radii": self.radii.tolist(),
            "modulus": self.modulus.tolist(),
            "fitted_order": self.fitted_order,
            "s_continuous": self.s_continuous,
        }


def _probe_offsets(d: int) -> np.ndarray:
    dirs = [np.eye(d)[i] * s for i in range(d) for s in (1.0, -1.0)]
    if d > 1:
        for signs in product((1.0, -1.0), repeat=d):
            dirs.append(np.array(signs) / math.sqrt(d))
    dirs = np.array(dirs)
    return np.concatenate([dirs, 0.5 * dirs])


def s_modulus(f: SmoothFamily, points, radii: Sequence[float], *, min_order: float = DEFAULT_MIN_ORDER) -> SModulusTable:
    """Sampled modulus of continuity per level; S-continuous when it vanishes with ``r`` at the finest level."""
    d = f.dimension
    pts = _as_points(points, d)
    radii = np.asarray(radii, float)
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be strictly decreasing")
    ladder, n = common_ladder(f)
    offs = _probe_offsets(d)
    mod = np.zeros((n, radii.size))
    for lev in range(n):
        base = f(lev, pts)
        for j, r in enumerate(radii):
            probes = (pts[:, None, :] + r * offs[None, :, :]).reshape(-1, d)
            vals = f(lev, probes).reshape(pts.shape[0], -1)
            mod[lev, j] = float(np.max(np.abs(vals - base[:, None])))
    order = fit_order(radii, mod[-1])
    rhos = ladder.rhos if ladder is not None else np.array([math.nan])
    return SModulusTable(radii, rhos, mod, order, bool(order >= min_order), min_order)
