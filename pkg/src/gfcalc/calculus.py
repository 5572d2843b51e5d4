"""Pairings, convolutions, derivatives and constant-coefficient operators.

Everything here acts level by level on :class:`~gfcalc.scalefield.SmoothFamily`
objects.  Integrals are composite Gauss-Legendre sums on meshes that are
refined where a family has scale-``rho`` structure, see
:mod:`gfcalc.quadrature`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import signal

from .errors import (
    DimensionMismatch,
    LadderError,
    NeitherCompact,
    ResolutionTooCoarse,
    SmoothnessExceeded,
    StepUnderflow,
    UnboundedIntegrand,
)
from .quadrature import (
    DEFAULT_QUAD,
    QuadratureSpec,
    axis_mesh,
    chunks,
    coarsen,
    composite,
    polar_grid,
    reference_rule,
)
from .scalefield import Feature, ScaleLadder, SmoothFamily, standard_family

# relative size of floating-point noise in a quadrature sum
NOISE = 1e-15


# --------------------------------------------------------------------------
# multi-indices and operators


@dataclass(frozen=True, order=True)
class MultiIndex:
    entries: tuple[int, ...]

    def __post_init__(self):
        entries = tuple(int(a) for a in self.entries)
        if any(a < 0 for a in entries) or not entries:
            raise ValueError(f"multi-index entries must be natural numbers, got {self.entries!r}")
        object.__setattr__(self, "entries", entries)

    @property
    def order(self) -> int:
        return sum(self.entries)

    @property
    def dimension(self) -> int:
        return len(self.entries)

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        return MultiIndex(tuple(a + b for a, b in zip(self.entries, other.entries)))

    def __iter__(self):
        return iter(self.entries)

    @classmethod
    def coerce(cls, alpha, dimension: int | None = None) -> "MultiIndex":
        if isinstance(alpha, MultiIndex):
            mi = alpha
        elif isinstance(alpha, (int, np.integer)):
            mi = cls((int(alpha),))
        else:
            mi = cls(tuple(alpha))
        if dimension is not None and mi.dimension != dimension:
            raise DimensionMismatch(f"multi-index {mi.entries} used in dimension {dimension}")
        return mi

    @classmethod
    def zero(cls, d: int) -> "MultiIndex":
        return cls((0,) * d)

    @classmethod
    def unit(cls, d: int, axis: int, n: int = 1) -> "MultiIndex":
        e = [0] * d
        e[axis] = n
        return cls(tuple(e))


class PDOperator:
    """``P(d) = sum_alpha c_alpha d^alpha`` with constant real coefficients."""

    __slots__ = ("dimension", "_terms")

    def __init__(self, dimension: int, terms: Mapping):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        clean: dict[MultiIndex, float] = {}
        for alpha, c in terms.items():
            mi = MultiIndex.coerce(alpha, dimension)
            c = float(c)
            if c != 0.0:
                clean[mi] = clean.get(mi, 0.0) + c
        clean = {a: c for a, c in clean.items() if c != 0.0}
        if not clean:
            raise ValueError("an operator needs at least one nonzero coefficient")
        self.dimension = dimension
        self._terms = tuple(sorted(clean.items()))

    @property
    def terms(self) -> dict[MultiIndex, float]:
        return dict(self._terms)

    def items(self):
        return iter(self._terms)

    @property
    def order(self) -> int:
        return max(a.order for a, _ in self._terms)

    def coefficient(self, alpha) -> float:
        return self.terms.get(MultiIndex.coerce(alpha, self.dimension), 0.0)

    def __eq__(self, other) -> bool:
        return isinstance(other, PDOperator) and self.dimension == other.dimension and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.dimension, self._terms))

    def __repr__(self) -> str:
        body = ", ".join(f"{a.entries}: {c:g}" for a, c in self._terms)
        return f"PDOperator({self.dimension}, {{{body}}})"

    def __add__(self, other: "PDOperator") -> "PDOperator":
        if other.dimension != self.dimension:
            raise DimensionMismatch("operators of different dimension")
        t = self.terms
        for a, c in other.items():
            t[a] = t.get(a, 0.0) + c
        return PDOperator(self.dimension, t)

    def __mul__(self, s: float) -> "PDOperator":
        return PDOperator(self.dimension, {a: s * c for a, c in self._terms})

    __rmul__ = __mul__

    @classmethod
    def identity(cls, d: int) -> "PDOperator":
        return cls(d, {MultiIndex.zero(d): 1.0})

    @classmethod
    def partial(cls, d: int, axis: int, n: int = 1) -> "PDOperator":
        return cls(d, {MultiIndex.unit(d, axis, n): 1.0})

    @classmethod
    def laplacian(cls, d: int) -> "PDOperator":
        return cls(d, {MultiIndex.unit(d, i, 2): 1.0 for i in range(d)})


def formal_adjoint(P: PDOperator) -> PDOperator:
    """``P(-d)``: flips the sign of odd-order terms."""
    return PDOperator(P.dimension, {a: (-1) ** a.order * c for a, c in P.items()})


def is_rotation_invariant(P: PDOperator) -> bool:
    """True for ``a + b * Laplacian`` (the only invariant operators of order <= 2)."""
    d = P.dimension
    t = P.terms
    second = [t.get(MultiIndex.unit(d, i, 2)) for i in range(d)]
    allowed = {MultiIndex.zero(d)} | {MultiIndex.unit(d, i, 2) for i in range(d)}
    if set(t) - allowed:
        return False
    if all(c is None for c in second):
        return True
    return all(c is not None for c in second) and len(set(second)) == 1


# --------------------------------------------------------------------------
# level bookkeeping and mesh planning


def common_ladder(*fams: SmoothFamily) -> tuple[ScaleLadder | None, int]:
    ladders = [f.ladder for f in fams if f.ladder is not None]
    if not ladders:
        return None, 1
    first = ladders[0]
    for other in ladders[1:]:
        if other is not first and tuple(other.levels) != tuple(first.levels):
            raise LadderError("families are built on different ladders")
    return first, len(first)


def _check_dims(*fams: SmoothFamily) -> int:
    dims = {f.dimension for f in fams}
    if len(dims) != 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


@dataclass
class _Plan:
    fine: float
    zone: float
    coarse: float


def _plan(fams: Iterable[SmoothFamily], k: int, quad: QuadratureSpec, ladder) -> _Plan:
    """Fine width, half-width of the refined zone about the origin, coarse width."""
    h = quad.fine_width(k, ladder)
    if ladder is not None and quad.cells_per_unit is not None:
        need = math.ceil(8.0 / ladder[k])
        if quad.cells_per_unit(k) < need:
            raise ResolutionTooCoarse(
                f"cells_per_unit({k}) = {quad.cells_per_unit(k)} < ceil(8/rho_k) = {need}"
            )
    zone = 0.0
    coarse = quad.coarse_cell
    for f in fams:
        ft = f.feature_at(k)
        if ft is None:
            continue
        if ft.localized:
            if h > ft.scale / 8.0 * (1.0 + 1e-9):
                raise ResolutionTooCoarse(
                    f"cell width {h:.3g} does not resolve the scale {ft.scale:.3g} of {f.label or 'a family'}"
                )
            zone = max(zone, ft.extent * ft.scale)
        else:
            coarse = min(coarse, ft.scale / 8.0)
    return _Plan(h, zone, max(coarse, h))


def _as_family(phi, d: int) -> SmoothFamily:
    if isinstance(phi, SmoothFamily):
        return phi
    if callable(phi):
        return standard_family(phi, d, label=getattr(phi, "__name__", "function"))
    raise TypeError(f"cannot pair with {type(phi).__name__}")


def _eval_radial_aware(f: SmoothFamily, k: int, radii: np.ndarray, points: np.ndarray, n_dirs: int):
    if f.radial:
        probe = np.zeros((radii.size, f.dimension))
        probe[:, 0] = radii
        return np.repeat(f(k, probe), n_dirs)
    return f(k, points)


# --------------------------------------------------------------------------
# pairings


@dataclass(frozen=True)
class PairingTable:
    """``values[j, k]`` approximates the integral of ``f_k * phi_j``."""

    values: np.ndarray
    errors: np.ndarray
    tails: np.ndarray
    labels: tuple[str, ...]
    rhos: np.ndarray | None


@dataclass(frozen=True)
class Pairing:
    values: np.ndarray
    errors: np.ndarray
    tails: np.ndarray
    rhos: np.ndarray | None

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


def pair(f: SmoothFamily, phi, quad: QuadratureSpec = DEFAULT_QUAD) -> Pairing:
    """Per-level ``int f_k phi_k`` with quadrature-error estimates."""
    t = pair_many(f, [phi], quad)
    return Pairing(t.values[0], t.errors[0], t.tails[0], t.rhos)


def pair_many(f: SmoothFamily, phis: Sequence, quad: QuadratureSpec = DEFAULT_QUAD) -> PairingTable:
    """Pair one family against several, sharing every evaluation of ``f``."""
    phis = [_as_family(p, f.dimension) for p in phis]
    _check_dims(f, *phis)
    ladder, n_levels = common_ladder(f, *phis)
    m = len(phis)
    vals = np.zeros((m, n_levels))
    errs = np.zeros((m, n_levels))
    tails = np.zeros((m, n_levels))
    for k in range(n_levels):
        vals[:, k], errs[:, k], tails[:, k] = _pair_level(f, phis, k, quad, ladder)
    return PairingTable(vals, errs, tails, tuple(p.label for p in phis), None if ladder is None else ladder.rhos)


def _tail_bound(a: SmoothFamily, b: SmoothFamily, k: int, radius: float) -> float | None:
    """Bound on the integral of |a b| outside the ball, from a tail mass and a growth bound."""
    for x, y in ((a, b), (b, a)):
        if x.tail_mass is not None and y.growth is not None:
            c, p = y.growth
            return c * x.tail_mass(k, radius, p)
    return None


def _angular_order(full: int, radius: float, fams, k: int) -> int:
    """Angular nodes needed on spheres of the given radius.

    Radial factors are constant on spheres; the others vary on their feature
    scale, so a ball small against every such scale needs fewer directions.
    """
    scales = []
    for fam in fams:
        if fam.radial:
            continue
        ft = fam.feature_at(k)
        if ft is None:
            return full
        scales.append(ft.scale)
    if not scales:
        return max(4, full // 8)
    need = math.ceil(full * radius / min(scales))
    return int(min(full, max(8, need + need % 2)))


def _pair_level(f: SmoothFamily, phis: list[SmoothFamily], k: int, quad: QuadratureSpec, ladder):
    d = f.dimension
    m = len(phis)
    rf = f.support_radius(k)
    rj = np.array([p.support_radius(k) for p in phis])
    tails = np.zeros(m)
    if math.isfinite(rf):
        radius = rf if np.any(np.isinf(rj)) else min(rf, float(np.max(rj)))
    elif np.all(np.isfinite(rj)):
        radius = float(np.max(rj))
    else:
        try:
            radius = quad.truncation(k, ladder)
        except ValueError:
            raise UnboundedIntegrand(
                f"neither {f.label or 'f'} nor the test function has finite support and no truncation radius is given"
            ) from None
        for j, p in enumerate(phis):
            if rj[j] <= radius:
                continue
            t = _tail_bound(f, p, k, radius)
            if t is None:
                raise UnboundedIntegrand(
                    f"cannot bound the tail of {f.label or 'f'} x {p.label or 'phi'} beyond radius {radius:g}: "
                    "one factor needs a tail mass and the other a growth bound"
                )
            tails[j] = t
    plan = _plan([f, *phis], k, quad, ladder)
    singular = f.singular or any(p.singular for p in phis)
    bps = set(f.breakpoints)
    for p in phis:
        bps.update(p.breakpoints)
    supports = [r for r in [rf, *rj] if math.isfinite(r) and r < radius]
    zones = [(0.0, plan.zone)] if plan.zone > 0 else []

    if d == 1:
        breaks_extra = sorted(bps | {s for r in supports for s in (r, -r)})
        br = axis_mesh(
            -radius, radius, fine=plan.fine, coarse=plan.coarse, zones=zones, grading=quad.grading,
            breaks=breaks_extra, singular=[0.0] if singular else [],
        )

        def integrate_on(breaks, _angular=None):
            x, w = composite(breaks, quad.rule, quad.order)
            pts = x[:, None]
            fw = f(k, pts) * w
            phi = np.stack([p(k, pts) for p in phis])
            return phi @ fw, np.abs(phi) @ np.abs(fw)

        keep = breaks_extra + [z for c, hw in zones for z in (c - hw, c + hw)]
        val, mag = integrate_on(br)
        if quad.estimate_error:
            val2, _ = integrate_on(coarsen(br, keep))
            err = np.abs(val - val2) + NOISE * mag
        else:
            err = NOISE * mag
        return val, err, tails

    radial_breaks = sorted({abs(b) for b in bps} | set(supports))
    rb = axis_mesh(
        0.0, radius, fine=plan.fine, coarse=plan.coarse, zones=zones, grading=quad.grading,
        breaks=radial_breaks, singular=[0.0] if singular else [],
    )

    def integrate_polar(breaks, angular):
        grid = polar_grid(np.zeros(d), breaks, rule=quad.rule, order=quad.order, angular=angular)
        pts = grid.points
        nd = grid.dirs.shape[0]
        fw = _eval_radial_aware(f, k, grid.radii, pts, nd) * grid.weights
        phi = np.stack([_eval_radial_aware(p, k, grid.radii, pts, nd) for p in phis])
        return phi @ fw, np.abs(phi) @ np.abs(fw)

    angular = _angular_order(quad.angular(d), radius, [f, *phis], k)
    val, mag = integrate_polar(rb, angular)
    if quad.estimate_error:
        keep = radial_breaks + [plan.zone]
        val2, _ = integrate_polar(coarsen(rb, keep), max(4, angular // 2))
        err = np.abs(val - val2) + NOISE * mag
    else:
        err = NOISE * mag
    return val, err, tails


# --------------------------------------------------------------------------
# derivatives and operators


def derivative(f: SmoothFamily, alpha) -> SmoothFamily:
    """``d^alpha f``: exact closure when the family carries one, else finite differences."""
    alpha = MultiIndex.coerce(alpha, f.dimension)
    if alpha.order == 0:
        return f
    if alpha.order > f.declared_smoothness:
        raise SmoothnessExceeded(
            f"{f.label or 'family'} is declared C^{f.declared_smoothness}; cannot take d^{alpha.entries}"
        )
    res = f.partial(alpha.entries) if f.partial is not None else None
    if res is None:
        res = _fd_family(f, alpha)
    # support edges and kinks of f are where its derivatives need mesh breaks too
    if f.breakpoints and not res.breakpoints:
        res = replace(res, breakpoints=f.breakpoints)
    return res


def fd_weights(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Central stencil (offsets, weights) for the n-th derivative, fourth-order accurate."""
    p = (n + 1) // 2 + 1
    offs = np.arange(-p, p + 1, dtype=float)
    V = np.vander(offs, increasing=True).T
    rhs = np.zeros(2 * p + 1)
    rhs[n] = math.factorial(n)
    return offs, np.linalg.solve(V, rhs)


def _fd_step(f: SmoothFamily, k: int) -> float:
    if f.ladder is not None:
        return f.ladder[k] / 32.0
    ft = f.feature_at(k)
    return ft.scale / 32.0 if ft is not None else 1e-3


def _fd_family(f: SmoothFamily, alpha: MultiIndex) -> SmoothFamily:
    d = f.dimension
    stencils = []
    for axis, n in enumerate(alpha.entries):
        if n:
            offs, w = fd_weights(n)
            stencils.append((axis, offs, w))
    reach = max(float(np.max(s[1])) for s in stencils)

    def evaluator(k, x):
        h = _fd_step(f, k)
        scale = float(np.max(np.abs(x))) if x.size else 0.0
        if h < 1e3 * np.finfo(float).eps * scale:
            raise StepUnderflow(f"finite-difference step {h:.3g} underflows at |x| = {scale:.3g}")
        out = np.zeros(x.shape[0])
        for combo in itertools.product(*[range(len(s[1])) for s in stencils]):
            shift = np.zeros(d)
            weight = 1.0
            for (axis, offs, w), i in zip(stencils, combo):
                if w[i] == 0.0:
                    weight = 0.0
                    break
                shift[axis] = offs[i] * h
                weight *= w[i]
            if weight:
                out += weight * f(k, x + shift)
        return out / h**alpha.order

    def support(k):
        return f.support_radius(k) + reach * _fd_step(f, k) * math.sqrt(d)

    return SmoothFamily(
        d,
        evaluator,
        support,
        f.declared_smoothness - alpha.order,
        f"d{alpha.entries} {f.label}",
        f.ladder,
        f.feature,
        lambda beta: derivative(f, alpha + MultiIndex.coerce(beta, d)),
        growth=f.growth,
    )


def apply_pdo(P: PDOperator, f: SmoothFamily) -> SmoothFamily:
    """``P(d) f = sum_alpha c_alpha d^alpha f``."""
    if P.dimension != f.dimension:
        raise DimensionMismatch(f"{P.dimension}-dimensional operator applied to a {f.dimension}-dimensional family")
    if P.order > f.declared_smoothness:
        raise SmoothnessExceeded(f"operator of order {P.order} exceeds C^{f.declared_smoothness}")
    if f.operator is not None:
        res = f.operator(P)
        if res is not None:
            return res
    terms = [(c, derivative(f, a)) for a, c in P.items()]
    return combine(terms, radial=f.radial and is_rotation_invariant(P), label=f"P {f.label}")


def combine(terms: Sequence[tuple[float, SmoothFamily]], *, radial: bool | None = None, label: str = "") -> SmoothFamily:
    """Pointwise linear combination ``sum c_i f_i``."""
    terms = [(float(c), f) for c, f in terms]
    fams = [f for _, f in terms]
    d = _check_dims(*fams)
    ladder, _ = common_ladder(*fams)
    if len(terms) == 1 and terms[0][0] == 1.0:
        return fams[0]

    def evaluator(k, x):
        out = np.zeros(x.shape[0])
        for c, f in terms:
            out += c * f(k, x)
        return out

    def support(k):
        return max(f.support_radius(k) for f in fams)

    def feature(k):
        feats = [f.feature_at(k) for f in fams]
        feats = [ft for ft in feats if ft is not None]
        if not feats:
            return None
        scale = min(ft.scale for ft in feats)
        if all(ft.localized for ft in feats):
            return Feature(scale, True, max(ft.extent * ft.scale for ft in feats) / scale)
        return Feature(scale, False)

    def partial(beta):
        return combine([(c, derivative(f, beta)) for c, f in terms], label=f"d{tuple(beta)} {label}")

    def operator(P):
        return combine([(c, apply_pdo(P, f)) for c, f in terms], label=f"P {label}")

    growths = [f.growth for f in fams]
    growth = None
    if all(g is not None or f.is_s_compact(range(f.n_levels or 1)) for g, f in zip(growths, fams)):
        gs = [g for g in growths if g is not None]
        if gs:
            growth = (sum(abs(c) * g[0] for (c, _), g in zip(terms, growths) if g is not None), max(g[1] for g in gs))
    bps = tuple(sorted({b for f in fams for b in f.breakpoints}))
    return SmoothFamily(
        d,
        evaluator,
        support,
        min(f.declared_smoothness for f in fams),
        label or " + ".join(f"{c:g}*{f.label}" for c, f in terms),
        ladder,
        feature,
        partial,
        operator,
        radial=all(f.radial for f in fams) if radial is None else radial,
        singular=any(f.singular for f in fams),
        breakpoints=bps,
        growth=growth,
    )


def scale_family(f: SmoothFamily, c: float) -> SmoothFamily:
    return combine([(c, f)], label=f"{c:g}*{f.label}")


def zero_family(d: int, ladder: ScaleLadder | None = None) -> SmoothFamily:
    return SmoothFamily(
        d,
        lambda k, x: np.zeros(x.shape[0]),
        lambda k: 1.0,
        math.inf,
        "0",
        ladder,
        partial=lambda beta: zero_family(d, ladder),
        operator=lambda P: zero_family(d, ladder),
        radial=True,
        growth=(0.0, 0.0),
    )


def constant_family(c: float, d: int) -> SmoothFamily:
    return SmoothFamily(
        d,
        lambda k, x: np.full(x.shape[0], float(c)),
        lambda k: math.inf,
        math.inf,
        f"const {c:g}",
        partial=lambda beta: zero_family(d),
        radial=True,
        growth=(abs(float(c)), 0.0),
    )


# --------------------------------------------------------------------------
# convolution


def convolve(f: SmoothFamily, g: SmoothFamily, quad: QuadratureSpec = DEFAULT_QUAD) -> SmoothFamily:
    """``(f * g)_k(x) = int f_k(x - y) g_k(y) dy`` over the compact factor's support."""
    _check_dims(f, g)
    ladder, n_levels = common_ladder(f, g)
    levels = range(n_levels)
    fc, gc = f.is_s_compact(levels), g.is_s_compact(levels)
    if fc and gc:
        last = n_levels - 1
        kernel, compact = (g, f) if f.support_radius(last) < g.support_radius(last) else (f, g)
        if f.dimension == 1 and any(b != 0 for b in kernel.breakpoints) and not any(b != 0 for b in compact.breakpoints):
            # the windowed 1-D rule handles kernel structure at the origin only
            kernel, compact = compact, kernel
    elif gc:
        kernel, compact = f, g
    elif fc:
        kernel, compact = g, f
    else:
        raise NeitherCompact(
            f"neither {f.label or 'f'} nor {g.label or 'g'} has finite support at every level"
        )
    if kernel.convolver is not None:
        return kernel.convolver(compact, quad)
    if f.dimension == 1:
        evaluator = _Conv1D(kernel, compact, quad, ladder)
    else:
        if kernel.singular:
            raise UnboundedIntegrand(
                f"{kernel.label or 'kernel'} is singular; in d >= 2 it needs its own convolution rule"
            )
        evaluator = _ConvND(kernel, compact, quad, ladder)
    radial = kernel.radial and compact.radial
    if radial and f.dimension > 1:
        evaluator = RadialCache(evaluator, f.dimension)
    return convolution_family(
        kernel, compact, evaluator, ladder, radial=radial, rebuild=lambda kk, cc: convolve(kk, cc, quad)
    )


def _merge_conv_feature(a: Feature | None, b: Feature | None) -> Feature | None:
    feats = [ft for ft in (a, b) if ft is not None]
    if not feats:
        return None
    scale = max(ft.scale for ft in feats)
    if all(ft.localized for ft in feats):
        return Feature(scale, True, sum(ft.extent * ft.scale for ft in feats) / scale)
    return Feature(scale, False)


def convolution_family(
    kernel: SmoothFamily,
    compact: SmoothFamily,
    evaluator: Callable,
    ladder,
    *,
    radial: bool,
    rebuild: Callable[[SmoothFamily, SmoothFamily], SmoothFamily],
    support: Callable[[int], float] | None = None,
    label: str = "",
) -> SmoothFamily:
    """Wrap a convolution evaluator; derivatives and operators fall on the compact factor."""

    def default_support(k):
        return kernel.support_radius(k) + compact.support_radius(k)

    def partial(beta):
        beta = MultiIndex.coerce(beta, compact.dimension)
        if compact.partial is not None or kernel.partial is None:
            return rebuild(kernel, derivative(compact, beta))
        return rebuild(derivative(kernel, beta), compact)

    def operator(P):
        return rebuild(kernel, apply_pdo(P, compact))

    reassociate = None
    if not kernel.is_s_compact(range(kernel.n_levels or 1)):
        # (K * c) * g = K * (c * g): one quadrature per level instead of a nested one
        def reassociate(g, quad):
            return convolve(kernel, convolve(compact, g, quad), quad)

    return SmoothFamily(
        compact.dimension,
        evaluator,
        support or default_support,
        max(kernel.declared_smoothness, compact.declared_smoothness),
        label or f"({kernel.label}) * ({compact.label})",
        ladder,
        lambda k: _merge_conv_feature(kernel.feature_at(k), compact.feature_at(k)),
        partial,
        operator,
        radial=radial,
        convolver=reassociate,
        growth=kernel.growth if not kernel.is_s_compact(range(kernel.n_levels or 1)) else None,
    )


class RadialCache:
    """Evaluate a radial d-dimensional function only at distinct radii, memoised per level."""

    def __init__(self, inner: Callable, d: int):
        self.inner = inner
        self.d = d
        self._cache: dict[int, dict[float, float]] = {}

    def __call__(self, k, x):
        r = np.sqrt(np.sum(x * x, axis=1))
        cache = self._cache.setdefault(k, {})
        uniq, inv = np.unique(r, return_inverse=True)
        missing = [v for v in uniq.tolist() if v not in cache]
        if missing:
            probe = np.zeros((len(missing), self.d))
            probe[:, 0] = missing
            got = self.inner(k, probe)
            # dict.update is atomic, so concurrent callers at worst recompute
            cache.update(zip(missing, got.tolist()))
        vals = np.array([cache[v] for v in uniq.tolist()])
        return vals[inv.ravel()]


class _Conv1D:
    """Vectorised 1-D convolution.

    A static mesh over the compact factor's support resolves that factor; a
    window about ``y = x`` that follows the evaluation point resolves the
    kernel's own structure (kinks, singularity, scale-rho features).
    """

    def __init__(self, kernel: SmoothFamily, compact: SmoothFamily, quad: QuadratureSpec, ladder):
        if any(b != 0 for b in kernel.breakpoints):
            raise NotImplementedError("kernel breakpoints away from the origin are not supported")
        self.kernel, self.compact, self.quad, self.ladder = kernel, compact, quad, ladder
        self._static: dict[int, tuple] = {}

    def _setup(self, k):
        hit = self._static.get(k)
        if hit is not None:
            return hit
        q = self.quad
        R = self.compact.support_radius(k)
        cplan = _plan([self.compact], k, q, self.ladder)
        kplan = _plan([self.kernel], k, q, self.ladder)
        coarse = min(cplan.coarse, kplan.coarse)
        zones = [(0.0, cplan.zone)] if cplan.zone > 0 else []
        br = axis_mesh(-R, R, fine=cplan.fine, coarse=coarse, zones=zones, grading=q.grading, breaks=self.compact.breakpoints)
        ys, ws = composite(br, q.rule, q.order)
        npc = len(ws) // (len(br) - 1)
        lo = np.repeat(br[:-1], npc)
        hi = np.repeat(br[1:], npc)
        cv = self.compact(k, ys[:, None])
        a = kplan.zone
        jumpy = self.kernel.singular or 0.0 in self.kernel.breakpoints
        if jumpy:
            a = max(a, kplan.fine)
        if self.kernel.singular:
            a = max(a, coarse)
        if a > 0:
            n = max(1, math.ceil(a / kplan.fine - 1e-9)) if kplan.zone > 0 else 1
            t = np.linspace(0.0, 1.0, n + 1)
            if self.kernel.singular:
                t = np.union1d(t, (1.0 / n) * 2.0 ** -np.arange(1, 45))
            tn, tw = composite(t, q.rule, q.order)
        else:
            tn = tw = None
        gt, gw = reference_rule(q.rule, q.order)
        hit = (br, ys, ws, lo, hi, cv, a, tn, tw, gt, gw)
        self._static[k] = hit
        return hit

    def __call__(self, k, x):
        br, ys, ws, lo, hi, cv, a, tn, tw, gt, gw = self._setup(k)
        xs = x[:, 0]
        out = np.empty(xs.size)
        K, C = self.kernel, self.compact
        per = ys.size + (2 * gt.size + 2 * tn.size if a > 0 else 0)
        for sl in chunks(xs.size, per):
            xc = xs[sl]
            kv = K(k, (xc[:, None] - ys[None, :]).reshape(-1, 1)).reshape(xc.size, ys.size)
            if a <= 0:
                out[sl] = kv @ (cv * ws)
                continue
            keep = (hi[None, :] <= (xc - a)[:, None]) | (lo[None, :] >= (xc + a)[:, None])
            total = (kv * keep) @ (cv * ws)
            # partial cells cut by the window edges
            for edge, left in ((xc - a, True), (xc + a, False)):
                i = np.searchsorted(br, edge, side="right") - 1
                inside = (i >= 0) & (i < br.size - 1)
                i = np.clip(i, 0, br.size - 2)
                inside &= (br[i] < edge) & (edge < br[i + 1])
                c0 = np.where(left, br[i], edge)
                c1 = np.where(left, edge, br[i + 1])
                width = np.where(inside, c1 - c0, 0.0)
                yn = c0[:, None] + width[:, None] * gt[None, :]
                vals = K(k, (xc[:, None] - yn).reshape(-1, 1)).reshape(yn.shape) * C(k, yn.reshape(-1, 1)).reshape(yn.shape)
                total += (vals * gw[None, :]).sum(axis=1) * width
            # the window itself, graded toward y = x from both sides
            for sign in (-1.0, 1.0):
                yn = xc[:, None] + sign * a * tn[None, :]
                vals = K(k, (xc[:, None] - yn).reshape(-1, 1)).reshape(yn.shape) * C(k, yn.reshape(-1, 1)).reshape(yn.shape)
                total += a * (vals @ tw)
            out[sl] = total
        return out


class _ConvND:
    """Tensor-product graded mesh over the compact factor's bounding box (d >= 2)."""

    def __init__(self, kernel: SmoothFamily, compact: SmoothFamily, quad: QuadratureSpec, ladder):
        self.kernel, self.compact, self.quad, self.ladder = kernel, compact, quad, ladder

    def __call__(self, k, x):
        q = self.quad
        R = self.compact.support_radius(k)
        cplan = _plan([self.compact], k, q, self.ladder)
        kplan = _plan([self.kernel], k, q, self.ladder)
        coarse = min(cplan.coarse, kplan.coarse)
        d = x.shape[1]
        out = np.empty(x.shape[0])
        for i, xi in enumerate(x):
            nodes, weights = [], []
            for axis in range(d):
                zones = []
                if cplan.zone > 0:
                    zones.append((0.0, cplan.zone))
                if kplan.zone > 0:
                    zones.append((float(xi[axis]), kplan.zone))
                br = axis_mesh(-R, R, fine=min(cplan.fine, kplan.fine), coarse=coarse, zones=zones, grading=q.grading)
                n, w = composite(br, q.rule, q.order)
                nodes.append(n)
                weights.append(w)
            Y = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1).reshape(-1, d)
            W = weights[0]
            for w in weights[1:]:
                W = np.multiply.outer(W, w)
            W = W.ravel()
            inside = np.sum(Y * Y, axis=1) < R * R
            Y, W = Y[inside], W[inside]
            out[i] = np.sum(self.kernel(k, xi - Y) * self.compact(k, Y) * W)
        return out


def convolve_grid(f: SmoothFamily, g: SmoothFamily, level: int, half_width: float, n: int):
    """Convolution on an equispaced grid via FFT (trapezoid rule on the grid).

    Returns the 1-D grid axis and the array of values on the tensor grid.
    Both factors should be negligible outside the grid box.
    """
    d = _check_dims(f, g)
    if n % 2 == 0:
        n += 1
    axis = np.linspace(-half_width, half_width, n)
    h = axis[1] - axis[0]
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    F = f(level, pts).reshape((n,) * d)
    G = g(level, pts).reshape((n,) * d)
    return axis, signal.fftconvolve(F, G, mode="same") * h**d
