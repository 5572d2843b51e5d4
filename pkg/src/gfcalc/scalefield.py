"""Scale ladders, mollifier profiles and scale-indexed smooth families.

A single infinitesimal scale is modelled by a finite, strictly decreasing
ladder of positive scales.  A :class:`SmoothFamily` is a map
``(level, x) -> value``; every "nonstandard" object in the library (delta
functions, mollified kernels, solutions) is one of these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
import sympy as sp
from scipy import integrate, special

from .errors import LadderError, MollifierError, SupportViolation
from .profiles import BUMP_CUTOFF, AnalyticProfile, bump_expr, coordinates

MAX_EXPONENT = 40
MOLLIFIER_KINDS = ("bump", "gaussian", "sinc")


@dataclass(frozen=True)
class ScaleLadder:
    """Strictly decreasing scales ``rho_0 > rho_1 > ... > rho_L``."""

    levels: tuple[float, ...]
    base: float = 2.0

    def __post_init__(self):
        levels = tuple(float(r) for r in self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < 3:
            raise LadderError("a ladder needs at least 3 levels to fit a convergence order")
        if any(r <= 0 or not math.isfinite(r) for r in levels):
            raise LadderError("ladder levels must be positive and finite")
        for a, b in zip(levels, levels[1:]):
            if not a > b:
                raise LadderError("ladder levels must be strictly decreasing")
            if not 1.5 * (1 - 1e-12) <= a / b <= 16.0 * (1 + 1e-12):
                raise LadderError(f"consecutive ratio {a / b:g} outside [1.5, 16]")

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, k: int) -> float:
        return self.levels[k]

    def __iter__(self):
        return iter(self.levels)

    @property
    def finest(self) -> float:
        return self.levels[-1]

    @property
    def rhos(self) -> np.ndarray:
        return np.asarray(self.levels)

    @property
    def lambdas(self) -> np.ndarray:
        """Large parameters ``1/rho_k`` (frequency cut-offs, etc.)."""
        return 1.0 / self.rhos


def make_ladder(k_min: int, k_max: int, base: float = 2.0) -> ScaleLadder:
    """Geometric ladder ``[base**-k for k in k_min..k_max]``."""
    if not base > 1:
        raise LadderError(f"base must be > 1, got {base!r}")
    if k_min >= k_max:
        raise LadderError(f"need k_min < k_max, got {k_min} >= {k_max}")
    if k_max > MAX_EXPONENT:
        raise LadderError(f"k_max must be <= {MAX_EXPONENT} (underflow guard)")
    return ScaleLadder(tuple(float(base) ** -k for k in range(k_min, k_max + 1)), float(base))


DEFAULT_LADDER = (4, 10, 2.0)


def default_ladder() -> ScaleLadder:
    return make_ladder(*DEFAULT_LADDER)


# --------------------------------------------------------------------------
# mollifiers


@dataclass(frozen=True, eq=False)
class Mollifier:
    dimension: int
    kind: str
    support_radius: float
    normalization: float
    abs_integral: float
    profile: AnalyticProfile = field(repr=False)

    def __call__(self, x, alpha: Sequence[int] | None = None) -> np.ndarray:
        return self.profile(_as_points(x, self.dimension), alpha)

    def tail_mass(self, radius: float) -> float:
        """``int_{|x| > radius} |psi|``."""
        if self.kind == "bump":
            return 0.0 if radius >= self.support_radius else math.nan
        if self.kind == "gaussian":
            return float(special.gammaincc(self.dimension / 2.0, radius**2 / 2.0))
        return math.inf

    def tail_moment(self, radius: float, rho: float, p: float) -> float:
        """``int_{|u| > radius} |psi(u)| (1 + rho |u|)^p du``.

        Bounds the neglected part of a pairing of ``rho^-d psi(x/rho)`` with a
        function growing at most like ``(1 + |x|)^p``.
        """
        if p == 0 or self.kind != "gaussian":
            return self.tail_mass(radius)
        d = self.dimension
        c = self.normalization * _sphere_area(d)
        val, _ = integrate.quad(
            lambda u: c * math.exp(-u * u / 2) * (1 + rho * u) ** p * u ** (d - 1), radius, math.inf
        )
        return val


def _sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@lru_cache(maxsize=None)
def bump_integral(d: int) -> float:
    """``int_{|x|<1} exp(-1/(1-|x|^2)) dx`` by adaptive quadrature."""
    val, _ = integrate.quad(
        lambda r: r ** (d - 1) * math.exp(-1.0 / (1.0 - r * r)),
        0.0,
        1.0,
        epsabs=1e-15,
        epsrel=1e-13,
        limit=200,
    )
    return _sphere_area(d) * val


@lru_cache(maxsize=None)
def make_mollifier(kind: str, d: int = 1) -> Mollifier:
    """Unit-mass profile ``psi`` of the given kind in ``d`` dimensions."""
    if not isinstance(d, int) or d < 1:
        raise MollifierError(f"dimension must be a positive integer, got {d!r}")
    if kind == "bump":
        c = 1.0 / bump_integral(d)
        prof = AnalyticProfile(
            sp.Float(c) * bump_expr(d), d, radius=1.0, cutoff=BUMP_CUTOFF, name=f"bump{d}"
        )
        return Mollifier(d, kind, 1.0, c, 1.0, prof)
    if kind == "gaussian":
        c = (2.0 * math.pi) ** (-d / 2.0)
        r2 = sum(x**2 for x in coordinates(d))
        prof = AnalyticProfile(sp.Float(c) * sp.exp(-r2 / 2), d, name=f"gaussian{d}")
        return Mollifier(d, kind, math.inf, c, 1.0, prof)
    if kind == "sinc":
        if d != 1:
            raise MollifierError("the sinc profile is one-dimensional only")
        (x,) = coordinates(1)
        expr = sp.sin(x) / (sp.pi * x)
        series = sp.series(expr, x, 0, 40).removeO()
        prof = AnalyticProfile(expr, 1, series=series, series_radius=0.5, name="sinc")
        return Mollifier(1, kind, math.inf, 1.0 / math.pi, math.inf, prof)
    raise MollifierError(f"unknown mollifier kind {kind!r}; expected one of {MOLLIFIER_KINDS}")


# --------------------------------------------------------------------------
# families


class Feature(NamedTuple):
    """Finest length scale of a family at one level.

    ``localized`` features live within ``extent * scale`` of the family's
    origin; otherwise the scale applies everywhere (oscillations, wide
    standard profiles).
    """

    scale: float
    localized: bool = True
    extent: float = 1.5


def _as_points(x, d: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1) if d == 1 else arr.reshape(1, -1)
    elif arr.ndim == 1:
        arr = arr[:, None] if d == 1 else arr[None, :]
    if arr.shape[-1] != d:
        raise ValueError(f"points of dimension {arr.shape[-1]} given to a {d}-dimensional object")
    return arr


@dataclass(frozen=True, eq=False)
class SmoothFamily:
    """Ladder-indexed family of maps R^d -> R.

    ``evaluator(k, x)`` takes a level index and points of shape (n, d).
    Optional closures carry exact derivatives (``partial``) or the exact
    action of a differential operator (``operator``); ``convolver`` lets a
    kernel supply its own singularity-aware convolution rule.
    """

    dimension: int
    evaluator: Callable[[int, np.ndarray], np.ndarray]
    support_radius: Callable[[int], float]
    declared_smoothness: float = math.inf
    label: str = ""
    ladder: ScaleLadder | None = None
    feature: Callable[[int], Feature | None] | None = None
    partial: Callable[[tuple[int, ...]], "SmoothFamily"] | None = None
    operator: Callable[[object], "SmoothFamily | None"] | None = None
    convolver: Callable[["SmoothFamily", object], "SmoothFamily"] | None = None
    radial: bool = False
    singular: bool = False
    breakpoints: tuple[float, ...] = ()
    growth: tuple[float, float] | None = None
    # tail_mass(k, R, p) bounds int_{|x|>R} |f_k| (1 + |x|)^p
    tail_mass: Callable[..., float] | None = None
    tags: frozenset = frozenset()

    def __call__(self, level: int, x) -> np.ndarray:
        self.check_level(level)
        pts = _as_points(x, self.dimension)
        return np.asarray(self.evaluator(level, pts), dtype=float)

    def check_level(self, level: int) -> None:
        if self.ladder is not None and not 0 <= level < len(self.ladder):
            raise IndexError(f"level {level} outside ladder of {len(self.ladder)} levels")

    @property
    def n_levels(self) -> int | None:
        return None if self.ladder is None else len(self.ladder)

    def feature_at(self, level: int) -> Feature | None:
        return None if self.feature is None else self.feature(level)

    def is_s_compact(self, levels: Sequence[int] | None = None) -> bool:
        """True when the support radii are finite and bounded across levels."""
        if levels is None:
            levels = range(self.n_levels or 1)
        return all(math.isfinite(self.support_radius(k)) for k in levels)

    def with_label(self, label: str) -> "SmoothFamily":
        return replace(self, label=label)

    def spot_check_support(self, level: int, n: int = 64, seed: int = 0, atol: float = 0.0) -> None:
        """Sample points beyond the support radius and require zero values."""
        r = self.support_radius(level)
        if not math.isfinite(r):
            return
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(n, self.dimension))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = r * (1.0 + 1e-9 + rng.uniform(0.0, 2.0, size=n))
        vals = self(level, dirs * radii[:, None])
        worst = float(np.max(np.abs(vals)))
        if worst > atol:
            raise SupportViolation(
                f"{self.label or 'family'} is {worst:.3g} outside its declared support radius {r:g}"
            )


def standard_family(
    func: Callable[[np.ndarray], np.ndarray] | AnalyticProfile,
    dimension: int,
    *,
    support_radius: float = math.inf,
    scale: float | None = None,
    smoothness: float = math.inf,
    label: str = "",
    radial: bool = False,
    breakpoints: Sequence[float] = (),
    growth: tuple[float, float] | None = None,
) -> SmoothFamily:
    """Level-independent family wrapping an ordinary function."""
    if isinstance(func, AnalyticProfile):
        prof = func
        support_radius = min(support_radius, prof.support_radius)
        smoothness = min(smoothness, prof.smoothness)
        breakpoints = tuple(breakpoints) or prof.breakpoints
        label = label or prof.name
        evaluator = lambda k, x: prof(x)
        if scale is None and math.isfinite(prof.radius):
            scale = prof.radius

        def partial(alpha):
            if sum(alpha) > prof.smoothness:
                raise ValueError("smoothness exceeded")
            return _profile_derivative_family(prof, alpha, dimension, support_radius, scale, label, radial)

    else:
        evaluator = lambda k, x: np.array(np.broadcast_to(np.asarray(func(x), dtype=float).reshape(-1), (x.shape[0],)))
        partial = None
    feat = None if scale is None else Feature(scale, localized=False)
    return SmoothFamily(
        dimension,
        evaluator,
        lambda k, r=support_radius: r,
        smoothness,
        label,
        None,
        (lambda k, f=feat: f),
        partial,
        radial=radial,
        breakpoints=tuple(breakpoints),
        growth=growth,
    )


def _profile_derivative_family(prof, alpha, d, support_radius, scale, label, radial):
    alpha = tuple(alpha)
    feat = None if scale is None else Feature(scale, localized=False)

    def partial(beta):
        gamma = tuple(a + b for a, b in zip(alpha, beta))
        return _profile_derivative_family(prof, gamma, d, support_radius, scale, label, radial)

    return SmoothFamily(
        d,
        lambda k, x: prof(x, alpha),
        lambda k: support_radius,
        prof.smoothness - sum(alpha),
        f"d{alpha} {label}",
        None,
        lambda k: feat,
        partial,
        radial=radial and not any(alpha),
    )


def _scaled_family(
    psi: Mollifier,
    ladder: ScaleLadder,
    alpha: tuple[int, ...],
    *,
    extent: float,
    localized: bool,
    feature_factor: float,
    tags: frozenset,
    label: str,
) -> SmoothFamily:
    d = psi.dimension
    order = sum(alpha)

    def evaluator(k, x):
        rho = ladder[k]
        return rho ** (-d - order) * psi.profile(x / rho, alpha)

    def partial(beta):
        gamma = tuple(a + b for a, b in zip(alpha, beta))
        return _scaled_family(
            psi,
            ladder,
            gamma,
            extent=extent,
            localized=localized,
            feature_factor=feature_factor,
            tags=frozenset(),
            label=f"d{gamma} {label}",
        )

    tail = None
    if order == 0:
        tail = lambda k, radius, p=0.0: psi.tail_moment(radius / ladder[k], ladder[k], p)
    return SmoothFamily(
        d,
        evaluator,
        lambda k: ladder[k] * psi.support_radius,
        math.inf,
        label,
        ladder,
        lambda k: Feature(feature_factor * ladder[k], localized, extent),
        partial,
        radial=(order == 0 and psi.kind != "sinc") or (d == 1 and order % 2 == 0),
        tail_mass=tail,
        tags=tags,
    )


def model_delta(psi: Mollifier, ladder: ScaleLadder) -> SmoothFamily:
    """``delta_k(x) = rho_k^-d psi(x / rho_k)`` for a compactly supported ``psi``."""
    if psi.kind != "bump" or not math.isfinite(psi.support_radius):
        raise MollifierError(
            f"model deltas need a compactly supported profile; got {psi.kind!r} (use scaled_delta)"
        )
    return _scaled_family(
        psi,
        ladder,
        (0,) * psi.dimension,
        extent=1.5,
        localized=True,
        feature_factor=psi.support_radius,
        tags=frozenset({"model-delta", "order0-candidate"}),
        label=f"model delta ({psi.kind}, d={psi.dimension})",
    )


def scaled_delta(psi: Mollifier, ladder: ScaleLadder) -> SmoothFamily:
    """Same scaling law for non-compact profiles (Gaussian, Dirichlet kernel)."""
    if psi.kind == "gaussian":
        return _scaled_family(
            psi,
            ladder,
            (0,) * psi.dimension,
            extent=8.0,
            localized=True,
            feature_factor=1.0,
            tags=frozenset({"order0-candidate"}),
            label=f"scaled delta (gaussian, d={psi.dimension})",
        )
    if psi.kind == "sinc":
        # half a wavelength of sin(x / rho) is pi * rho
        return _scaled_family(
            psi,
            ladder,
            (0,),
            extent=1.0,
            localized=False,
            feature_factor=math.pi,
            tags=frozenset({"c1-delta-candidate"}),
            label="scaled delta (sinc / Dirichlet kernel)",
        )
    raise MollifierError(f"scaled_delta takes gaussian or sinc profiles, got {psi.kind!r} (use model_delta)")
