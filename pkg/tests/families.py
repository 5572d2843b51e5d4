"""Ladder-indexed families with closed-form profiles, shared by several tests."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from gfcalc.profiles import BUMP_CUTOFF, AnalyticProfile, coordinates
from gfcalc.scalefield import Feature, ScaleLadder, SmoothFamily

X = coordinates(1)[0]
RHO = sp.Symbol("rho", positive=True)


def bump_profile(expr_factor=1, radius: float = 1.0) -> sp.Expr:
    return sp.exp(1 - 1 / (1 - (X / radius) ** 2)) * expr_factor


def ladder_family(
    expr: sp.Expr,
    ladder: ScaleLadder,
    *,
    support: float = math.inf,
    cutoff: float = 1.0,
    smoothness: float = math.inf,
    scale: Callable[[float], float] | None = None,
    label: str = "",
    breakpoints: Sequence[float] = (),
) -> SmoothFamily:
    """``f_k(x) = expr(x, rho_k)`` with exact x-derivatives.

    ``support`` is the radius outside which every level vanishes (the
    expression is used inside it).  ``scale(rho)`` is the finest length scale.
    """
    profiles: dict = {}

    def profile(k: int) -> AnalyticProfile:
        if k not in profiles:
            profiles[k] = AnalyticProfile(expr.subs(RHO, sp.Float(ladder[k])), 1, radius=support,
                                          cutoff=cutoff, smoothness=smoothness, breakpoints=breakpoints)
        return profiles[k]

    def build(alpha: tuple[int, ...]) -> SmoothFamily:
        return SmoothFamily(
            1,
            lambda k, x: profile(k)(x, alpha),
            lambda k: support,
            smoothness - sum(alpha),
            label,
            ladder,
            (lambda k: Feature(scale(ladder[k]), localized=False)) if scale else (lambda k: Feature(min(support, 1.0), localized=False)),
            lambda beta: build(tuple(a + b for a, b in zip(alpha, beta))),
            breakpoints=tuple(breakpoints),
        )

    return build((0,))


def sample_grid(radius: float, n: int) -> np.ndarray:
    return np.linspace(-radius, radius, n)
