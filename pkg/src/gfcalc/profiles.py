"""Closed-form profiles with exact partial derivatives.

A profile is a sympy expression in the coordinates ``x0 .. x{d-1}`` that is
valid inside a ball and zero outside it (or valid everywhere).  Partial
derivatives are obtained symbolically once and compiled with ``lambdify``.
"""

from __future__ import annotations

import math
import threading
from typing import Sequence

import numpy as np
import sympy as sp
from sympy.printing.numpy import NumPyPrinter

# exp(-1/(1-s)) and every derivative of it underflow to 0 once 1/(1-s) > ~700
BUMP_CUTOFF = 1.0 - 1.0 / 700.0


def coordinates(d: int) -> tuple[sp.Symbol, ...]:
    return sp.symbols(" ".join(f"x{i}" for i in range(d)), real=True, seq=True)


class AnalyticProfile:
    """Smooth (or piecewise smooth) function given by a symbolic expression.

    ``expr`` is used where ``|x - center|^2 / radius^2 < cutoff``; the profile
    is zero elsewhere.  ``radius=inf`` means the expression is global.
    ``series`` optionally replaces ``expr`` for ``|x0| < series_radius`` (1-D
    profiles with a removable singularity at the origin, such as sinc).
    """

    def __init__(
        self,
        expr: sp.Expr,
        dimension: int,
        *,
        radius: float = math.inf,
        center: Sequence[float] | None = None,
        cutoff: float = 1.0,
        smoothness: float = math.inf,
        breakpoints: Sequence[float] = (),
        series: sp.Expr | None = None,
        series_radius: float = 0.0,
        name: str = "",
    ):
        self.expr = expr
        self.dimension = dimension
        self.radius = float(radius)
        self.center = np.zeros(dimension) if center is None else np.asarray(center, float)
        self.cutoff = cutoff
        self.smoothness = smoothness
        self.breakpoints = tuple(breakpoints)
        self.series = series
        self.series_radius = series_radius
        self.name = name
        self.symbols = coordinates(dimension)
        self._compiled: dict[tuple[int, ...], tuple] = {}
        self._lock = threading.Lock()

    @property
    def support_radius(self) -> float:
        """Radius of the smallest origin-centred ball containing the support."""
        return float(np.linalg.norm(self.center)) + self.radius

    def _compile(self, alpha: tuple[int, ...]):
        with self._lock:
            hit = self._compiled.get(alpha)
            if hit is not None:
                return hit
            expr = self.expr
            series = self.series
            for axis, n in enumerate(alpha):
                if n:
                    expr = sp.diff(expr, self.symbols[axis], n)
                    if series is not None:
                        series = sp.diff(series, self.symbols[axis], n)
            fn = _lambdify(self.symbols, expr)
            sfn = None if series is None else _lambdify(self.symbols, series)
            self._compiled[alpha] = (fn, sfn)
            return fn, sfn

    def __call__(self, x: np.ndarray, alpha: Sequence[int] | None = None) -> np.ndarray:
        """Evaluate ``d^alpha`` of the profile at points ``x`` of shape (n, d)."""
        x = np.asarray(x, dtype=float)
        alpha = tuple(alpha) if alpha is not None else (0,) * self.dimension
        if sum(alpha) > self.smoothness:
            raise ValueError(f"profile {self.name!r} is only C^{self.smoothness}")
        fn, sfn = self._compile(alpha)
        if math.isinf(self.radius):
            mask = np.ones(x.shape[0], dtype=bool)
        else:
            s = np.zeros(x.shape[0])
            for i in range(self.dimension):
                c = float(self.center[i])
                s += (x[:, i] - c) ** 2 if c else x[:, i] ** 2
            mask = s < self.cutoff * self.radius**2
        if sfn is None and mask.mean() > 0.5:
            # mostly inside: evaluate everywhere (outside rows moved to the centre) and zero the rest
            if not mask.all():
                x = np.where(mask[:, None], x, self.center)
            vals = np.array(_broadcast(fn(*x.T), x.shape[0]), dtype=float)
            return vals if mask.all() else vals * mask
        out = np.zeros(x.shape[0])
        if sfn is not None:
            near = mask & (np.abs(x[:, 0]) < self.series_radius)
            mask = mask & ~near
            if near.any():
                out[near] = _broadcast(sfn(*x[near].T), near.sum())
        if mask.any():
            out[mask] = _broadcast(fn(*x[mask].T), mask.sum())
        return out


class _Printer(NumPyPrinter):
    """NumPy printer that keeps negative integer powers integral (``1/x**2``); float pow is slow."""

    def _print_Pow(self, expr, rational=False):
        e = expr.exp
        if e.is_Integer and e < 0:
            return "1/({})".format(self._print(sp.Pow(expr.base, -e, evaluate=False)))
        return super()._print_Pow(expr, rational=rational)


def _lambdify(symbols, expr):
    return sp.lambdify(symbols, expr, "numpy", cse=True, printer=_Printer({"fully_qualified_modules": False, "inline": True, "allow_unknown_functions": True, "user_functions": {}}))


def _broadcast(values, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(values, dtype=float), (n,))


def radius_squared(d: int, center: Sequence[float] | None = None) -> sp.Expr:
    xs = coordinates(d)
    c = [0.0] * d if center is None else list(center)
    return sum((xi - sp.Float(ci) if ci else xi) ** 2 for xi, ci in zip(xs, c))


def bump_expr(d: int, center: Sequence[float] | None = None, radius: float = 1.0) -> sp.Expr:
    """``exp(-1/(1 - |x-c|^2/r^2))`` (unnormalized, valid inside the ball)."""
    s = radius_squared(d, center)
    if radius != 1.0:
        s = s / sp.Float(radius) ** 2
    return sp.exp(-1 / (1 - s))
