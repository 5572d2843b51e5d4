"""Operator catalog, mollified fundamental solutions and the convolution solver.

Each catalog entry pairs a constant-coefficient operator with a classical
locally integrable kernel ``E_cl``.  The kernel is never trusted: the smooth
representative ``E_rho = E_cl * delta_rho`` is built by quadrature and
``P(d) E_rho`` must pass the order-0 delta test before the entry is returned.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .battery import TestBattery, default_battery
from .calculus import (
    DEFAULT_QUAD,
    MultiIndex,
    PDOperator,
    QuadratureSpec,
    RadialCache,
    _plan,
    apply_pdo,
    axis_mesh,
    chunks,
    common_ladder,
    composite,
    convolution_family,
    convolve,
    fd_weights,
    formal_adjoint,
    pair_many,
    reference_rule,
)
from .equivalence import (
    DEFAULT_MIN_ORDER,
    DEFAULT_TOLERANCE,
    ApproxVerdict,
    MembershipVerdict,
    StandardFunctionSample,
    ball_grid,
    dprime_membership,
    finiteness_probe,
    fit_order,
    standard_part,
    verify_delta,
)
from .errors import (
    DivergentFamily,
    GFCalcError,
    SupportViolation,
    UnboundedIntegrand,
    VerificationFailure,
)
from .profiles import AnalyticProfile, coordinates
from .quadrature import coarsen
from .scalefield import (
    Feature,
    Mollifier,
    ScaleLadder,
    SmoothFamily,
    _as_points,
    default_ladder,
    make_mollifier,
    model_delta,
    scaled_delta,
    standard_family,
)

CATALOG = ("ddx_1d", "laplace_1d", "laplace_2d", "laplace_3d", "heat_1p1", "transport_1p1")
_DIMENSION = {"ddx_1d": 1, "laplace_1d": 1, "laplace_2d": 2, "laplace_3d": 3, "heat_1p1": 2, "transport_1p1": 2}


def pdo_catalog(name: str, c: float = 1.0) -> PDOperator:
    """Catalog operator by name; ``c`` is the transport speed."""
    if name == "ddx_1d":
        return PDOperator(1, {(1,): 1.0})
    if name == "laplace_1d":
        return PDOperator(1, {(2,): 1.0})
    if name == "laplace_2d":
        return PDOperator.laplacian(2)
    if name == "laplace_3d":
        return PDOperator.laplacian(3)
    if name == "heat_1p1":
        # coordinates (t, x)
        return PDOperator(2, {(1, 0): 1.0, (0, 2): -1.0})
    if name == "transport_1p1":
        return PDOperator(2, {(1, 0): 1.0, (0, 1): float(c)})
    raise KeyError(f"unknown operator {name!r}; catalog: {', '.join(CATALOG)}")


# --------------------------------------------------------------------------
# classical kernels and their convolution rules


def _cumulative(breaks, nodes, weights, values, t, gt, gw, integrand):
    """``int_{breaks[0]}^{t} integrand`` for a vector of upper limits ``t``.

    ``values`` holds the integrand on the composite nodes; the cell that
    contains ``t`` is finished with the reference rule ``(gt, gw)``.
    """
    per = gt.size
    cell_sums = (values * weights).reshape(-1, per).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(cell_sums)])
    i = np.clip(np.searchsorted(breaks, t, side="right") - 1, 0, breaks.size - 2)
    a = breaks[i]
    width = np.clip(t - a, 0.0, None)
    s = a[:, None] + width[:, None] * gt[None, :]
    part = (integrand(s.ravel()).reshape(s.shape) * gw[None, :]).sum(axis=1) * width
    return cum[i] + part


class _ShellEval:
    """Newton's shell theorem for the 2-D and 3-D Laplace kernels and a radial factor.

    The spherical mean of ``log|x - y|`` (2-D) or ``1/|x - y|`` (3-D) over
    ``|y| = s`` is its value at ``max(|x|, s)``, which reduces the convolution
    to one radial integral with a kink at ``s = |x|``.
    """

    def __init__(self, d: int, g: SmoothFamily, quad: QuadratureSpec, ladder):
        self.d, self.g, self.quad, self.ladder = d, g, quad, ladder

    def _radial(self, k, s):
        pts = np.zeros((s.size, self.d))
        pts[:, 0] = s
        return self.g(k, pts)

    def __call__(self, k, x):
        r = x[:, 0]
        q = self.quad
        R = self.g.support_radius(k)
        plan = _plan([self.g], k, q, self.ladder)
        zones = [(0.0, plan.zone)] if plan.zone > 0 else []
        br = axis_mesh(0.0, R, fine=plan.fine, coarse=plan.coarse, zones=zones, grading=q.grading,
                       breaks=[abs(b) for b in self.g.breakpoints])
        s, w = composite(br, q.rule, q.order)
        gs = self._radial(k, s)
        gt, gw = reference_rule(q.rule, q.order)
        t = np.minimum(r, R)
        if self.d == 2:
            inner = lambda y: self._radial(k, y) * y
            outer = lambda y: self._radial(k, y) * y * np.log(np.where(y > 0, y, 1.0))
            A = _cumulative(br, s, w, gs * s, t, gt, gw, inner)
            Bf = _cumulative(br, s, w, gs * s * np.log(np.where(s > 0, s, 1.0)), t, gt, gw, outer)
            B_total = float(np.sum(gs * s * np.log(np.where(s > 0, s, 1.0)) * w))
            logr = np.log(np.where(r > 0, r, 1.0))
            return np.where(r > 0, logr * A, 0.0) + (B_total - Bf)
        inner = lambda y: self._radial(k, y) * y * y
        outer = lambda y: self._radial(k, y) * y
        A = _cumulative(br, s, w, gs * s * s, t, gt, gw, inner)
        Bf = _cumulative(br, s, w, gs * s, t, gt, gw, outer)
        B_total = float(np.sum(gs * s * w))
        return -(np.where(r > 0, A / np.where(r > 0, r, 1.0), 0.0) + (B_total - Bf))


class _PiecewisePolyEval:
    """``K * c`` for a 1-D kernel equal to polynomials ``p_-`` (z < 0) and ``p_+`` (z > 0).

    Expanding ``p(x - y)`` in powers of ``y`` leaves cumulative moments
    ``M_j(x) = int_{-inf}^x y^j c(y) dy``, so each point costs one partial cell.
    """

    def __init__(self, minus, plus, c: SmoothFamily, quad: QuadratureSpec, ladder):
        self.minus, self.plus = tuple(minus), tuple(plus)
        self.c, self.quad, self.ladder = c, quad, ladder
        self._mesh: dict[int, tuple] = {}

    def _level(self, k):
        hit = self._mesh.get(k)
        if hit is None:
            q = self.quad
            R = self.c.support_radius(k)
            plan = _plan([self.c], k, q, self.ladder)
            zones = [(0.0, plan.zone)] if plan.zone > 0 else []
            br = axis_mesh(-R, R, fine=plan.fine, coarse=plan.coarse, zones=zones, grading=q.grading,
                           breaks=self.c.breakpoints)
            s, w = composite(br, q.rule, q.order)
            hit = (br, s, w * self.c(k, s[:, None]))
            self._mesh[k] = hit
        return hit

    def __call__(self, k, x):
        x = x[:, 0]
        br, s, cw = self._level(k)
        gt, gw = reference_rule(self.quad.rule, self.quad.order)
        deg = max(len(self.minus), len(self.plus)) - 1
        t = np.clip(x, br[0], br[-1])
        i = np.clip(np.searchsorted(br, t, side="right") - 1, 0, br.size - 2)
        width = t - br[i]
        ys = br[i][:, None] + width[:, None] * gt[None, :]
        cp = self.c(k, ys.reshape(-1, 1)).reshape(ys.shape) * gw[None, :] * width[:, None]
        per = gt.size
        cum_total, cum = [], []
        for j in range(deg + 1):
            cells = (cw * s**j).reshape(-1, per).sum(axis=1)
            cs = np.concatenate([[0.0], np.cumsum(cells)])
            cum.append(cs[i] + (cp * ys**j).sum(axis=1))
            cum_total.append(cs[-1])
        out = np.zeros(x.size)
        for coeffs, below in ((self.plus, True), (self.minus, False)):
            for n, a in enumerate(coeffs):
                if a == 0:
                    continue
                for j in range(n + 1):
                    m = cum[j] if below else cum_total[j] - cum[j]
                    out += a * math.comb(n, j) * x ** (n - j) * (-1.0) ** j * m
        return out


def _piecewise_poly_kernel(fam: SmoothFamily, minus, plus) -> SmoothFamily:
    def convolver(c: SmoothFamily, quad: QuadratureSpec):
        ladder, _ = common_ladder(c)
        return convolution_family(
            kernel, c, _PiecewisePolyEval(minus, plus, c, quad, ladder), ladder,
            radial=kernel.radial and c.radial, rebuild=lambda kk, cc: convolver(cc, quad),
            support=lambda k: math.inf,
        )

    kernel = replace(fam, convolver=convolver)
    return kernel


def _laplace_kernel(d: int) -> SmoothFamily:
    if d == 2:
        ev = lambda k, x: np.log(np.sqrt(np.sum(x * x, axis=1))) / (2 * math.pi)
        label = "log|x|/(2 pi)"
    else:
        ev = lambda k, x: -1.0 / (4 * math.pi * np.sqrt(np.sum(x * x, axis=1)))
        label = "-1/(4 pi |x|)"

    def convolver(g: SmoothFamily, quad: QuadratureSpec):
        if not g.radial:
            return None
        ladder, _ = common_ladder(g)
        evaluator = RadialCache(_ShellEval(d, g, quad, ladder), d)
        fam = convolution_family(
            kernel, g, evaluator, ladder, radial=True,
            rebuild=lambda kk, cc: convolver(cc, quad),
            support=lambda k: math.inf,
        )
        return fam

    kernel = SmoothFamily(
        d, ev, lambda k: math.inf, 0, label, radial=True, singular=True,
        convolver=lambda g, quad: _require(convolver(g, quad), label),
        growth=(1.0, 1.0) if d == 2 else (1.0, 0.0),
    )
    return kernel


def _require(fam, label):
    if fam is None:
        raise UnboundedIntegrand(f"the singular kernel {label} is only convolved with radial factors")
    return fam


class _HeatEval:
    """``(G * h)(t, x) = int_0^inf dtau int G(tau, z) h(t - tau, x - z) dz``.

    The tau mesh is graded geometrically toward tau = 0.  The inner integral
    runs over the slice of the support of ``h`` intersected with the window
    ``|y - x| <= 8 sigma``, ``sigma = sqrt(2 tau)``, so the mapped cells always
    resolve both the Gaussian and ``h``.
    """

    WINDOW = 8.0
    cells = 1.0  # base cells per unit of support radius

    def __init__(self, h: SmoothFamily, quad: QuadratureSpec, ladder):
        self.h, self.quad, self.ladder = h, quad, ladder

    def __call__(self, k, X):
        q = self.quad
        R = self.h.support_radius(k)
        plan = _plan([self.h], k, q, self.ladder)
        hw = plan.fine
        ft = self.h.feature_at(k)
        scale = ft.scale if ft is not None else 8 * hw
        # the integrand is a cancellation of bump derivatives: never below order 8
        order = max(q.order, 8)
        gt, gw = reference_rule("gauss-legendre-composite", order)
        n_uni = max(2, math.ceil(self.cells * R / hw))
        n_geo = max(1, math.ceil(math.log2(64.0 * hw / scale**2)))
        geo = hw * 2.0 ** -np.arange(1, n_geo + 1)
        # templates on [0, 1], graded toward both ends where bump derivatives concentrate
        yb = axis_mesh(0.0, 1.0, fine=1.0 / n_uni, coarse=1.0 / n_uni)
        yn, yw = composite(yb, "gauss-legendre-composite", order)
        ub = yb
        out = np.zeros(X.shape[0])
        per = (ub.size - 1 + n_geo) * gt.size * yn.size
        for sl in chunks(X.shape[0], per, budget=4_000_000):
            t, x = X[sl, 0], X[sl, 1]
            lo = np.clip(t - R, 0.0, None)
            hi = np.clip(t + R, 0.0, None)
            uni = lo[:, None] + (hi - lo)[:, None] * ub[None, :]
            g = np.clip(np.broadcast_to(geo, (t.size, geo.size)), lo[:, None], hi[:, None])
            br = np.sort(np.concatenate([uni, g], axis=1), axis=1)
            a, b = br[:, :-1], br[:, 1:]
            tau = (a[:, :, None] + (b - a)[:, :, None] * gt).reshape(t.size, -1)
            wt = ((b - a)[:, :, None] * gw).reshape(t.size, -1)
            s = t[:, None] - tau
            xx = np.broadcast_to(x[:, None], s.shape)
            sigma = np.sqrt(2.0 * tau)
            half = np.sqrt(np.clip(R * R - s * s, 0.0, None))
            y0 = np.maximum(-half, xx - self.WINDOW * sigma)
            y1 = np.minimum(half, xx + self.WINDOW * sigma)
            live = (wt > 0) & (y1 > y0)
            inner = np.zeros(s.shape)
            if live.any():
                sw, xw, tw = s[live], xx[live], tau[live]
                lo_y, width = y0[live], (y1 - y0)[live]
                y = lo_y[:, None] + width[:, None] * yn[None, :]
                z = xw[:, None] - y
                G = np.exp(-z * z / (4 * tw[:, None])) / np.sqrt(4 * math.pi * tw[:, None])
                hv = self.h(k, np.stack([np.repeat(sw, yn.size), y.ravel()], axis=1)).reshape(y.shape)
                inner[live] = (G * hv) @ yw * width
            out[sl] = np.sum(inner * wt, axis=1)
        return out


def _heat_kernel() -> SmoothFamily:
    def ev(k, x):
        t, z = x[:, 0], x[:, 1]
        out = np.zeros(t.size)
        pos = t > 0
        out[pos] = np.exp(-z[pos] ** 2 / (4 * t[pos])) / np.sqrt(4 * math.pi * t[pos])
        return out

    def convolver(h: SmoothFamily, quad: QuadratureSpec):
        ladder, _ = common_ladder(h)
        return convolution_family(
            kernel, h, _HeatEval(h, quad, ladder), ladder, radial=False,
            rebuild=lambda kk, cc: convolver(cc, quad), support=lambda k: math.inf,
        )

    kernel = SmoothFamily(
        2, ev, lambda k: math.inf, 0, "H(t) exp(-x^2/4t)/sqrt(4 pi t)",
        singular=True, convolver=convolver, growth=(1.0, 0.0),
    )
    return kernel


class _TransportEval:
    """``(E * h)(t, x) = int_0^inf h(t - s, x - c s) ds``: the line integral along the characteristic."""

    def __init__(self, h: SmoothFamily, c: float, quad: QuadratureSpec, ladder):
        self.h, self.c, self.quad, self.ladder = h, c, quad, ladder

    def __call__(self, k, X):
        q = self.quad
        R = self.h.support_radius(k)
        plan = _plan([self.h], k, q, self.ladder)
        n = max(2, math.ceil(2 * R / plan.fine))
        tb = axis_mesh(0.0, 1.0, fine=1.0 / n, coarse=1.0 / n)
        tn, tw = composite(tb, q.rule, q.order)
        c = self.c
        t, x = X[:, 0], X[:, 1]
        A = 1.0 + c * c
        B = t + c * x
        C = t * t + x * x - R * R
        disc = B * B - A * C
        root = np.sqrt(np.clip(disc, 0.0, None))
        s1 = np.clip((B - root) / A, 0.0, None)
        s2 = np.clip((B + root) / A, 0.0, None)
        length = np.where(disc > 0, s2 - s1, 0.0)
        out = np.zeros(t.size)
        for sl in chunks(t.size, tn.size):
            s = s1[sl, None] + length[sl, None] * tn[None, :]
            pts = np.stack([(t[sl, None] - s).ravel(), (x[sl, None] - c * s).ravel()], axis=1)
            out[sl] = (self.h(k, pts).reshape(s.shape) @ tw) * length[sl]
        return out


def _transport_kernel(c: float) -> SmoothFamily:
    def ev(k, x):
        raise GFCalcError("the transport kernel is a measure on the characteristic line; evaluate its convolutions")

    def convolver(h: SmoothFamily, quad: QuadratureSpec):
        ladder, _ = common_ladder(h)
        return convolution_family(
            kernel, h, _TransportEval(h, c, quad, ladder), ladder, radial=False,
            rebuild=lambda kk, cc: convolver(cc, quad), support=lambda k: math.inf,
        )

    kernel = SmoothFamily(
        2, ev, lambda k: math.inf, 0, f"H(t) delta(x - {c:g} t)",
        singular=True, convolver=convolver, growth=(1.0, 0.0),
    )
    return kernel


def classical_kernel(name: str, c: float = 1.0) -> tuple[SmoothFamily, str]:
    """The conventional fundamental solution and a description of where it is singular."""
    if name == "ddx_1d":
        H = standard_family(lambda x: np.where(x[:, 0] > 0, 1.0, np.where(x[:, 0] == 0, 0.5, 0.0)), 1,
                            smoothness=0, label="H(x)", breakpoints=(0.0,), growth=(1.0, 0.0))
        return _piecewise_poly_kernel(H, (0.0,), (1.0,)), "jump at x = 0"
    if name == "laplace_1d":
        A = standard_family(lambda x: np.abs(x[:, 0]) / 2, 1, smoothness=0, label="|x|/2",
                            breakpoints=(0.0,), growth=(0.5, 1.0), radial=True)
        return _piecewise_poly_kernel(A, (0.0, -0.5), (0.0, 0.5)), "kink at x = 0"
    if name == "laplace_2d":
        return _laplace_kernel(2), "logarithmic singularity at the origin"
    if name == "laplace_3d":
        return _laplace_kernel(3), "1/|x| singularity at the origin"
    if name == "heat_1p1":
        return _heat_kernel(), "singular at (t, x) = (0, 0); vanishes for t < 0"
    if name == "transport_1p1":
        return _transport_kernel(c), "measure supported on the half-line x = c t, t >= 0"
    raise KeyError(f"unknown operator {name!r}; catalog: {', '.join(CATALOG)}")


# --------------------------------------------------------------------------
# catalog entries


@dataclass(frozen=True, eq=False)
class FundamentalSolutionEntry:
    name: str
    operator: PDOperator
    classical_kernel: SmoothFamily
    singularity: str
    mollified_family: SmoothFamily
    applied: SmoothFamily  # P(d) E_rho
    delta: SmoothFamily
    validity: str
    verdict: ApproxVerdict | None = None


# space-time entries are checked with fewer directions; the residual being
# measured is O(rho), far above the quadrature error of this rule
SPACETIME_QUAD = QuadratureSpec(order=4, angular_order=16)


def fundamental_solution(
    name: str,
    ladder: ScaleLadder | None = None,
    psi: Mollifier | None = None,
    quad: QuadratureSpec | None = None,
    *,
    verify: bool = True,
    battery: TestBattery | None = None,
    c: float = 1.0,
) -> FundamentalSolutionEntry:
    """Mollified fundamental solution ``E_rho = E_cl * delta_rho`` with its verification verdict."""
    P = pdo_catalog(name, c)
    d = _DIMENSION[name]
    ladder = ladder or default_ladder()
    psi = psi or make_mollifier("bump", d)
    if psi.dimension != d:
        raise ValueError(f"{name} needs a {d}-dimensional mollifier")
    spacetime = name in ("heat_1p1", "transport_1p1")
    if quad is None:
        quad = SPACETIME_QUAD if spacetime else DEFAULT_QUAD
    delta = model_delta(psi, ladder)
    kernel, singular = classical_kernel(name, c)
    E = convolve(kernel, delta, quad).with_label(f"E_rho[{name}]")
    PE = apply_pdo(P, E).with_label(f"P E_rho[{name}]")
    validity = "E_cl is one conventional representative; others differ by homogeneous solutions"
    if spacetime:
        # P E_rho is supported in the support of delta_rho; declared and spot-checked.
        # Outside it the value is a cancellation of terms of size ~peak, hence the relative atol
        R = psi.support_radius
        PE = replace(PE, support_radius=lambda k: ladder[k] * R)
        peak = float(np.max(np.abs(delta(0, np.zeros((1, d))))))
        PE.spot_check_support(0, n=16, seed=0, atol=1e-4 * peak)
        validity += "; support of P E_rho declared as that of delta_rho and spot-checked"
    verdict = None
    if verify:
        battery = battery or default_battery(d, "C0")
        verdict = verify_delta(PE, battery, quad, claim="order0")
        if not verdict.fitted_order > 0:
            raise VerificationFailure(
                f"P E_rho for {name} is not a delta of order 0: residuals {verdict.residuals.tolist()} "
                f"(fitted order {verdict.fitted_order:.3g}, witness {verdict.witness})"
            )
    return FundamentalSolutionEntry(name, P, kernel, singular, E, PE, delta, validity, verdict)


# --------------------------------------------------------------------------
# solving and residual checks


@dataclass(frozen=True, eq=False)
class SolveReport:
    u: SmoothFamily
    weak_residuals: ApproxVerdict
    strong_residuals: ApproxVerdict
    standard_part: StandardFunctionSample | None
    st_strong_residual: float | None
    timings: dict
    entry: FundamentalSolutionEntry
    membership: MembershipVerdict | None = None

    @property
    def passed(self) -> bool:
        return self.weak_residuals.passed and self.strong_residuals.passed


def weak_residual(
    P: PDOperator,
    u: SmoothFamily,
    f: SmoothFamily,
    battery: TestBattery,
    quad: QuadratureSpec = DEFAULT_QUAD,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    min_order: float = DEFAULT_MIN_ORDER,
) -> ApproxVerdict:
    """``max_phi |int u P(-d) phi - int f phi|``; derivatives fall on the test functions only."""
    Pstar = formal_adjoint(P)
    tests = [apply_pdo(Pstar, phi) for phi in battery.families]
    A = pair_many(u, tests, quad)
    B = pair_many(f, battery.families, quad)
    ladder, n = common_ladder(u, f)
    diff = np.abs(A.values - B.values)
    if diff.shape[1] == 1 and ladder is not None:
        diff = np.repeat(diff, n, axis=1)
    res = diff.max(axis=0)
    j = int(np.argmax(diff[:, -1]))
    rhos = ladder.rhos if ladder is not None else np.array([1.0, 0.5, 0.25])[: res.size]
    return ApproxVerdict.from_residuals(
        res, rhos, tolerance=tolerance, min_order=min_order, witness=battery.labels[j],
        quadrature_errors=(A.errors + B.errors + A.tails + B.tails).max(axis=0) * np.ones(res.size),
        claim="weak residual", details={"per_member": dict(zip(battery.labels, diff.tolist()))},
    )


def strong_check(
    P: PDOperator,
    u: SmoothFamily,
    f: SmoothFamily,
    grid,
    *,
    probe: bool = True,
    tolerance: float = DEFAULT_TOLERANCE,
    min_order: float = DEFAULT_MIN_ORDER,
) -> ApproxVerdict:
    """``max_grid |P(d) u_l - f_l|`` per level.

    With ``probe`` the derivatives of ``u`` up to the operator order must be
    bounded across levels on the grid, otherwise :class:`DivergentFamily`.
    """
    pts = _as_points(grid, u.dimension)
    if probe:
        finiteness_probe(u, pts, P.order)
    Pu = apply_pdo(P, u)
    ladder, n = common_ladder(u, f)
    res = np.zeros(n)
    where = ""
    for lev in range(n):
        diff = np.abs(Pu(lev, pts) - f(lev, pts))
        res[lev] = float(np.max(diff))
        where = f"x={pts[int(np.argmax(diff))].tolist()}"
    return ApproxVerdict.from_residuals(
        res, ladder.rhos, tolerance=tolerance, min_order=min_order, witness=where, claim="strong residual"
    )


def _st_strong_residual(P: PDOperator, st: StandardFunctionSample, f: SmoothFamily, axis: np.ndarray, level: int):
    """``max |P(d)(st u) - st f|`` with P applied to the sampled values by finite differences (1-D)."""
    h = float(axis[1] - axis[0])
    vals = st.values
    n = vals.size
    total = np.zeros(n)
    margin = 0
    for alpha, c in P.items():
        m = alpha.entries[0]
        if m == 0:
            total += c * vals
            continue
        offs, w = fd_weights(m)
        p = int(offs.max())
        margin = max(margin, p)
        acc = np.zeros(n)
        for o, wi in zip(offs.astype(int), w):
            acc[p:n - p] += wi * vals[p + o:n - p + o]
        total += c * acc / h**m
    inner = slice(margin, n - margin)
    fv = f(level, axis[:, None])
    return float(np.max(np.abs(total[inner] - fv[inner])))


def solve_convolution(
    name: str,
    f: SmoothFamily,
    ladder: ScaleLadder | None = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    *,
    psi: Mollifier | None = None,
    entry: FundamentalSolutionEntry | None = None,
    battery: TestBattery | None = None,
    grid=None,
    radius: float = 2.0,
    tolerance: float = DEFAULT_TOLERANCE,
    min_order: float = DEFAULT_MIN_ORDER,
    c: float = 1.0,
) -> SolveReport:
    """``u = E_rho * f`` with weak, strong and standard-part diagnostics."""
    timings = {}
    t0 = time.perf_counter()
    d = _DIMENSION[name]
    if f.dimension != d:
        raise ValueError(f"{name} acts on {d}-dimensional data, got a {f.dimension}-dimensional source")
    ladder = ladder or f.ladder or default_ladder()
    if not f.is_s_compact(range(len(ladder)) if f.ladder is not None else None):
        raise SupportViolation(f"source {f.label or 'f'} must have finite support at every level")
    if entry is None:
        entry = fundamental_solution(name, ladder, psi, None, c=c)
    timings["fundamental_solution"] = time.perf_counter() - t0
    P = entry.operator
    battery = battery or default_battery(d, "Cinf")
    t1 = time.perf_counter()
    membership = dprime_membership(f, battery, quad) if f.ladder is not None else None
    if membership is not None and not membership.passed:
        raise DivergentFamily(f"source is not in D': {membership.worst_member} pairing grows")
    u = convolve(entry.mollified_family, f, quad).with_label(f"u[{name}]")
    if grid is None:
        grid = np.linspace(-radius, radius, 401) if d == 1 else ball_grid(d, radius)
    pts = _as_points(grid, d)
    strong = strong_check(P, u, f, pts, tolerance=tolerance, min_order=min_order)
    timings["strong"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    weak = weak_residual(P, u, f, battery, quad, tolerance=tolerance, min_order=min_order)
    timings["weak"] = time.perf_counter() - t2
    t3 = time.perf_counter()
    st, st_res = None, None
    if d == 1:
        try:
            st = standard_part(u, pts[:, 0], 0)
            st_res = _st_strong_residual(P, st, f, pts[:, 0], len(ladder) - 1)
        except DivergentFamily:
            st = None
    timings["standard_part"] = time.perf_counter() - t3
    timings["total"] = time.perf_counter() - t0
    return SolveReport(u, weak, strong, st, st_res, timings, entry, membership)


# --------------------------------------------------------------------------
# Fourier inversion through the Dirichlet kernel


def quartic_profile() -> AnalyticProfile:
    """``(1 - x^2)^2`` on [-1, 1]: compactly supported and C^1."""
    (x,) = coordinates(1)
    return AnalyticProfile((1 - x**2) ** 2, 1, radius=1.0, smoothness=1, breakpoints=(-1.0, 1.0), name="quartic")


@dataclass(frozen=True)
class FourierTable:
    lambdas: np.ndarray
    points: np.ndarray
    spectral: np.ndarray  # (levels, points) real part of the truncated inversion integral
    sinc: np.ndarray  # (levels, points) convolution with the Dirichlet kernel
    exact: np.ndarray
    errors: np.ndarray  # max_x |spectral - f|
    path_gap: np.ndarray  # max_x |spectral - sinc|
    imag_max: np.ndarray  # max_x |imaginary part of the spectral path|
    fitted_order: float

    def to_record(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "errors": self.errors.tolist(),
            "path_gap": self.path_gap.tolist(),
            "imag_max": self.imag_max.tolist(),
            "fitted_order": self.fitted_order,
        }


def _spectral_inversion(f: SmoothFamily, lam: float, pts: np.ndarray, radius: float, quad: QuadratureSpec, breaks):
    """``(2 pi)^-1/2 int_{-lam}^{lam} Ff(w) e^{iwx} dw`` with ``Ff`` computed by quadrature."""
    q = quad.order
    tb = axis_mesh(-radius, radius, fine=min(quad.coarse_cell, 4.0 / lam), coarse=min(quad.coarse_cell, 4.0 / lam),
                   breaks=breaks, edge_levels=0)
    tn, tw = composite(tb, quad.rule, q)
    ft = f(0, tn[:, None]) * tw
    span = radius + float(np.max(np.abs(pts)))
    wb = np.linspace(-lam, lam, 2 * max(1, math.ceil(lam * span / 2.0)) + 1)
    wn, ww = composite(wb, quad.rule, q)
    norm = 1.0 / math.sqrt(2 * math.pi)
    out = np.zeros(pts.size, dtype=complex)
    for sl in chunks(wn.size, tn.size):
        w = wn[sl]
        F = norm * (np.exp(-1j * np.outer(w, tn)) @ ft)
        out += norm * (np.exp(1j * np.outer(pts, w)) @ (F * ww[sl]))
    return out


def fourier_inversion_demo(
    f: AnalyticProfile | SmoothFamily | None = None,
    ladder: ScaleLadder | None = None,
    points: Sequence[float] = (0.0,),
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> FourierTable:
    """Truncated Fourier inversion at ``lambda_k = 1/rho_k`` by two independent paths."""
    ladder = ladder or default_ladder()
    prof = quartic_profile() if f is None else f
    if isinstance(prof, AnalyticProfile):
        fam = standard_family(prof, 1, support_radius=prof.support_radius, smoothness=prof.smoothness,
                              breakpoints=prof.breakpoints or (-prof.radius, prof.radius), scale=1.0)
    else:
        fam = prof
    radius = fam.support_radius(0)
    if not math.isfinite(radius):
        raise SupportViolation("the Fourier demo needs a compactly supported input")
    pts = np.asarray(points, float).ravel()
    sinc = convolve(fam, scaled_delta(make_mollifier("sinc", 1), ladder), quad)
    exact = fam(0, pts[:, None])
    L = len(ladder)
    spec = np.zeros((L, pts.size))
    imag = np.zeros(L)
    conv = np.zeros((L, pts.size))
    for k in range(L):
        lam = 1.0 / ladder[k]
        z = _spectral_inversion(fam, lam, pts, radius, quad, fam.breakpoints)
        spec[k] = z.real
        imag[k] = float(np.max(np.abs(z.imag)))
        conv[k] = sinc(k, pts[:, None])
    errors = np.max(np.abs(spec - exact[None, :]), axis=1)
    gap = np.max(np.abs(spec - conv), axis=1)
    return FourierTable(ladder.lambdas, pts, spec, conv, exact, errors, gap, imag, fit_order(ladder.rhos, errors))
