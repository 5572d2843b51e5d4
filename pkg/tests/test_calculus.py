import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from families import RHO, X, bump_profile, ladder_family
from gfcalc import (
    MultiIndex,
    PDOperator,
    QuadratureSpec,
    apply_pdo,
    approx_ck,
    combine,
    convolve,
    default_battery,
    default_ladder,
    derivative,
    formal_adjoint,
    fundamental_solution,
    make_ladder,
    make_mollifier,
    model_delta,
    pair,
    pair_many,
    scaled_delta,
    standard_family,
)
from gfcalc.calculus import constant_family, convolve_grid, scale_family
from gfcalc.errors import (
    DimensionMismatch,
    NeitherCompact,
    ResolutionTooCoarse,
    SmoothnessExceeded,
    StepUnderflow,
    UnboundedIntegrand,
)
from gfcalc.profiles import AnalyticProfile, coordinates

# mpmath (30 digits): int psi(u) cos(rho u) du for the unit-mass 1-D bump
COS_PAIRING = {0: 0.999691217987195807072, 6: 0.999999924605545018586}
# mpmath: (1/pi) int_{-1}^{1} sin(lam x)/x (1 - x^2)^2 dx at lam = 256
SINC_QUARTIC_256 = 0.999999987921782920560


def gaussian_family(d: int = 1) -> "SmoothFamily":
    xs = coordinates(d)
    prof = AnalyticProfile(sp.exp(-sum(x**2 for x in xs) / 2), d, name="gauss")
    return standard_family(prof, d, scale=1.0, radial=True, growth=(1.0, 0.0))


def quartic_family():
    x = coordinates(1)[0]
    prof = AnalyticProfile((1 - x**2) ** 2, 1, radius=1.0, smoothness=1, breakpoints=(-1.0, 1.0), name="quartic")
    return standard_family(prof, 1, breakpoints=(-1.0, 1.0))


# ---------------------------------------------------------------- types


def test_multi_index():
    a = MultiIndex((1, 0, 2))
    assert a.order == 3 and a.dimension == 3
    assert (a + MultiIndex((0, 1, 0))).entries == (1, 1, 2)
    with pytest.raises(ValueError):
        MultiIndex((1, -1))
    with pytest.raises(DimensionMismatch):
        MultiIndex.coerce((1, 0), 3)


def test_operator_invariants():
    P = PDOperator(2, {(1, 0): 1.0, (0, 2): -1.0, (1, 1): 0.0})
    assert P.order == 2
    assert len(P.terms) == 2  # zero coefficient dropped
    with pytest.raises(ValueError):
        PDOperator(1, {(1,): 0.0})
    with pytest.raises(DimensionMismatch):
        PDOperator(1, {(1,): 1.0}) + PDOperator(2, {(1, 0): 1.0})


def test_formal_adjoint_examples():
    assert formal_adjoint(PDOperator.partial(1, 0)) == PDOperator(1, {(1,): -1.0})
    assert formal_adjoint(PDOperator.laplacian(3)) == PDOperator.laplacian(3)
    heat = PDOperator(2, {(1, 0): 1.0, (0, 2): -1.0})
    assert formal_adjoint(formal_adjoint(heat)) == heat


@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                       st.floats(-5, 5, allow_nan=False).filter(lambda c: c != 0), min_size=1, max_size=6))
def test_formal_adjoint_is_involutive(terms):
    P = PDOperator(2, terms)
    A = formal_adjoint(P)
    assert formal_adjoint(A) == P
    for a, c in P.items():
        assert A.coefficient(a) == (-1) ** a.order * c


# ---------------------------------------------------------------- pairing


def test_model_delta_cos_pairing_matches_oracle():
    lad = default_ladder()
    delta = model_delta(make_mollifier("bump", 1), lad)
    p = pair(delta, standard_family(np.cos, 1, scale=1.0))
    for k, v in COS_PAIRING.items():
        assert p.values[k] == pytest.approx(v, abs=1e-12)
    assert np.all(p.errors < 1e-10)


def test_sinc_pairing_with_quartic_matches_oracle():
    lad = make_ladder(8, 10)
    s = scaled_delta(make_mollifier("sinc", 1), lad)
    p = pair(s, quartic_family())
    assert p.values[0] == pytest.approx(SINC_QUARTIC_256, abs=1e-9)


def test_pair_requires_finite_support_or_truncation():
    g = gaussian_family()
    with pytest.raises(UnboundedIntegrand):
        pair(g, g)
    with pytest.raises(DimensionMismatch):
        pair(gaussian_family(1), gaussian_family(2))


def test_resolution_too_coarse():
    lad = default_ladder()
    delta = model_delta(make_mollifier("bump", 1), lad)
    one = constant_family(1.0, 1)
    with pytest.raises(ResolutionTooCoarse):
        pair(delta, one, QuadratureSpec(cells_per_unit=lambda k: 64))


def test_pair_linearity():
    lad = default_ladder()
    delta = model_delta(make_mollifier("bump", 1), lad)
    b = default_battery(1, "C0")
    f, g = b.members[1].family, b.members[12].family
    lhs = pair(combine([(2.5, f), (-0.75, g)]), delta).values
    rhs = 2.5 * pair(f, delta).values - 0.75 * pair(g, delta).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_quadrature_refinement_within_error_estimate():
    lad = default_ladder()
    delta = model_delta(make_mollifier("bump", 1), lad)
    phis = default_battery(1, "C1").families
    base = pair_many(delta, phis)
    fine = pair_many(delta, phis, QuadratureSpec(cells_per_unit=lambda k: 2 * math.ceil(8 / lad[k])))
    assert np.all(np.abs(base.values - fine.values) <= base.errors + 1e-14)


def test_integration_by_parts_in_three_dimensions():
    # the pairing with d^2 delta_rho in 3-D sits at the rounding floor beyond rho = 2^-9
    lad = make_ladder(4, 9)
    quad = QuadratureSpec(order=20)
    delta = model_delta(make_mollifier("bump", 3), lad)
    ops = [PDOperator.laplacian(3), PDOperator.partial(3, 2, 2), PDOperator(3, {(1, 1, 0): 1.0}),
           PDOperator(3, {(0, 0, 0): 1.0, (1, 0, 0): 2.0, (2, 0, 0): -0.5})]
    for P in ops:
        for m in default_battery(3, "Cinf").members[:5]:
            lhs = pair(apply_pdo(P, delta), m.family, quad).values
            rhs = pair(delta, apply_pdo(formal_adjoint(P), m.family), quad).values
            assert np.max(np.abs(lhs - rhs)) <= 1e-8, (P, m.label)


@settings(max_examples=25, deadline=None)
@given(st.dictionaries(st.integers(0, 2), st.floats(-3, 3).filter(lambda c: abs(c) > 1e-3), min_size=1),
       st.integers(0, 7))
def test_integration_by_parts_property(terms, member):
    """<P f, phi> = <f, P* phi> for a smooth compact f and smooth battery members."""
    lad = make_ladder(4, 6)
    P = PDOperator(1, {(a,): c for a, c in terms.items()})
    f = ladder_family(bump_profile(1 + RHO * X), lad, support=1.0, cutoff=1 - 1 / 700, breakpoints=(-1.0, 1.0))
    phi = default_battery(1, "Cinf").members[member].family
    lhs = pair(apply_pdo(P, f), phi).values
    rhs = pair(f, apply_pdo(formal_adjoint(P), phi)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_derivatives_keep_mesh_breaks():
    """An off-centre member's support edges must survive differentiation."""
    lad = make_ladder(4, 6)
    phi = default_battery(1, "Cinf").members[1].family  # support [-0.7, 1.3]
    assert apply_pdo(PDOperator(1, {(1,): 1.0}), phi).breakpoints == phi.breakpoints
    f = ladder_family(bump_profile(1 + RHO * X), lad, support=1.0, cutoff=1 - 1 / 700, breakpoints=(-1.0, 1.0))
    P = PDOperator(1, {(1,): 1.0})
    lhs = pair(apply_pdo(P, f), phi).values
    rhs = pair(f, apply_pdo(formal_adjoint(P), phi)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


# ---------------------------------------------------------------- convolution


def test_constant_convolved_with_delta():
    lad = default_ladder()
    delta = model_delta(make_mollifier("bump", 1), lad)
    c = convolve(constant_family(3.0, 1), delta)
    x = np.linspace(-2, 2, 9)
    for k in (0, 6):
        np.testing.assert_allclose(c(k, x), 3.0, atol=1e-9)


def test_bump_convolved_with_delta_converges_at_second_order():
    lad = default_ladder()
    delta = model_delta(make_mollifier("bump", 1), lad)
    v = default_battery(1, "Cinf").members[2].family  # bump-wide
    v_rho = convolve(v, delta)
    verdict = approx_ck(v_rho, v, 0, 2.5)
    assert verdict.passed and verdict.fitted_order >= 1.9


def test_convolution_commutes():
    lad = default_ladder()
    b = default_battery(1, "C0")
    delta = model_delta(make_mollifier("bump", 1), lad)
    f = b.members[1].family  # bump-shifted
    g = convolve(b.members[13].family, delta)  # a smoothed kink member
    x = np.array([0.0, 0.4, -0.7])
    for k in (0, 3):
        np.testing.assert_allclose(convolve(f, g)(k, x), convolve(g, f)(k, x), atol=1e-9)


def test_convolution_needs_a_compact_factor():
    with pytest.raises(NeitherCompact):
        convolve(gaussian_family(), gaussian_family())


def test_convolution_support_adds():
    lad = default_ladder()
    delta = model_delta(make_mollifier("bump", 1), lad)
    v = default_battery(1, "Cinf").members[0].family
    c = convolve(v, delta)
    assert c.support_radius(0) == pytest.approx(1.0 + lad[0])


def test_convolution_derivative_interchange():
    lad = make_ladder(4, 6)
    delta = model_delta(make_mollifier("bump", 1), lad)
    f = default_battery(1, "Cinf").members[5].family  # bump-cos3
    lhs = derivative(convolve(f, delta), (1,))
    rhs = convolve(derivative(f, (1,)), delta)
    x = np.linspace(-1.2, 1.2, 25)
    for k in range(3):
        np.testing.assert_allclose(lhs(k, x), rhs(k, x), atol=1e-8)


def test_fft_grid_path_matches_direct():
    lad = make_ladder(2, 4)
    delta = model_delta(make_mollifier("bump", 1), lad)
    f = default_battery(1, "Cinf").members[4].family  # bump-poly
    axis, vals = convolve_grid(f, delta, 1, 2.0, 4001)
    direct = convolve(f, delta)(1, axis)
    assert np.max(np.abs(vals - direct)) < 1e-6


def test_convolution_in_two_dimensions():
    lad = make_ladder(3, 5)
    delta = model_delta(make_mollifier("bump", 2), lad)
    v = default_battery(2, "Cinf").members[1].family  # bump-shifted, not radial
    pts = np.array([[0.3, 0.0], [0.0, 0.5], [-0.4, 0.2]])
    vr = convolve(v, delta)
    errs = [np.max(np.abs(vr(k, pts) - v(0, pts))) for k in range(3)]
    assert errs[-1] < errs[0] and errs[-1] < 1e-3


# ---------------------------------------------------------------- derivatives


def test_derivative_of_even_delta_vanishes_at_origin():
    delta = model_delta(make_mollifier("bump", 1), default_ladder())
    d1 = derivative(delta, (1,))
    for k in range(7):
        assert d1(k, 0.0)[0] == 0.0


def test_derivative_identity_index():
    f = gaussian_family()
    assert derivative(f, (0,)) is f


def test_gaussian_second_derivative_matches_analytic():
    x = np.linspace(-3, 3, 601)
    d2 = derivative(gaussian_family(), (2,))
    np.testing.assert_allclose(d2(0, x), (x**2 - 1) * np.exp(-x**2 / 2), atol=1e-8)


def test_finite_difference_fallback():
    lad = default_ladder()
    f = standard_family(lambda x: np.exp(-x[:, 0] ** 2 / 2), 1, scale=1.0)
    from dataclasses import replace

    f = replace(f, ladder=lad)
    x = np.linspace(-3, 3, 61)
    d2 = derivative(f, (2,))
    np.testing.assert_allclose(d2(0, x), (x**2 - 1) * np.exp(-x**2 / 2), atol=1e-8)


def test_derivative_errors():
    q = quartic_family()
    with pytest.raises(SmoothnessExceeded):
        derivative(q, (2,))
    from dataclasses import replace

    f = replace(standard_family(np.sin, 1, scale=1.0), ladder=make_ladder(30, 32))
    with pytest.raises(StepUnderflow):
        derivative(f, (1,))(2, np.array([1e6]))


def test_delta_derivative_scaling():
    lad = default_ladder()
    delta = model_delta(make_mollifier("bump", 1), lad)
    d2 = derivative(delta, (2,))
    vals = np.array([d2(k, 0.0)[0] for k in range(7)])
    np.testing.assert_allclose(vals * lad.rhos**3, vals[0] * lad[0] ** 3, rtol=1e-12)


# ---------------------------------------------------------------- operators


def test_ddx_of_smoothed_heaviside_is_the_delta():
    entry = fundamental_solution("ddx_1d", verify=False)
    Pu = apply_pdo(PDOperator.partial(1, 0), entry.mollified_family)
    x = np.linspace(-0.1, 0.1, 401)
    for k in range(7):
        np.testing.assert_allclose(Pu(k, x), entry.delta(k, x), atol=1e-8 * entry.delta(k, 0.0)[0])


def test_identity_operator():
    f = gaussian_family()
    x = np.linspace(-2, 2, 11)
    np.testing.assert_array_equal(apply_pdo(PDOperator.identity(1), f)(0, x), f(0, x))


def test_laplacian_of_radial_gaussian():
    for d in (2, 3):
        rng = np.random.default_rng(d)
        pts = rng.uniform(-2, 2, size=(50, d))
        r2 = np.sum(pts**2, axis=1)
        L = apply_pdo(PDOperator.laplacian(d), gaussian_family(d))
        np.testing.assert_allclose(L(0, pts), (r2 - d) * np.exp(-r2 / 2), atol=1e-12)


def test_apply_pdo_errors():
    with pytest.raises(DimensionMismatch):
        apply_pdo(PDOperator.laplacian(2), gaussian_family(1))
    with pytest.raises(SmoothnessExceeded):
        apply_pdo(PDOperator.partial(1, 0, 2), quartic_family())


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.lists(st.floats(-2, 2), min_size=1, max_size=6))
def test_apply_pdo_is_linear(a, b, xs):
    f = gaussian_family()
    g = standard_family(AnalyticProfile(sp.cos(coordinates(1)[0]), 1), 1, scale=1.0)
    P = PDOperator(1, {(0,): 1.0, (1,): -2.0, (2,): 0.5})
    x = np.array(xs)
    lhs = apply_pdo(P, combine([(a, f), (b, g)]))(0, x)
    rhs = a * apply_pdo(P, f)(0, x) + b * apply_pdo(P, g)(0, x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    Q = PDOperator(1, {(1,): 1.0})
    np.testing.assert_allclose(apply_pdo(P + Q, f)(0, x), apply_pdo(P, f)(0, x) + apply_pdo(Q, f)(0, x), atol=1e-12)
    np.testing.assert_allclose(scale_family(f, a)(0, x), a * f(0, x), atol=1e-15)
