"""Generalized functions as scale-indexed families of smooth functions.

Delta functions, fundamental solutions and distributional solutions of
linear PDEs are represented by families indexed by a finite ladder of
scales ``rho_k``; each approximate-equality claim is checked by measuring a
residual at every level and fitting its convergence order.
"""

from .battery import BATTERY_VERSION, BatteryMember, TestBattery, default_battery
from .calculus import (
    DEFAULT_QUAD,
    MultiIndex,
    PDOperator,
    QuadratureSpec,
    apply_pdo,
    combine,
    convolve,
    derivative,
    formal_adjoint,
    pair,
    pair_many,
)
from .equivalence import (
    ApproxVerdict,
    approx_ck,
    approx_dprime,
    dprime_membership,
    fit_order,
    s_modulus,
    standard_part,
    verify_delta,
)
from .errors import *  # noqa: F401,F403
from .scalefield import (
    Mollifier,
    ScaleLadder,
    SmoothFamily,
    default_ladder,
    make_ladder,
    make_mollifier,
    model_delta,
    scaled_delta,
    standard_family,
)
from .solutions import (
    CATALOG,
    FundamentalSolutionEntry,
    SolveReport,
    classical_kernel,
    fourier_inversion_demo,
    fundamental_solution,
    pdo_catalog,
    solve_convolution,
    strong_check,
    weak_residual,
)

__version__ = "0.1.0"
