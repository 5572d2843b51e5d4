"""Fixed, versioned batteries of compactly supported test functions.

The full battery has 15 members in three nested regularity classes::

    Cinf (8 members)  subset of  C1 (12)  subset of  C0 (15)

Delta claims of order 0 are tested against ``C0`` (which contains kink
profiles), the Dirichlet-kernel claim against ``C1`` and general claims
against ``Cinf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np
import sympy as sp

from .errors import BatteryClassMismatch
from .profiles import BUMP_CUTOFF, AnalyticProfile, coordinates, radius_squared
from .scalefield import SmoothFamily, standard_family

BATTERY_VERSION = "battery-v1"
CLASSES = ("C0", "C1", "Cinf")
_CLASS_RANK = {"C0": 0, "C1": 1, "Cinf": 2}


@dataclass(frozen=True, eq=False)
class BatteryMember:
    label: str
    regularity: str
    family: SmoothFamily
    profile: AnalyticProfile = field(repr=False)
    support_radius: float
    certified_order: int
    sup_norms: dict = field(repr=False)
    value_at_origin: float

    def __call__(self, x):
        return self.family(0, x)

    def to_record(self) -> dict:
        return {
            "label": self.label,
            "regularity": self.regularity,
            "support_radius": self.support_radius,
            "certified_derivative_order": self.certified_order,
            "sup_norms": {str(k): v for k, v in sorted(self.sup_norms.items())},
            "value_at_origin": self.value_at_origin,
        }


@dataclass(frozen=True, eq=False)
class TestBattery:
    dimension: int
    regularity: str
    members: tuple[BatteryMember, ...]
    version: str = BATTERY_VERSION

    __test__ = False  # not a pytest class

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def families(self) -> list[SmoothFamily]:
        return [m.family for m in self.members]

    @property
    def values_at_origin(self) -> np.ndarray:
        return np.array([m.value_at_origin for m in self.members])

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.members]

    def restrict(self, regularity: str) -> "TestBattery":
        """Sub-battery of members at least as regular as ``regularity``."""
        if regularity not in CLASSES:
            raise BatteryClassMismatch(f"unknown regularity class {regularity!r}")
        if _CLASS_RANK[regularity] < _CLASS_RANK[self.regularity]:
            raise BatteryClassMismatch(f"cannot widen a {self.regularity} battery to {regularity}")
        keep = tuple(m for m in self.members if _CLASS_RANK[m.regularity] >= _CLASS_RANK[regularity])
        return TestBattery(self.dimension, regularity, keep, self.version)

    def to_record(self) -> dict:
        return {
            "version": self.version,
            "dimension": self.dimension,
            "regularity": self.regularity,
            "members": [m.to_record() for m in self.members],
        }


def _unit_vec(d: int, a: float) -> tuple[float, ...]:
    return (a,) + (0.0,) * (d - 1)


def _member_specs(d: int):
    """(label, class, expr, center, radius, smoothness, scale, kinks, radial) per member."""
    xs = coordinates(d)
    x0 = xs[0]
    r2 = radius_squared(d)
    r = sp.sqrt(r2)

    def bump(center=None, radius=1.0):
        s = radius_squared(d, center) / sp.Float(radius) ** 2
        return sp.exp(1 - 1 / (1 - s))

    shift = _unit_vec(d, 0.3)
    far = _unit_vec(d, 1.5)
    c1shift = _unit_vec(d, 0.25)
    inf = math.inf
    return [
        ("bump", "Cinf", bump(), None, 1.0, inf, 1.0, (), True),
        ("bump-shifted", "Cinf", bump(shift), shift, 1.0, inf, 1.0, (), False),
        ("bump-wide", "Cinf", bump(radius=2.0), None, 2.0, inf, 2.0, (), True),
        ("bump-narrow", "Cinf", bump(radius=0.25), None, 0.25, inf, 0.25, (), True),
        ("bump-poly", "Cinf", bump() * (1 + x0 - 2 * x0**2), None, 1.0, inf, 0.5, (), False),
        ("bump-cos3", "Cinf", bump() * sp.cos(3 * x0), None, 1.0, inf, 1.0 / 3.0, (), False),
        ("bump-sin5", "Cinf", bump() * sp.sin(5 * x0), None, 1.0, inf, 0.2, (), False),
        ("bump-offset", "Cinf", bump(far), far, 1.0, inf, 1.0, (), False),
        ("quartic", "C1", (1 - r2) ** 2, None, 1.0, 1, 1.0, (), True),
        ("quartic-tilted", "C1", (1 - r2) ** 2 * (1 + x0 / 2), None, 1.0, 1, 1.0, (), False),
        ("quartic-shifted", "C1", (1 - radius_squared(d, c1shift)) ** 2, c1shift, 1.0, 1, 1.0, (), False),
        ("quartic-cos2", "C1", (1 - r2) ** 2 * sp.cos(2 * x0), None, 1.0, 1, 0.5, (), False),
        # kink members all have unit slope at the kink
        ("tent", "C0", 1 - r, None, 1.0, 0, 1.0, (0.0,), True),
        ("tent-tilted", "C0", (1 - r) * (1 + x0 / 2), None, 1.0, 0, 1.0, (0.0,), False),
        ("kink-quartic", "C0", r * (1 - r2) ** 2, None, 1.0, 0, 1.0, (0.0,), True),
    ]


def _sample_points(d: int, radius: float, center) -> np.ndarray:
    c = np.zeros(d) if center is None else np.asarray(center, float)
    n = {1: 4001, 2: 161, 3: 41}[d]
    ax = np.linspace(-radius, radius, n)
    pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return pts + c


def _multi_indices(d: int, order: int):
    for alpha in product(range(order + 1), repeat=d):
        if sum(alpha) <= order:
            yield alpha


def sup_norms(profile: AnalyticProfile, d: int, radius: float, center, order: int, pts=None) -> dict:
    """Sampled ``sup |d^alpha phi|`` for every ``|alpha| <= order``."""
    if pts is None:
        pts = _sample_points(d, radius, center)
    return {alpha: float(np.max(np.abs(profile(pts, alpha)))) for alpha in _multi_indices(d, order)}


@lru_cache(maxsize=None)
def _full_battery(d: int) -> TestBattery:
    members = []
    for label, cls, expr, center, radius, smooth, scale, kinks, radial in _member_specs(d):
        cutoff = BUMP_CUTOFF if label.startswith("bump") else 1.0
        prof = AnalyticProfile(expr, d, radius=radius, center=center, cutoff=cutoff, smoothness=smooth, name=label)
        c0 = 0.0 if center is None else center[0]
        if d == 1:
            bps = tuple(sorted({c0 - radius, c0 + radius, *kinks}))
        else:
            bps = tuple(kinks) + ((radius,) if center is None else ())
        fam = standard_family(
            prof,
            d,
            support_radius=prof.support_radius,
            scale=scale,
            smoothness=smooth,
            label=label,
            radial=radial,
            breakpoints=bps,
        )
        certified = int(min(smooth, 2))
        origin = float(prof(np.zeros((1, d)))[0])
        members.append(
            BatteryMember(label, cls, fam, prof, prof.support_radius, certified,
                          sup_norms(prof, d, radius, center, certified), origin)
        )
    return TestBattery(d, "C0", tuple(members))


def default_battery(d: int = 1, regularity: str = "C0") -> TestBattery:
    """The versioned battery in dimension ``d`` restricted to a regularity class."""
    if d not in (1, 2, 3):
        raise ValueError(f"batteries exist for d = 1, 2, 3 (got {d})")
    return _full_battery(d).restrict(regularity)
