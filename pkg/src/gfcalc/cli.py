"""Command-line experiment runner.

    gfcalc delta-verify [--config FILE] [options]
    gfcalc solve --operator laplace_1d --profile bump
    gfcalc fourier --points 0 0.5
    gfcalc stpart --profile quartic
    gfcalc battery-list [--json]

A run is described by an :class:`ExperimentConfig`, read from a JSON file
(schema ``gfcalc-experiment/1``) and overridden by command-line flags.  All
fields are validated before any computation; unknown keys are errors.

Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 for
configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import sympy as sp

from .battery import CLASSES, default_battery
from .calculus import DEFAULT_QUAD, QuadratureSpec, convolve
from .equivalence import (
    DEFAULT_MIN_ORDER,
    DEFAULT_TOLERANCE,
    ApproxVerdict,
    standard_part,
    verify_delta,
)
from .errors import ConfigError, DivergentFamily, GFCalcError, VerificationFailure
from .profiles import BUMP_CUTOFF, AnalyticProfile, coordinates, radius_squared
from .quadrature import RULES
from .report import RESIDUAL_COLUMNS, ReportWriter, solve_rows, summary, verdict_rows
from .scalefield import (
    MAX_EXPONENT,
    MOLLIFIER_KINDS,
    SmoothFamily,
    bump_integral,
    make_ladder,
    make_mollifier,
    model_delta,
    scaled_delta,
    standard_family,
)
from .solutions import CATALOG, SPACETIME_QUAD, fourier_inversion_demo, fundamental_solution, pdo_catalog, solve_convolution

CONFIG_SCHEMA = "gfcalc-experiment/1"
COMMANDS = ("delta-verify", "solve", "fourier", "stpart", "battery-list")
PROFILES = ("bump", "quartic", "tent", "gaussian")
CLAIMS = {"order0": "C0", "c1": "C1", "general": "Cinf"}
# the two Fourier inversion paths must agree to this, independently of the tolerance on the error
PATH_GAP_TOLERANCE = 1e-6

_SECTIONS = {
    "ladder": ("k_min", "k_max", "base"),
    "input": ("profile", "amplitude", "radius", "center"),
    "tolerances": ("finest", "min_order"),
    "quadrature": ("rule", "order", "angular_order", "grading", "coarse_cell"),
    "grid": ("radius", "points"),
    "output": ("dir", "prefix", "figures"),
}
_SCALARS = ("schema", "command", "mollifier", "dimension", "operator", "claim", "points", "seed")
_DEFAULT_PROFILE = {"solve": "bump", "fourier": "quartic", "stpart": "quartic", "delta-verify": "bump", "battery-list": "bump"}


@dataclass(frozen=True)
class InputSpec:
    """Named input profile ``amplitude * g((x - center) / radius)``."""

    profile: str = "bump"
    amplitude: float = 1.0
    radius: float = 1.0
    center: tuple[float, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    k_min: int = 4
    k_max: int = 10
    base: float = 2.0
    mollifier: str = "bump"
    dimension: int = 1
    operator: str | None = None
    claim: str | None = None
    input: InputSpec = field(default_factory=InputSpec)
    tolerance: float = DEFAULT_TOLERANCE
    min_order: float = DEFAULT_MIN_ORDER
    quadrature: dict = field(default_factory=dict)
    grid_radius: float = 2.0
    grid_points: int = 401
    points: tuple[float, ...] = (0.0,)
    output_dir: str = "."
    prefix: str = ""
    figures: bool = True
    seed: int = 0

    @property
    def ladder(self):
        return make_ladder(self.k_min, self.k_max, self.base)

    def to_record(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "command": self.command,
            "ladder": {"k_min": self.k_min, "k_max": self.k_max, "base": self.base},
            "mollifier": self.mollifier,
            "dimension": self.dimension,
            "operator": self.operator,
            "claim": self.claim,
            "input": {
                "profile": self.input.profile,
                "amplitude": self.input.amplitude,
                "radius": self.input.radius,
                "center": list(self.input.center),
            },
            "tolerances": {"finest": self.tolerance, "min_order": self.min_order},
            "quadrature": dict(self.quadrature),
            "grid": {"radius": self.grid_radius, "points": self.grid_points},
            "points": list(self.points),
            "output": {"dir": self.output_dir, "prefix": self.prefix, "figures": self.figures},
            "seed": self.seed,
        }


# --------------------------------------------------------------------------
# validation


def _int(v, name: str, lo: int | None = None, hi: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        else:
            raise ConfigError(name, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(name, f"must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(name, f"must be <= {hi}, got {v}")
    return v


def _float(v, name: str, *, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(name, "must be finite")
    if positive and not v > 0:
        raise ConfigError(name, f"must be positive, got {v!r}")
    return v


def _choice(v, name: str, choices) -> str:
    if not isinstance(v, str) or v not in choices:
        raise ConfigError(name, f"expected one of {list(choices)}, got {v!r}")
    return v


def _section(raw: dict, key: str) -> dict:
    sec = raw.get(key, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(key, "expected an object")
    for k in sec:
        if k not in _SECTIONS[key]:
            raise ConfigError(f"{key}.{k}", "unknown key")
    return sec


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a configuration mapping; every problem is reported with its field name."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    for k in raw:
        if k not in _SECTIONS and k not in _SCALARS:
            raise ConfigError(k, "unknown key")
    schema = raw.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigError("schema", f"unsupported schema {schema!r}; expected {CONFIG_SCHEMA!r}")
    if "command" not in raw:
        raise ConfigError("command", "missing")
    command = _choice(raw["command"], "command", COMMANDS)

    lad = _section(raw, "ladder")
    k_min = _int(lad.get("k_min", 4), "ladder.k_min", 0, MAX_EXPONENT)
    k_max = _int(lad.get("k_max", 10), "ladder.k_max", 0, MAX_EXPONENT)
    base = _float(lad.get("base", 2.0), "ladder.base")
    if not base > 1:
        raise ConfigError("ladder.base", f"must be > 1, got {base!r}")
    if not 1.5 <= base <= 16:
        raise ConfigError("ladder.base", f"consecutive scale ratio must lie in [1.5, 16], got {base!r}")
    if k_max - k_min < 2:
        raise ConfigError("ladder.k_max", "the ladder needs at least 3 levels (k_max >= k_min + 2)")

    mollifier = _choice(raw.get("mollifier", "bump"), "mollifier", MOLLIFIER_KINDS)
    operator = raw.get("operator")
    if operator is not None:
        operator = _choice(operator, "operator", CATALOG)
    if command == "solve" and operator is None:
        raise ConfigError("operator", "required for solve")

    dim = raw.get("dimension")
    if dim is not None:
        dim = _int(dim, "dimension", 1, 3)
    if operator is not None and command in ("solve", "delta-verify"):
        od = pdo_catalog(operator).dimension
        if dim is not None and dim != od:
            raise ConfigError("dimension", f"{operator} acts in {od} dimensions, got {dim}")
        dim = od
    dim = 1 if dim is None else dim
    if command in ("fourier", "stpart") and dim != 1:
        raise ConfigError("dimension", f"{command} is one-dimensional")
    if mollifier == "sinc" and dim != 1:
        raise ConfigError("mollifier", "the sinc profile is one-dimensional only")
    if command == "delta-verify" and operator is not None and mollifier != "bump":
        raise ConfigError("mollifier", "fundamental solutions are mollified with the compact bump")

    claim = raw.get("claim")
    if claim is not None:
        claim = _choice(claim, "claim", CLAIMS)
    elif command == "delta-verify":
        claim = "c1" if mollifier == "sinc" else "order0"

    inp = _section(raw, "input")
    profile = _choice(inp.get("profile", _DEFAULT_PROFILE[command]), "input.profile", PROFILES)
    amplitude = _float(inp.get("amplitude", 1.0), "input.amplitude")
    iradius = _float(inp.get("radius", 1.0), "input.radius", positive=True)
    center = inp.get("center") or [0.0] * dim
    if not isinstance(center, list) or len(center) != dim:
        raise ConfigError("input.center", f"expected a list of {dim} numbers")
    center = tuple(_float(c, "input.center") for c in center)

    tol = _section(raw, "tolerances")
    tolerance = _float(tol.get("finest", DEFAULT_TOLERANCE), "tolerances.finest", positive=True)
    min_order = _float(tol.get("min_order", DEFAULT_MIN_ORDER), "tolerances.min_order")

    q = _section(raw, "quadrature")
    quad = {}
    if "rule" in q:
        quad["rule"] = _choice(q["rule"], "quadrature.rule", RULES)
    if "order" in q:
        quad["order"] = _int(q["order"], "quadrature.order", 1, 40)
    if "angular_order" in q:
        quad["angular_order"] = _int(q["angular_order"], "quadrature.angular_order", 4, 1024)
    if "grading" in q:
        quad["grading"] = _float(q["grading"], "quadrature.grading")
        if not quad["grading"] > 1:
            raise ConfigError("quadrature.grading", "must be > 1")
    if "coarse_cell" in q:
        quad["coarse_cell"] = _float(q["coarse_cell"], "quadrature.coarse_cell", positive=True)

    g = _section(raw, "grid")
    grid_radius = _float(g.get("radius", 2.0), "grid.radius", positive=True)
    grid_points = _int(g.get("points", 401), "grid.points", 9, 100_001)

    points = raw.get("points", [0.0])
    if not isinstance(points, list) or not points:
        raise ConfigError("points", "expected a non-empty list of numbers")
    points = tuple(_float(p, "points") for p in points)

    out = _section(raw, "output")
    out_dir = out.get("dir", ".")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output.dir", "expected a path")
    prefix = out.get("prefix", command.replace("-", "_"))
    if not isinstance(prefix, str) or not prefix or "/" in prefix:
        raise ConfigError("output.prefix", "expected a file name prefix")
    figures = out.get("figures", True)
    if not isinstance(figures, bool):
        raise ConfigError("output.figures", "expected true or false")

    seed = _int(raw.get("seed", 0), "seed", 0)
    return ExperimentConfig(
        command, k_min, k_max, base, mollifier, dim, operator, claim,
        InputSpec(profile, amplitude, iradius, center), tolerance, min_order, quad,
        grid_radius, grid_points, points, out_dir, prefix, figures, seed,
    )


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"not valid JSON ({exc.msg} at line {exc.lineno})") from None


# --------------------------------------------------------------------------
# inputs


def input_profile(spec: InputSpec, d: int) -> AnalyticProfile:
    """Build the named input profile as a closed-form expression."""
    c, r, a = spec.center or (0.0,) * d, spec.radius, spec.amplitude
    s = radius_squared(d, c) / sp.Float(r) ** 2
    centred = not any(c)
    kinks: tuple[float, ...] = ()
    cutoff, smooth, radius = 1.0, math.inf, r
    if spec.profile == "bump":
        # unit mass for amplitude 1, like the mollifier
        expr = sp.Float(a / (bump_integral(d) * r**d)) * sp.exp(-1 / (1 - s))
        cutoff = BUMP_CUTOFF
    elif spec.profile == "quartic":
        expr = sp.Float(a) * (1 - s) ** 2
        smooth = 1
    elif spec.profile == "tent":
        expr = sp.Float(a) * (1 - sp.sqrt(s))
        smooth = 0
        kinks = (c[0],) if d == 1 else (0.0,)
    else:
        expr = sp.Float(a) * sp.exp(-s / 2)
        radius = math.inf
    if d == 1:
        bps = tuple(sorted({*kinks, *((c[0] - r, c[0] + r) if math.isfinite(radius) else ())}))
    else:
        bps = kinks + ((r,) if centred and math.isfinite(radius) else ())
    return AnalyticProfile(expr, d, radius=radius, center=c, cutoff=cutoff, smoothness=smooth,
                           breakpoints=bps, name=spec.profile)


def input_family(spec: InputSpec, d: int) -> SmoothFamily:
    prof = input_profile(spec, d)
    return standard_family(prof, d, support_radius=prof.support_radius, scale=spec.radius,
                           smoothness=prof.smoothness, label=f"input[{spec.profile}]",
                           radial=not any(prof.center), breakpoints=prof.breakpoints)


def _quad(cfg: ExperimentConfig, base: QuadratureSpec = DEFAULT_QUAD) -> QuadratureSpec:
    try:
        return replace(base, **cfg.quadrature)
    except ValueError as exc:
        raise ConfigError("quadrature", str(exc)) from None


def _grid(cfg: ExperimentConfig) -> np.ndarray:
    """Equispaced grid on [-R, R] shifted by a seeded sub-cell jitter."""
    x = np.linspace(-cfg.grid_radius, cfg.grid_radius, cfg.grid_points)
    h = x[1] - x[0]
    return x + np.random.default_rng(cfg.seed).uniform(-0.5, 0.5) * h


def _delta_candidate(cfg: ExperimentConfig, ladder):
    psi = make_mollifier(cfg.mollifier, cfg.dimension)
    return model_delta(psi, ladder) if cfg.mollifier == "bump" else scaled_delta(psi, ladder)


# --------------------------------------------------------------------------
# commands


@dataclass
class Outcome:
    passed: bool
    summary: dict
    timings: dict
    lines: list[str]


def _line(name: str, v: ApproxVerdict) -> str:
    tag = "PASS" if v.passed else "FAIL"
    return f"{tag} {name}: finest residual {v.finest:.3e} (tol {v.tolerance_at_finest:g}), fitted order {v.fitted_order:.3f} (min {v.min_order:g})"


def _figure(cfg, writer: ReportWriter, suffix: str, draw) -> None:
    if cfg.figures:
        draw(writer.path(suffix))


def cmd_delta_verify(cfg: ExperimentConfig, writer: ReportWriter) -> Outcome:
    ladder = cfg.ladder
    t0 = time.perf_counter()
    if cfg.operator is not None:
        spacetime = cfg.operator in ("heat_1p1", "transport_1p1")
        quad = _quad(cfg, SPACETIME_QUAD if spacetime else DEFAULT_QUAD)
        entry = fundamental_solution(cfg.operator, ladder, quad=quad, verify=False)
        cand = entry.applied
    else:
        quad = _quad(cfg)
        cand = _delta_candidate(cfg, ladder)
    battery = default_battery(cfg.dimension, CLAIMS[cfg.claim])
    v = verify_delta(cand, battery, quad, claim=cfg.claim, tolerance=cfg.tolerance, min_order=cfg.min_order)
    elapsed = time.perf_counter() - t0
    writer.add_csv("residuals.csv", RESIDUAL_COLUMNS, verdict_rows(v))
    rec = summary(
        cfg.command, cfg.to_record(), v.passed, {"delta": v.to_record()},
        candidate=cand.label, battery={"version": battery.version, "regularity": battery.regularity,
                                       "members": battery.labels},
    )
    writer.add_json("summary.json", rec)

    def draw(path):
        from .plotting import residual_figure

        residual_figure(path, v.rhos, {"delta residual": v.residuals}, cand.label, reference_order=1.0)

    _figure(cfg, writer, "residuals.png", draw)
    return Outcome(v.passed, rec, {"verify_delta": elapsed}, [_line("delta claim", v)])


def cmd_solve(cfg: ExperimentConfig, writer: ReportWriter) -> Outcome:
    ladder = cfg.ladder
    d = cfg.dimension
    f = input_family(cfg.input, d)
    quad = _quad(cfg)
    grid = _grid(cfg) if d == 1 else None
    rep = solve_convolution(cfg.operator, f, ladder, quad, grid=grid, radius=cfg.grid_radius,
                            tolerance=cfg.tolerance, min_order=cfg.min_order)
    header, rows = solve_rows(rep.weak_residuals, rep.strong_residuals)
    writer.add_csv("residuals.csv", header, rows)
    verdicts = {"weak": rep.weak_residuals.to_record(), "strong": rep.strong_residuals.to_record()}
    if rep.entry.verdict is not None:
        verdicts["fundamental_solution"] = rep.entry.verdict.to_record()
    extra: dict[str, Any] = {
        "fitted_orders": {"weak": rep.weak_residuals.fitted_order, "strong": rep.strong_residuals.fitted_order},
        "standard_part_strong_residual": rep.st_strong_residual,
        "kernel": {"name": rep.entry.name, "singularity": rep.entry.singularity, "validity": rep.entry.validity},
    }
    if rep.membership is not None:
        extra["source_membership"] = rep.membership.to_record()
    if rep.standard_part is not None:
        x = rep.standard_part.grid[:, 0]
        writer.add_csv("standard_part.csv", ("x", "st_u"), zip(x, rep.standard_part.values))
    rec = summary(cfg.command, cfg.to_record(), rep.passed, verdicts, **extra)
    writer.add_json("summary.json", rec)

    def draw(path):
        from .plotting import residual_figure

        residual_figure(path, rep.weak_residuals.rhos,
                        {"weak": rep.weak_residuals.residuals, "strong": rep.strong_residuals.residuals},
                        f"u = E_rho * f for {cfg.operator}")

    _figure(cfg, writer, "residuals.png", draw)
    if rep.standard_part is not None:
        def draw_u(path):
            from .plotting import profile_figure

            profile_figure(path, rep.standard_part.grid[:, 0], {"st u": rep.standard_part.values},
                           f"standard part of the solution ({cfg.operator})")

        _figure(cfg, writer, "standard_part.png", draw_u)
    lines = [_line("weak residual", rep.weak_residuals), _line("strong residual", rep.strong_residuals)]
    return Outcome(rep.passed, rec, dict(rep.timings), lines)


def cmd_fourier(cfg: ExperimentConfig, writer: ReportWriter) -> Outcome:
    ladder = cfg.ladder
    t0 = time.perf_counter()
    prof = input_profile(cfg.input, 1)
    if not math.isfinite(prof.radius):
        raise ConfigError("input.profile", "the Fourier demo needs a compactly supported profile")
    table = fourier_inversion_demo(prof, ladder, cfg.points, _quad(cfg))
    elapsed = time.perf_counter() - t0
    v = ApproxVerdict.from_residuals(table.errors, ladder.rhos, tolerance=cfg.tolerance, min_order=cfg.min_order,
                                     quadrature_errors=table.path_gap, claim="truncated Fourier inversion error")
    gap_ok = bool(np.max(table.path_gap) <= PATH_GAP_TOLERANCE)
    passed = v.passed and gap_ok
    n = len(ladder)
    header = ("level_index", "rho", "lambda", "residual", "quadrature_error_estimate", "imag_max", "fitted_order")
    rows = [[i, ladder[i], table.lambdas[i], table.errors[i], table.path_gap[i], table.imag_max[i],
             table.fitted_order if i == n - 1 else None] for i in range(n)]
    writer.add_csv("residuals.csv", header, rows)
    rec = summary(cfg.command, cfg.to_record(), passed, {"inversion": v.to_record()},
                  paths={"max_gap": float(np.max(table.path_gap)), "tolerance": PATH_GAP_TOLERANCE, "passed": gap_ok},
                  table=table.to_record(), points=table.points.tolist())
    writer.add_json("summary.json", rec)

    def draw(path):
        from .plotting import fourier_figure

        fourier_figure(path, table.lambdas, table.errors, table.path_gap)

    _figure(cfg, writer, "residuals.png", draw)
    lines = [_line("inversion error", v),
             f"{'PASS' if gap_ok else 'FAIL'} path agreement: max gap {np.max(table.path_gap):.3e} (tol {PATH_GAP_TOLERANCE:g})"]
    return Outcome(passed, rec, {"fourier": elapsed}, lines)


def cmd_stpart(cfg: ExperimentConfig, writer: ReportWriter) -> Outcome:
    ladder = cfg.ladder
    t0 = time.perf_counter()
    src = input_family(cfg.input, 1)
    quad = _quad(cfg)
    fam = convolve(src, _delta_candidate(cfg, ladder), quad).with_label(f"{src.label} * delta")
    x = _grid(cfg)
    k = 1 if src.declared_smoothness >= 1 else 0
    sample = standard_part(fam, x, k)
    exact = src(0, x[:, None])
    res = np.array([np.max(np.abs(fam(lev, x[:, None]) - exact)) for lev in range(len(ladder))])
    v = ApproxVerdict.from_residuals(res, ladder.rhos, tolerance=cfg.tolerance, min_order=cfg.min_order,
                                     claim="mollified input converges to the input")
    elapsed = time.perf_counter() - t0
    passed = v.passed and sample.interchange_ok
    writer.add_csv("residuals.csv", RESIDUAL_COLUMNS, verdict_rows(v))
    cols = [x, sample.values]
    header = ["x", "st_value"]
    if k:
        cols.append(sample.derivative_samples[(1,)])
        header.append("st_derivative")
    writer.add_csv("standard_part.csv", header, zip(*cols))
    rec = summary(cfg.command, cfg.to_record(), passed, {"convergence": v.to_record()},
                  standard_part=sample.to_record(), interchange_ok=sample.interchange_ok)
    writer.add_json("summary.json", rec)

    def draw(path):
        from .plotting import profile_figure

        curves = {"st value": sample.values, "input": exact}
        if k:
            curves["st derivative"] = sample.derivative_samples[(1,)]
        profile_figure(path, x, curves, fam.label)

    _figure(cfg, writer, "standard_part.png", draw)
    lines = [_line("convergence to the input", v),
             f"{'PASS' if sample.interchange_ok else 'FAIL'} derivative/standard-part interchange"]
    return Outcome(passed, rec, {"stpart": elapsed}, lines)


COMMAND_RUNNERS = {
    "delta-verify": cmd_delta_verify,
    "solve": cmd_solve,
    "fourier": cmd_fourier,
    "stpart": cmd_stpart,
}


def battery_text(d: int = 1) -> str:
    """Human-readable listing of the versioned battery."""
    b = default_battery(d, "C0")
    counts = {c: sum(m.regularity == c for m in b) for c in CLASSES}
    out = [f"test battery {b.version} (d={d}): {len(b)} members "
           + ", ".join(f"{counts[c]} {c}" for c in CLASSES)]
    out.append(f"{'label':<16} {'class':<5} {'support':>8} {'certified':>9}  sup norms")
    for m in b:
        norms = " ".join(f"{list(a)}={v:.4g}" for a, v in sorted(m.sup_norms.items()))
        out.append(f"{m.label:<16} {m.regularity:<5} {m.support_radius:>8.4g} {m.certified_order:>9d}  {norms}")
    return "\n".join(out) + "\n"


def battery_json(d: int = 1) -> str:
    from .report import dumps

    return dumps(default_battery(d, "C0").to_record())


def run_experiment(cfg: ExperimentConfig, *, stdout=None) -> int:
    """Run one configured experiment, write its report files and return the exit status."""
    stdout = stdout or sys.stdout
    writer = ReportWriter(cfg.output_dir, cfg.prefix)
    try:
        writer.check_writable()
    except OSError as exc:
        raise ConfigError("output.dir", f"cannot write to {cfg.output_dir}: {exc.strerror or exc}") from None
    t0 = time.perf_counter()
    outcome = COMMAND_RUNNERS[cfg.command](cfg, writer)
    timings = dict(outcome.timings)
    timings["wall"] = time.perf_counter() - t0
    writer.add_json("timings.json", {"schema": "gfcalc-timings/1", "seconds": timings})
    paths = writer.write()
    for line in outcome.lines:
        print(line, file=stdout)
    for p in paths:
        print(f"wrote {p}", file=stdout)
    if cfg.figures:
        for suffix in ("residuals.png", "standard_part.png"):
            if writer.path(suffix).exists():
                print(f"wrote {writer.path(suffix)}", file=stdout)
    return 0 if outcome.passed else 1


# --------------------------------------------------------------------------
# argument parsing


def _set(raw: dict, dotted: str, value) -> None:
    if value is None:
        return
    if "." in dotted:
        sec, key = dotted.split(".")
        cur = raw.get(sec)
        if not isinstance(cur, dict):
            cur = {}
            raw[sec] = cur
        cur[key] = value
    else:
        raw[dotted] = value


_FLAG_FIELDS = {
    "k_min": "ladder.k_min",
    "k_max": "ladder.k_max",
    "base": "ladder.base",
    "mollifier": "mollifier",
    "dimension": "dimension",
    "operator": "operator",
    "claim": "claim",
    "profile": "input.profile",
    "amplitude": "input.amplitude",
    "radius": "input.radius",
    "center": "input.center",
    "tolerance": "tolerances.finest",
    "min_order": "tolerances.min_order",
    "quad_rule": "quadrature.rule",
    "quad_order": "quadrature.order",
    "angular_order": "quadrature.angular_order",
    "grid_radius": "grid.radius",
    "grid_points": "grid.points",
    "points": "points",
    "out": "output.dir",
    "prefix": "output.prefix",
    "seed": "seed",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gfcalc", description="Scale-ladder generalized-function experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("delta-verify", "check that a family acts as a delta on the test battery"),
        ("solve", "solve P(d)u = f by convolution with a mollified fundamental solution"),
        ("fourier", "truncated Fourier inversion through the Dirichlet kernel"),
        ("stpart", "standard part of a mollified input and derivative interchange"),
        ("battery-list", "print the versioned test battery"),
    ):
        p = sub.add_parser(name, help=help_)
        if name == "battery-list":
            p.add_argument("--dimension", type=int, default=1, choices=(1, 2, 3))
            p.add_argument("--json", action="store_true", help="machine-readable output")
            continue
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--k-min", type=int)
        p.add_argument("--k-max", type=int)
        p.add_argument("--base", type=float)
        p.add_argument("--mollifier")
        p.add_argument("--dimension", type=int)
        p.add_argument("--operator")
        p.add_argument("--claim")
        p.add_argument("--profile")
        p.add_argument("--amplitude", type=float)
        p.add_argument("--radius", type=float, help="input profile radius")
        p.add_argument("--center", type=float, nargs="+")
        p.add_argument("--tolerance", type=float, help="finest-level tolerance")
        p.add_argument("--min-order", type=float)
        p.add_argument("--quad-rule")
        p.add_argument("--quad-order", type=int)
        p.add_argument("--angular-order", type=int)
        p.add_argument("--grid-radius", type=float)
        p.add_argument("--grid-points", type=int)
        p.add_argument("--points", type=float, nargs="+", help="evaluation points (fourier)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--prefix")
        p.add_argument("--seed", type=int)
        p.add_argument("--no-figures", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    raw = load_config(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    raw = dict(raw)
    if raw.get("command", args.command) != args.command:
        raise ConfigError("command", f"config is for {raw['command']!r}, not {args.command!r}")
    raw["command"] = args.command
    for attr, dotted in _FLAG_FIELDS.items():
        val = getattr(args, attr)
        _set(raw, dotted, list(val) if isinstance(val, list) else val)
    if args.no_figures:
        _set(raw, "output.figures", False)
    return parse_config(raw)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "battery-list":
            sys.stdout.write(battery_json(args.dimension) if args.json else battery_text(args.dimension))
            return 0
        cfg = config_from_args(args)
        return run_experiment(cfg)
    except ConfigError as exc:
        print(f"gfcalc: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (VerificationFailure, DivergentFamily) as exc:
        print(f"gfcalc: verdict failed: {exc}", file=sys.stderr)
        return 1
    except (GFCalcError, ValueError, OSError) as exc:
        print(f"gfcalc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
