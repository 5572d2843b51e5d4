"""CSV residual tables and versioned JSON summaries.

Every float is written with 17 significant digits so that a report can be
read back bit-exactly.  Wall-clock timings are kept out of the summary (they
go to a separate file) so identical configurations give identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .equivalence import ApproxVerdict

REPORT_SCHEMA = "gfcalc-report/1"
RESIDUAL_COLUMNS = ("level_index", "rho", "residual", "quadrature_error_estimate", "fitted_order")


def fmt(x) -> str:
    """``%.17g`` for floats; integers and strings pass through."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def _json(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return "%.17g" % x
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_json(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _json(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits (Python's parser reads NaN/Infinity)."""
    return _json(obj, indent, 0) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def verdict_rows(v: ApproxVerdict) -> list[list]:
    """One row per level; the finest row doubles as the summary row and carries the fitted order."""
    n = v.residuals.size
    qe = v.quadrature_errors if v.quadrature_errors is not None else [None] * n
    return [
        [i, v.rhos[i], v.residuals[i], qe[i], v.fitted_order if i == n - 1 else None]
        for i in range(n)
    ]


def solve_rows(weak: ApproxVerdict, strong: ApproxVerdict) -> tuple[tuple[str, ...], list[list]]:
    header = ("level_index", "rho", "weak_residual", "strong_residual", "quadrature_error_estimate",
              "weak_fitted_order", "strong_fitted_order")
    n = weak.residuals.size
    qe = weak.quadrature_errors if weak.quadrature_errors is not None else [None] * n
    rows = []
    for i in range(n):
        last = i == n - 1
        rows.append([i, weak.rhos[i], weak.residuals[i], strong.residuals[i], qe[i],
                     weak.fitted_order if last else None, strong.fitted_order if last else None])
    return header, rows


class ReportWriter:
    """Collects output files and writes them once at the end."""

    def __init__(self, directory: str | Path, prefix: str):
        self.directory = Path(directory)
        self.prefix = prefix
        self._files: dict[str, str] = {}

    def path(self, suffix: str) -> Path:
        return self.directory / f"{self.prefix}_{suffix}"

    def check_writable(self) -> None:
        """Create the output directory and make sure a file can be written there."""
        self.directory.mkdir(parents=True, exist_ok=True)
        probe = self.directory / f".{self.prefix}.probe"
        probe.write_text("")
        probe.unlink()

    def add_csv(self, suffix: str, header, rows) -> None:
        self._files[suffix] = csv_text(header, rows)

    def add_json(self, suffix: str, obj) -> None:
        self._files[suffix] = dumps(obj)

    def write(self) -> list[Path]:
        self.directory.mkdir(parents=True, exist_ok=True)
        out = []
        for suffix, text in self._files.items():
            p = self.path(suffix)
            p.write_text(text)
            out.append(p)
        return out


def summary(command: str, config: dict, passed: bool, verdicts: dict, **extra) -> dict:
    rec = {"schema": REPORT_SCHEMA, "command": command, "passed": passed, "config": config, "verdicts": verdicts}
    rec.update(extra)
    return rec
