"""Parameter grids, finite-size extrapolation and scan orchestration.

A scan plan is a flat ``key = value`` text file, for example::

    measure = b
    pair = alpha,beta
    N = 6,8,10,12
    c = grid:50
    degree = 2

Each ``N`` is one line of the grid: its cells are visited in increasing
``c`` so that tagged states can be followed from one cell to the next.
Lines are independent and may run in a process pool; the table is sorted
before it is written, so output does not depend on the schedule.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import ModuleSpec
from .errors import InvalidArgument, JordanLoopsError
from .params import NEGATED, LatticeParams, param_from_c

__all__ = [
    "ScanCell",
    "ScanPlan",
    "ScanTable",
    "c_grid",
    "extrapolate",
    "format_number",
    "parse_plan",
    "run_scan",
    "theory_b",
]

VERSION = "0.1.0"

PAIRS = {
    ("alpha", "beta"): (1, 1),
    ("mu", "nu"): (1, 2),
    ("T", "Tprime"): "Tt",
}

MODULES = {
    ("alpha", "beta"): "standard:1:0",
    ("mu", "nu"): "standard:2:0",
    ("T", "Tprime"): "glued-quotient:2",
}


def format_number(v: float) -> str:
    """Twelve significant digits; ``nan`` for missing values."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{float(v):.12g}"


def _pair(z: complex) -> tuple[str, str]:
    z = complex(z)
    if math.isnan(z.real):
        return "nan", "nan"
    return format_number(z.real), format_number(z.imag)


def c_grid(divisor: int = 50, exclude_zero: bool = False) -> list[float]:
    """``k pi / divisor`` for every integer ``k`` with the value inside ``(-2, 1)``."""
    if int(divisor) != divisor or divisor < 1:
        raise InvalidArgument("divisor must be a positive integer")
    step = math.pi / divisor
    lo = math.floor(-2.0 / step)
    hi = math.ceil(1.0 / step)
    out = []
    for k in range(lo, hi + 1):
        c = k * step
        if -2.0 < c < 1.0 and not (exclude_zero and k == 0):
            out.append(c)
    return out


@dataclass
class FitDiagnostics:
    degree: int
    coefficients: list[float]
    residual: float
    sensitivity: float
    n_points: int


def _fit(L: np.ndarray, y: np.ndarray, degree: int):
    V = np.vander(1.0 / L, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    return coef, float(np.linalg.norm(V @ coef - y))


def extrapolate(values, degree: int = 2) -> tuple[float, FitDiagnostics]:
    """Least-squares polynomial in ``1/L``; the constant term is the ``L -> infinity`` limit.

    ``sensitivity`` is the change of the limit when the smallest ``L`` is
    dropped (zero when that would leave the fit underdetermined).
    """
    pts = sorted((float(L), float(np.real(y))) for L, y in values)
    if len(pts) < degree + 1:
        raise InvalidArgument(f"a degree-{degree} fit needs at least {degree + 1} points, got {len(pts)}")
    if any(L <= 0 for L, _ in pts):
        raise InvalidArgument("sizes must be positive")
    L = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    coef, resid = _fit(L, y, degree)
    sens = 0.0
    if len(pts) >= degree + 2:
        coef_drop, _ = _fit(L[1:], y[1:], degree)
        sens = float(abs(coef_drop[0] - coef[0]))
    return float(coef[0]), FitDiagnostics(degree, [float(c) for c in coef], resid, sens, len(pts))


def theory_b(kind, x: float) -> float:
    """Continuum couplings ``b_{1,1} = 1/(x+1)`` and ``b_{1,2} = 4/(x+1) - 2/x^2``."""
    if x <= 0:
        raise InvalidArgument("x must be positive")
    kind = tuple(kind)
    if kind == (1, 1):
        return 1.0 / (x + 1.0)
    if kind == (1, 2):
        return 4.0 / (x + 1.0) - 2.0 / (x * x)
    raise InvalidArgument(f"no closed form for kind {kind!r}")


# -- plans ----------------------------------------------------------------------


@dataclass
class ScanPlan:
    measure: str = "J"  # "J" or "b"
    pair: tuple[str, str] = ("alpha", "beta")
    sizes: tuple[int, ...] = ()
    c_values: tuple[float, ...] = ()
    degree: int = 2
    convention: str = NEGATED
    y: float = 1.0
    chiral: bool = False
    jobs: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("jobs")
        return d


def _parse_c(text: str, exclude_zero: bool) -> tuple[float, ...]:
    text = text.strip()
    if text.startswith("grid:"):
        return tuple(c_grid(int(text[5:]), exclude_zero))
    if not text:
        return ()
    vals = tuple(float(v) for v in text.split(","))
    return tuple(v for v in vals if not (exclude_zero and v == 0.0))


def parse_plan(text: str) -> ScanPlan:
    """Read a ``key = value`` plan; ``#`` starts a comment."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"plan line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        raw[key.lower()] = val
    known = {"measure", "pair", "n", "c", "degree", "convention", "y", "chiral", "jobs", "exclude_zero", "module", "tags"}
    unknown = set(raw) - known
    if unknown:
        raise InvalidArgument(f"unknown plan keys {sorted(unknown)}")
    pair_text = raw.get("pair", raw.get("tags", "alpha,beta"))
    pair = tuple(s.strip() for s in pair_text.split(","))
    if pair not in PAIRS:
        raise InvalidArgument(f"unknown pair {pair!r}; choose one of {sorted(','.join(p) for p in PAIRS)}")
    exclude = raw.get("exclude_zero", "auto").lower()
    exclude_zero = pair == ("T", "Tprime") if exclude == "auto" else exclude in ("1", "true", "yes")
    if "module" in raw and str(ModuleSpec.parse(raw["module"])) != MODULES[pair]:
        raise InvalidArgument(f"pair {pair} lives in module {MODULES[pair]}, plan says {raw['module']}")
    measure = raw.get("measure", "J")
    if measure not in ("J", "b"):
        raise InvalidArgument("measure must be J or b")
    sizes = tuple(int(v) for v in raw["n"].split(",")) if raw.get("n") else ()
    return ScanPlan(
        measure=measure,
        pair=pair,
        sizes=sizes,
        c_values=_parse_c(raw.get("c", ""), exclude_zero),
        degree=int(raw.get("degree", 2)),
        convention=raw.get("convention", NEGATED),
        y=float(raw.get("y", 1.0)),
        chiral=raw.get("chiral", "false").lower() in ("1", "true", "yes"),
        jobs=int(raw.get("jobs", 1)),
    )


# -- execution ------------------------------------------------------------------


@dataclass
class ScanCell:
    N: int
    c: float
    module: str
    pair: str
    J: float = float("nan")
    b1: complex = complex("nan")
    b2: complex = complex("nan")
    loop_norm: complex = complex("nan")
    overlap: float = float("nan")
    marker: str = ""

    def row(self) -> list[str]:
        return [
            str(self.N),
            format_number(self.c),
            self.module,
            self.pair,
            format_number(self.J),
            *_pair(self.b1),
            *_pair(self.b2),
            *_pair(self.loop_norm),
            format_number(self.overlap),
            self.marker,
        ]


HEADER = ["N", "c", "module", "pair", "J", "b1_re", "b1_im", "b2_re", "b2_im", "loop_norm_re", "loop_norm_im", "overlap", "marker"]


@dataclass
class ScanTable:
    plan: ScanPlan
    cells: list[ScanCell] = field(default_factory=list)

    def sorted_cells(self) -> list[ScanCell]:
        return sorted(self.cells, key=lambda c: (c.N, c.c))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for cell in self.sorted_cells():
            w.writerow(cell.row())
        return buf.getvalue()

    def manifest(self, csv_text: str | None = None) -> dict:
        text = self.to_csv() if csv_text is None else csv_text
        return {
            "tool": "jordanloops",
            "version": VERSION,
            "plan": self.plan.to_dict(),
            "cells": len(self.cells),
            "markers": sum(1 for c in self.cells if c.marker),
            "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
        }

    def series(self, c: float, which: str = "b1") -> list[tuple[int, float]]:
        """``(L, value)`` pairs at one ``c`` for extrapolation, skipping marked cells."""
        out = []
        for cell in self.sorted_cells():
            if cell.c == c and not cell.marker:
                v = getattr(cell, which)
                out.append((cell.N // 2, float(np.real(v))))
        return out


def _params(plan: ScanPlan, c: float) -> LatticeParams:
    return LatticeParams.from_x(param_from_c(c), plan.convention, plan.y)


def _scan_line(plan: ScanPlan, n: int) -> list[ScanCell]:
    # imported here so worker processes pay the import cost once per line
    from .inner import gram, loop_norm
    from .jordan import j_measure, measure_b, measure_b_Tt, null_descent_operator
    from .koosaleur import h0
    from .spectral import identify_fields

    a, b = plan.pair
    kind = PAIRS[plan.pair]
    label = f"{a},{b}"
    history: dict = {}
    cells = []
    for c in sorted(plan.c_values):
        params = _params(plan, c)
        module = MODULES[plan.pair]
        cell = ScanCell(n, c, module, label)
        try:
            if kind == "Tt":
                if plan.measure == "b":
                    m = measure_b_Tt(n, params, plan.chiral)
                    cell.J, cell.b1, cell.b2, cell.loop_norm = m.J, m.b1, m.b2, m.loop_norm_psi
                else:
                    tags = identify_fields(n, params, ("T", "Tprime"))
                    _require(tags, (a, b))
                    cell.J = j_measure(tags[a].datum, tags[b].datum)
                cells.append(cell)
                continue
            phi = "Phi11" if kind == (1, 1) else "Phi12"
            names = (a, b, phi) if plan.measure == "b" else (a, b)
            tags = identify_fields(n, params, names, history={k: v.datum for k, v in history.items()})
            _require(tags, names)
            if history:
                cell.overlap = min(
                    abs(np.vdot(history[t].datum.eigenvector, tags[t].datum.eigenvector)) for t in (a, b)
                )
                if cell.overlap <= 0.5:
                    cell.marker = "continuity"
            history = {t: tags[t] for t in (a, b)}
            cell.J = j_measure(tags[a].datum, tags[b].datum)
            basis = tags[a].basis
            G = gram(basis, "loop", params)
            v = tags[a].datum.eigenvector
            cell.loop_norm = loop_norm(v / np.linalg.norm(v), G)
            if plan.measure == "b":
                A = null_descent_operator(kind, basis, params, plan.chiral)
                m = measure_b((tags[a].datum, tags[b].datum), tags[phi].datum, A, G, h0(basis, params).data)
                cell.b1, cell.b2 = m.b1, m.b2
        except JordanLoopsError as exc:
            cell.marker = type(exc).__name__ + ": " + str(exc).replace(",", ";")
            history = {}
        cells.append(cell)
    return cells


def _require(tags: dict, names) -> None:
    from .errors import DegenerateMeasurement

    for t in names:
        if not tags.get(t):
            reason = getattr(tags.get(t), "reason", "missing")
            raise DegenerateMeasurement(f"tag {t} unresolved ({reason})")


def run_scan(plan: ScanPlan, jobs: int | None = None) -> ScanTable:
    """Execute every cell of ``plan``; an empty plan gives an empty table."""
    table = ScanTable(plan)
    if not plan.sizes or not plan.c_values:
        return table
    workers = max(1, jobs if jobs is not None else plan.jobs)
    if workers == 1:
        for n in plan.sizes:
            table.cells.extend(_scan_line(plan, n))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cells in pool.map(_scan_line, [plan] * len(plan.sizes), plan.sizes):
                table.cells.extend(cells)
    return table


def write_scan(table: ScanTable, csv_path: str, manifest_path: str | None = None) -> dict:
    text = table.to_csv()
    with open(csv_path, "w", newline="") as fh:
        fh.write(text)
    manifest = table.manifest(text)
    with open(manifest_path or csv_path + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
