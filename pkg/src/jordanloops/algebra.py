"""Action of the periodic Temperley-Lieb generators and translation on link states.

Generators are written ``e_k`` with 1-based ``k`` acting on sites ``k`` and
``k+1`` (cyclically).  Every elementary action is recorded as an integer
"move": the image state plus counts of contractible loops, non-contractible
loops, y-factors and the signed number of sites travelled by through-lines.
Numerical coefficients are produced from the move only at assembly time, so a
basis is walked once per generator regardless of how many couplings are used.
"""

from __future__ import annotations

import cmath
import functools
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .basis import STANDARD, Basis, LinkState, ModuleSpec, format_state, psi_rewire
from .errors import InvalidArgument
from .params import NEGATED, PLAIN, LatticeParams

__all__ = [
    "LatticeParams",
    "Move",
    "OperatorMatrix",
    "RelationReport",
    "WeightedStates",
    "apply_e",
    "apply_tau",
    "assemble",
    "assemble_sparse",
    "parse_generator",
    "verify_relations",
]


@dataclass(frozen=True)
class Move:
    """Integer record of one generator acting on one basis state."""

    target: LinkState | None
    loops: int = 0
    windings: int = 0
    y_count: int = 0
    displacement: int = 0


@dataclass
class WeightedStates:
    """Linear combination of link states; one term per state, no zero terms."""

    terms: list[tuple[complex, LinkState]] = field(default_factory=list)

    def __post_init__(self):
        merged: dict[LinkState, complex] = {}
        for coef, state in self.terms:
            merged[state] = merged.get(state, 0.0) + coef
        self.terms = [(c, s) for s, c in merged.items() if c != 0]

    def __len__(self) -> int:
        return len(self.terms)

    def coefficient(self, state: LinkState) -> complex:
        for c, s in self.terms:
            if s == state:
                return c
        return 0.0

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"({c:.6g}){format_state(s)}" for c, s in self.terms)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense operator on a module basis; columns are images of basis states."""

    label: str
    data: np.ndarray
    basis: Basis

    def __post_init__(self):
        n = len(self.basis)
        if self.data.shape != (n, n):
            raise InvalidArgument(f"matrix shape {self.data.shape} does not match basis size {n}")

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def shape(self):
        return self.data.shape


# -- elementary moves ---------------------------------------------------------


def _arc(n: int, i: int, j: int) -> tuple[int, int]:
    return (i % n, j % n)


def _signed_step(state: LinkState, start: int) -> int:
    """Displacement from ``start`` to its partner along their arc."""
    n = state.n_sites
    end = state.partner[start]
    if state.opener[start]:
        return (end - start) % n
    return -((start - end) % n)


def _move_e(state: LinkState, k: int, spec: ModuleSpec) -> Move:
    """``e_{k+1}`` (0-based left site ``k``) on ``state`` as a diagram move."""
    n = state.n_sites
    a, b = k % n, (k + 1) % n
    partner, opener = state.partner, state.opener
    pa, pb = partner[a], partner[b]
    arcs = [arc for arc in state.arcs if a not in arc and b not in arc]
    new_arc = (a, b)

    if pa == b:
        if opener[a]:
            return Move(state, loops=1)
        # arc b -> a around the back of the cylinder
        return _finish(LinkState(n, tuple(arcs + [new_arc])), spec, windings=1)

    if pa < 0 and pb < 0:
        if spec.kind == STANDARD:
            return Move(None)
        # contracted pair; a is the left member of the new arc a -> b
        y = 1 if a % 2 == 0 else 0
        return _finish(LinkState(n, tuple(arcs + [new_arc])), spec, y_count=y)

    if pa < 0:
        # b opens b -> c; the through-line at a moves to c
        c = pb
        disp = (c - a) % n
        return _finish(LinkState(n, tuple(arcs + [new_arc])), spec, displacement=disp)

    if pb < 0:
        # a closes c -> a; the through-line at b moves to c
        c = pa
        disp = -((b - c) % n)
        return _finish(LinkState(n, tuple(arcs + [new_arc])), spec, displacement=disp)

    c, d = pa, pb
    travel = -_signed_step(state, a) + 1 + _signed_step(state, b)
    other = _arc(n, c, d) if travel > 0 else _arc(n, d, c)
    return _finish(LinkState(n, tuple(arcs + [new_arc, other])), spec)


def _finish(state: LinkState, spec: ModuleSpec, **counts) -> Move:
    if spec.is_quotient and state.n_through == 0:
        state = psi_rewire(state)
    return Move(state, **counts)


def _move_tau(state: LinkState, power: int, spec: ModuleSpec) -> Move:
    n = state.n_sites
    arcs = tuple(_arc(n, i + power, j + power) for i, j in state.arcs)
    return _finish(LinkState(n, arcs), spec, displacement=power * state.n_through)


# -- generator symbols -------------------------------------------------------

_GEN_RE = re.compile(r"^\s*(?:e_?(\d+)|(tau|t)(?:\^?\(?([+-]?\d+)\)?)?|(id|1))\s*$", re.I)


def parse_generator(symbol, n_sites: int) -> tuple[str, int]:
    """Normalize a generator symbol to ``("e", k)``, ``("tau", p)`` or ``("id", 0)``.

    Accepts ``"e3"``, ``"e_3"``, ``"tau"``, ``"tau^-1"``, ``"tau^2"``, ``"id"``;
    ``k`` is 1-based.
    """
    if isinstance(symbol, tuple):
        kind, val = symbol
    else:
        mt = _GEN_RE.match(str(symbol))
        if not mt:
            raise InvalidArgument(f"unknown generator {symbol!r}")
        if mt.group(1):
            kind, val = "e", int(mt.group(1))
        elif mt.group(2):
            kind, val = "tau", int(mt.group(3)) if mt.group(3) else 1
        else:
            kind, val = "id", 0
    if kind == "e" and not 1 <= val <= n_sites:
        raise InvalidArgument(f"generator index {val} outside 1..{n_sites}")
    if kind == "tau" and val not in (-2, -1, 1, 2):
        raise InvalidArgument(f"translation power must be +-1 or +-2, got {val}")
    if kind not in ("e", "tau", "id"):
        raise InvalidArgument(f"unknown generator kind {kind!r}")
    return kind, val


def _label(kind: str, val: int) -> str:
    if kind == "e":
        return f"e_{val}"
    if kind == "tau":
        return "tau" if val == 1 else f"tau^{val}"
    return "id"


# -- coefficients ------------------------------------------------------------


def _winding_weight(spec: ModuleSpec, params: LatticeParams) -> complex:
    if spec.kind == STANDARD:
        return 2.0 * math.cos(spec.phi / 2.0)
    return params.m


def _coefficient(move: Move, spec: ModuleSpec, n_sites: int, params: LatticeParams, generator: bool) -> complex:
    coef: complex = 1.0
    if move.loops:
        coef *= params.m**move.loops
    if move.windings:
        coef *= _winding_weight(spec, params) ** move.windings
    if move.y_count:
        coef *= params.y**move.y_count
    if move.displacement and spec.phi:
        coef *= cmath.exp(1j * spec.phi * move.displacement / (2 * n_sites))
    if generator and params.convention == NEGATED:
        coef = -coef
    return coef


def _check_member(state: LinkState, spec: ModuleSpec) -> None:
    if not state.is_valid():
        raise InvalidArgument(f"{state} is not a valid link state")
    if state.j not in spec.sectors():
        raise InvalidArgument(f"{state} has j={state.j}, not in module {spec}")
    if spec.is_quotient and state.j == 0 and state.crosses_boundary():
        raise InvalidArgument(f"{state} crosses the boundary; not a basis state of {spec}")


def apply_e(k: int, state: LinkState, spec: ModuleSpec, params: LatticeParams) -> WeightedStates:
    """``e_k`` (1-based) applied to a single link state."""
    _check_member(state, spec)
    parse_generator(("e", k), state.n_sites)
    move = _move_e(state, k - 1, spec)
    if move.target is None:
        return WeightedStates()
    return WeightedStates([(_coefficient(move, spec, state.n_sites, params, True), move.target)])


def apply_tau(power: int, state: LinkState, spec: ModuleSpec, params: LatticeParams) -> WeightedStates:
    """Cyclic shift of every site by ``power`` (+-1 or +-2) to the right."""
    _check_member(state, spec)
    parse_generator(("tau", power), state.n_sites)
    move = _move_tau(state, power, spec)
    return WeightedStates([(_coefficient(move, spec, state.n_sites, params, False), move.target)])


# -- assembly ----------------------------------------------------------------


@dataclass(frozen=True)
class _MoveTable:
    rows: np.ndarray
    cols: np.ndarray
    loops: np.ndarray
    windings: np.ndarray
    y_count: np.ndarray
    displacement: np.ndarray


@functools.lru_cache(maxsize=4096)
def _move_table(basis: Basis, kind: str, val: int) -> _MoveTable:
    rows, cols, loops, wind, ycnt, disp = [], [], [], [], [], []
    for col, state in enumerate(basis.states):
        if kind == "e":
            move = _move_e(state, val - 1, basis.spec)
        elif kind == "tau":
            move = _move_tau(state, val, basis.spec)
        else:
            move = Move(state)
        if move.target is None:
            continue
        try:
            row = basis.index[move.target]
        except KeyError as exc:  # pragma: no cover - would mean a broken move
            raise AssertionError(f"{move.target} escaped basis of {basis.spec}") from exc
        rows.append(row)
        cols.append(col)
        loops.append(move.loops)
        wind.append(move.windings)
        ycnt.append(move.y_count)
        disp.append(move.displacement)
    to = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
    return _MoveTable(to(rows), to(cols), to(loops), to(wind), to(ycnt), to(disp))


def assemble_sparse(generator, basis: Basis, params: LatticeParams) -> sparse.csr_matrix:
    """Sparse matrix of a generator; column ``k`` is its image of ``basis.states[k]``."""
    kind, val = parse_generator(generator, basis.n_sites)
    table = _move_table(basis, kind, val)
    spec, n = basis.spec, basis.n_sites
    coef = np.ones(len(table.rows), dtype=complex)
    if kind == "e":
        coef *= float(params.m) ** table.loops
        coef *= complex(_winding_weight(spec, params)) ** table.windings
        coef *= float(params.y) ** table.y_count
        if params.convention == NEGATED:
            coef = -coef
    if spec.phi:
        coef *= np.exp(1j * spec.phi * table.displacement / (2 * n))
    dim = len(basis)
    return sparse.csr_matrix((coef, (table.rows, table.cols)), shape=(dim, dim))


def assemble(generator, basis: Basis, params: LatticeParams) -> OperatorMatrix:
    kind, val = parse_generator(generator, basis.n_sites)
    data = assemble_sparse((kind, val), basis, params).toarray()
    return OperatorMatrix(_label(kind, val), data, basis)


# -- relation checks ---------------------------------------------------------


@dataclass
class RelationReport:
    """Largest residual of each algebra relation on one basis."""

    residuals: dict[str, float]
    tolerance: float = 1e-12
    skipped: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r < self.tolerance for r in self.residuals.values())

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def failures(self) -> list[str]:
        return [k for k, r in self.residuals.items() if r >= self.tolerance]

    def __str__(self) -> str:
        lines = [f"{k:<22s} {r:.3e} {'ok' if r < self.tolerance else 'FAIL'}" for k, r in self.residuals.items()]
        lines += [f"{k:<22s} skipped" for k in self.skipped]
        return "\n".join(lines)


def verify_relations(basis: Basis, params: LatticeParams, tolerance: float = 1e-12) -> RelationReport:
    """Check the periodic Temperley-Lieb relations as matrix identities.

    With the negated convention the generators satisfy ``e^2 = -m e``; the
    remaining relations are unchanged for even ``N``.  The cubic relation is
    skipped for ``N = 2``, where ``e_1 e_2 e_1`` picks up winding weights.
    """
    n = basis.n_sites
    e = [None] + [assemble_sparse(("e", k), basis, params) for k in range(1, n + 1)]
    tau = assemble_sparse(("tau", 1), basis, params)
    tau_inv = assemble_sparse(("tau", -1), basis, params)
    tau2 = assemble_sparse(("tau", 2), basis, params)
    res: dict[str, float] = {}
    skipped: list[str] = []
    quad = params.m if params.convention == PLAIN else -params.m

    def norm(mat) -> float:
        mat = sparse.csr_matrix(mat)
        return float(abs(mat.data).max()) if mat.nnz else 0.0

    def cyc(k: int) -> int:
        return (k - 1) % n + 1

    res["e^2 = m e"] = max(norm(e[k] @ e[k] - quad * e[k]) for k in range(1, n + 1))
    if n >= 4:
        res["e e+-1 e = e"] = max(
            norm(e[k] @ e[cyc(k + s)] @ e[k] - e[k]) for k in range(1, n + 1) for s in (1, -1)
        )
    else:
        skipped.append("e e+-1 e = e")
    far = [norm(e[i] @ e[j] - e[j] @ e[i]) for i in range(1, n + 1) for j in range(1, n + 1)
           if min((i - j) % n, (j - i) % n) >= 2]
    res["commute at distance"] = max(far, default=0.0)
    if basis.spec.is_glued and params.y != 1.0:
        # y marks odd sites, so only translation by two sites is a symmetry
        tau2_inv = assemble_sparse(("tau", -2), basis, params)
        res["tau^2 e tau^-2"] = max(norm(tau2 @ e[k] @ tau2_inv - e[cyc(k + 2)]) for k in range(1, n + 1))
        skipped.append("tau e tau^-1")
    else:
        res["tau e tau^-1"] = max(norm(tau @ e[k] @ tau_inv - e[cyc(k + 1)]) for k in range(1, n + 1))
    res["tau tau^-1 = 1"] = norm(tau @ tau_inv - sparse.identity(len(basis)))
    prod = e[1]
    for k in range(2, n):
        prod = prod @ e[k]
    res["tau^2 e_N-1 = e_1..e_N-1"] = norm(tau2 @ e[n - 1] - prod) if n >= 3 else 0.0
    if n < 3:
        skipped.append("tau^2 e_N-1 = e_1..e_N-1")
        del res["tau^2 e_N-1 = e_1..e_N-1"]
    return RelationReport(res, tolerance, skipped)
