"""Loop and Euclidean scalar products on link-state modules.

The loop overlap ``<u|v>`` glues the mirror image of ``u`` on top of ``v``
and weighs every closed loop by ``m``.  The combinatorial part (loop counts,
windings, through-line displacement, forbidden connections) depends only on
the basis, so it is traced once for all pairs and cached; weights are applied
afterwards.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .basis import STANDARD, Basis, LinkState, ModuleSpec
from .errors import DegenerateMeasurement, InvalidArgument
from .params import LatticeParams

LOOP = "loop"
EUCLIDEAN = "euclidean"

__all__ = [
    "EUCLIDEAN",
    "LOOP",
    "GramMatrix",
    "gram",
    "loop_norm",
    "loop_overlap",
    "loop_product",
    "sign_corrected_ratio",
]


@dataclass(frozen=True, eq=False)
class GramMatrix:
    kind: str
    data: np.ndarray
    basis: Basis | None = None

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.data))


@dataclass(frozen=True)
class _OverlapTable:
    loops: np.ndarray
    windings: np.ndarray
    forbidden: np.ndarray
    displacement: np.ndarray


def _arrays(states, n: int):
    partner = np.full((len(states), n), -1, dtype=np.int64)
    step = np.zeros((len(states), n), dtype=np.int64)
    for r, s in enumerate(states):
        for i, j in s.arcs:
            partner[r, i], partner[r, j] = j, i
            step[r, i] = (j - i) % n
            step[r, j] = -((j - i) % n)
    return partner, step


def _trace(u_partner, u_step, v_partner, v_step, n: int, glued: bool, symmetric: bool = False) -> _OverlapTable:
    """Overlaps of every ``u`` row against every ``v`` row, shape ``(len(u), len(v))``.

    With ``symmetric=True`` (``u`` and ``v`` the same list) only pairs with
    ``a <= b`` are traced: swapping the two states reverses every path, so
    counts are shared and displacements change sign.
    """
    nu, nv = u_partner.shape[0], v_partner.shape[0]
    if symmetric:
        ui, vi = np.triu_indices(nu)
    else:
        ui, vi = (g.ravel() for g in np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij"))
    loops, wind, bad, disp = _trace_pairs(
        u_partner.ravel(), u_step.ravel(), v_partner.ravel(), v_step.ravel(), ui * n, vi * n, n
    )
    if not glued:
        bad |= (u_partner < 0).sum(axis=1)[ui] != (v_partner < 0).sum(axis=1)[vi]
    else:
        bad[:] = False
    out = []
    for vals, sign in ((loops, 1), (wind, 1), (bad, 1), (disp, -1)):
        full = np.zeros((nu, nv), dtype=vals.dtype)
        full[ui, vi] = vals
        if symmetric:
            full[vi, ui] = -vals if sign < 0 else vals
        out.append(full)
    return _OverlapTable(*out)


def _trace_pairs(up, us, vp, vs, uoff, voff, n: int):
    """Trace all pairs given flat partner/step tables and per-pair row offsets.

    Walks alternate a bottom (``v``) arc and a top (``u``) arc.  Only pairs
    still in motion are kept in the working arrays.
    """
    size = len(uoff)
    loops = np.zeros(size, dtype=np.int16)
    wind = np.zeros(size, dtype=np.int16)
    bad = np.zeros(size, dtype=bool)
    disp = np.zeros(size, dtype=np.int32)
    for s in range(n):
        # closed loops through s, counted once at their smallest site
        idx = np.flatnonzero((up[uoff + s] >= 0) & (vp[voff + s] >= 0))
        pos = np.full(len(idx), s)
        d = np.zeros(len(idx), dtype=np.int64)
        lowest = pos.copy()
        while len(idx):
            at = voff[idx] + pos
            d += vs[at]
            pos = vp[at]
            at = uoff[idx] + pos
            nxt = up[at]
            keep = nxt >= 0  # a top through-line means s lies on an open path
            idx, at, d, lowest = idx[keep], at[keep], d[keep], np.minimum(lowest[keep], pos[keep])
            d += us[at]
            pos = nxt[keep]
            lowest = np.minimum(lowest, pos)
            back = pos == s
            if back.any():
                counted = back & (lowest == s)
                loops[idx[counted]] += 1
                wind[idx[counted & (d != 0)]] += 1
            keep = ~back & (vp[voff[idx] + pos] >= 0)
            idx, pos, d, lowest = idx[keep], pos[keep], d[keep], lowest[keep]
        # open path leaving the bottom through-line at s
        idx = np.flatnonzero(vp[voff + s] < 0)
        pos = np.full(len(idx), s)
        d = np.zeros(len(idx), dtype=np.int64)
        while len(idx):
            at = uoff[idx] + pos
            nxt = up[at]
            top = nxt < 0  # reached a top through-line
            if top.any():
                disp[idx[top]] += d[top].astype(np.int32)
            keep = ~top
            idx, d = idx[keep], d[keep] + us[at[keep]]
            pos = nxt[keep]
            at = voff[idx] + pos
            nxt = vp[at]
            low = nxt < 0  # returned to a bottom through-line
            bad[idx[low]] = True
            keep = ~low
            idx, d = idx[keep], d[keep] + vs[at[keep]]
            pos = nxt[keep]
    return loops, wind, bad, disp


@functools.lru_cache(maxsize=32)
def _overlap_table(basis: Basis) -> _OverlapTable:
    partner, step = _arrays(basis.states, basis.n_sites)
    return _trace(partner, step, partner, step, basis.n_sites, basis.spec.is_glued, symmetric=True)


def _winding_weight(spec: ModuleSpec, params: LatticeParams) -> float:
    if spec.kind == STANDARD:
        return 2.0 * np.cos(spec.phi / 2.0)
    return params.m


def _weigh(table: _OverlapTable, spec: ModuleSpec, n: int, params: LatticeParams) -> np.ndarray:
    w = _winding_weight(spec, params)
    out = np.power(float(params.m), table.loops - table.windings).astype(complex)
    out *= np.power(complex(w), table.windings)
    if spec.phi and spec.kind == STANDARD:
        out *= np.exp(1j * spec.phi * table.displacement / (2 * n))
    out[table.forbidden] = 0.0
    return out


def loop_overlap(u: LinkState, v: LinkState, spec: ModuleSpec, params: LatticeParams) -> complex:
    """``<u|v>``: mirror of ``u`` glued on top of ``v``."""
    if u.n_sites != v.n_sites:
        raise InvalidArgument("states live on different numbers of sites")
    for s in (u, v):
        if not s.is_valid() or s.j not in spec.sectors():
            raise InvalidArgument(f"{s} is not a state of module {spec}")
    if spec.kind == STANDARD and u.j != v.j:
        raise InvalidArgument("standard-module states must have equal through-line counts")
    n = u.n_sites
    up, us = _arrays([u], n)
    vp, vs = _arrays([v], n)
    table = _trace(up, us, vp, vs, n, spec.is_glued)
    return complex(_weigh(table, spec, n, params)[0, 0])


def gram(basis: Basis, kind: str = LOOP, params: LatticeParams | None = None) -> GramMatrix:
    """Gram matrix ``G[a, b] = <basis[a]|basis[b]>``."""
    if kind == EUCLIDEAN:
        return GramMatrix(EUCLIDEAN, np.eye(len(basis), dtype=complex), basis)
    if kind != LOOP:
        raise InvalidArgument(f"unknown scalar product {kind!r}")
    if params is None:
        raise InvalidArgument("the loop product needs lattice parameters")
    table = _overlap_table(basis)
    return GramMatrix(LOOP, _weigh(table, basis.spec, basis.n_sites, params), basis)


def loop_product(a, b, g) -> complex:
    """Sesquilinear ``conj(a)^T G b``; ``g`` is a :class:`GramMatrix` or an array."""
    mat = g.data if isinstance(g, GramMatrix) else np.asarray(g)
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[0] != mat.shape[0] or b.shape[0] != mat.shape[1]:
        raise InvalidArgument(f"vector sizes {a.shape}, {b.shape} do not match Gram {mat.shape}")
    return complex(np.conj(a) @ (mat @ b))


def loop_norm(a, g) -> complex:
    return loop_product(a, a, g)


def sign_corrected_ratio(numerator: complex, overlap: complex, ground_norm: complex, floor: float = 1e-14) -> complex:
    """``numerator / (overlap * <I|I>)`` with ``<I|I>`` normalized to a unit-modulus sign.

    The loop norm of the ground state alternates as ``(-1)^L`` under the
    negated convention; dividing by it restores the sign the continuum
    expects.
    """
    sign = ground_norm / abs(ground_norm) if abs(ground_norm) > floor else None
    if sign is None or abs(overlap) < floor:
        raise DegenerateMeasurement("denominator of the ratio vanishes", worst=min(abs(overlap), abs(ground_norm)))
    return numerator / (overlap * sign)
