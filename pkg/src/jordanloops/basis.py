"""Periodic link states and ordered module bases.

A link state on ``N`` sites (``N`` even) pairs some sites by non-crossing arcs
drawn on an annulus and leaves the rest as through-lines ("defects").  An arc is
stored as ``(i, j)``: the curve leaves site ``i`` moving rightward and lands on
site ``j``.  When ``i > j`` the arc wraps past site ``N``.  Sites are 0-based
internally and printed 1-based, e.g. ``(12)(34)`` or ``(4,1)(2)(3)``.

Every link state with ``2j`` defects corresponds to exactly one cyclic word of
``N/2 + j`` openers (or defects) and ``N/2 - j`` closers; enumeration walks
these words.
"""

from __future__ import annotations

import functools
import itertools
import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgument

STANDARD = "standard"
QUOTIENT_ZERO = "quotient-zero"
GLUED = "glued"
GLUED_QUOTIENT = "glued-quotient"
KINDS = (STANDARD, QUOTIENT_ZERO, GLUED, GLUED_QUOTIENT)


def _check_size(n_sites: int) -> None:
    if n_sites < 2 or n_sites % 2:
        raise InvalidArgument(f"number of sites must be a positive even integer, got {n_sites}")


def _check_sector(n_sites: int, j: int) -> None:
    _check_size(n_sites)
    if not 0 <= j <= n_sites // 2:
        raise InvalidArgument(f"sector j={j} outside 0..{n_sites // 2} for N={n_sites}")


@dataclass(frozen=True)
class LinkState:
    n_sites: int
    arcs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(sorted(tuple(a) for a in self.arcs)))

    @classmethod
    def from_partner(cls, partner, opener) -> LinkState:
        """Build from a partner array (-1 for defects) and opener flags."""
        arcs = [(i, p) for i, p in enumerate(partner) if p >= 0 and opener[i]]
        return cls(len(partner), tuple(arcs))

    @cached_property
    def partner(self) -> tuple[int, ...]:
        out = [-1] * self.n_sites
        for i, j in self.arcs:
            out[i] = j
            out[j] = i
        return tuple(out)

    @cached_property
    def opener(self) -> tuple[bool, ...]:
        out = [False] * self.n_sites
        for i, _ in self.arcs:
            out[i] = True
        return tuple(out)

    @cached_property
    def defects(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.partner) if p < 0)

    @property
    def n_through(self) -> int:
        return self.n_sites - 2 * len(self.arcs)

    @property
    def j(self) -> int:
        return self.n_through // 2

    @cached_property
    def word(self) -> tuple[int, ...]:
        """Cyclic word: +1 for openers and defects, -1 for closers."""
        return tuple(-1 if (p >= 0 and not o) else 1 for p, o in zip(self.partner, self.opener))

    def is_valid(self) -> bool:
        """Sites covered exactly once, arcs planar on the annulus."""
        seen = [0] * self.n_sites
        for i, j in self.arcs:
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites) or i == j:
                return False
            seen[i] += 1
            seen[j] += 1
        if any(s > 1 for s in seen):
            return False
        return _state_from_word(self.word) == self

    def crosses_boundary(self) -> bool:
        return any(i > j for i, j in self.arcs)

    def __str__(self) -> str:
        return format_state(self)


def _state_from_word(word) -> LinkState:
    n = len(word)
    partner = [-1] * n
    opener = [False] * n
    stack: list[int] = []
    for step in range(2 * n):
        k = step % n
        if word[k] > 0:
            if step < n:
                stack.append(k)
        elif partner[k] < 0 and stack:
            o = stack.pop()
            partner[o], partner[k] = k, o
            opener[o] = True
    return LinkState.from_partner(partner, opener)


def format_state(s: LinkState, singletons: bool = True) -> str:
    wide = s.n_sites >= 10
    parts = []
    items = [(i, j) for i, j in s.arcs]
    if singletons:
        items += [(d, None) for d in s.defects]
    for i, j in sorted(items, key=lambda t: t[0]):
        if j is None:
            parts.append(f"({i + 1})")
        elif wide:
            parts.append(f"({i + 1},{j + 1})")
        else:
            parts.append(f"({i + 1}{j + 1})")
    return "".join(parts) if parts else "()"


_GROUP = re.compile(r"\(([^()]*)\)")


def parse_state(text: str, n_sites: int) -> LinkState:
    """Parse the pairing notation, e.g. ``(23)(41)`` or ``(4,1)(2)(3)``."""
    _check_size(n_sites)
    arcs = []
    for body in _GROUP.findall(text):
        body = body.strip()
        if not body:
            continue
        if "," in body:
            sites = [int(t) for t in body.split(",")]
        elif n_sites >= 10:
            # wide states write arcs with commas, so a bare number is a defect
            sites = [int(body)]
        else:
            sites = [int(t) for t in body]
        if len(sites) == 2:
            arcs.append((sites[0] - 1, sites[1] - 1))
        elif len(sites) != 1:
            raise InvalidArgument(f"cannot parse group {body!r}")
    state = LinkState(n_sites, tuple(arcs))
    if not state.is_valid():
        raise InvalidArgument(f"{text!r} is not a planar link state on {n_sites} sites")
    return state


@functools.lru_cache(maxsize=None)
def enumerate_sector(n_sites: int, j: int) -> tuple[LinkState, ...]:
    """All link states with exactly ``2j`` through-lines, in canonical order."""
    _check_sector(n_sites, j)
    n_up = n_sites // 2 + j
    states = []
    for ups in itertools.combinations(range(n_sites), n_up):
        word = [-1] * n_sites
        for u in ups:
            word[u] = 1
        states.append(_state_from_word(word))
    return tuple(sorted(states, key=lambda s: s.arcs))


def dim_standard(n_sites: int, j: int) -> int:
    _check_sector(n_sites, j)
    return math.comb(n_sites, n_sites // 2 + j)


def dim_quotient_zero(n_sites: int) -> int:
    _check_size(n_sites)
    return math.comb(n_sites, n_sites // 2) - math.comb(n_sites, n_sites // 2 + 1)


def crosses_boundary(s: LinkState) -> bool:
    return s.crosses_boundary()


def psi_rewire(s: LinkState) -> LinkState:
    """Redraw a defect-free state with the same pairs but no boundary crossing."""
    if s.n_through:
        raise InvalidArgument("psi_rewire acts only on states without through-lines")
    return LinkState(s.n_sites, tuple((min(a), max(a)) for a in s.arcs))


# -- module specifications ---------------------------------------------------


@dataclass(frozen=True)
class ModuleSpec:
    """Which representation a basis spans.

    ``j`` is the through-line pair count for ``standard`` and the maximal one
    for the glued kinds.  ``phi`` is the pseudomomentum of a standard module;
    for ``j = 0`` it sets the non-contractible loop weight ``2 cos(phi/2)``.
    """

    kind: str
    j: int = 0
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown module kind {self.kind!r}")
        if self.j < 0:
            raise InvalidArgument("j must be nonnegative")
        if self.kind != STANDARD and self.phi != 0.0:
            raise InvalidArgument(f"{self.kind} modules carry no pseudomomentum")

    @property
    def is_glued(self) -> bool:
        return self.kind in (GLUED, GLUED_QUOTIENT)

    @property
    def is_quotient(self) -> bool:
        return self.kind in (QUOTIENT_ZERO, GLUED_QUOTIENT)

    def sectors(self) -> tuple[int, ...]:
        if self.kind == STANDARD:
            return (self.j,)
        if self.kind == QUOTIENT_ZERO:
            return (0,)
        return tuple(range(self.j + 1))

    def __str__(self) -> str:
        if self.kind == STANDARD:
            return f"standard:{self.j}:{self.phi:g}"
        if self.kind == QUOTIENT_ZERO:
            return QUOTIENT_ZERO
        return f"{self.kind}:{self.j}"

    @classmethod
    def parse(cls, text: str) -> ModuleSpec:
        """Parse ``standard:J[:PHI]``, ``quotient-zero``, ``glued:J``, ``glued-quotient:J``."""
        parts = text.strip().split(":")
        kind = parts[0]
        try:
            if kind == STANDARD:
                phi = float(parts[2]) if len(parts) > 2 else 0.0
                return cls(STANDARD, int(parts[1]), phi)
            if kind == QUOTIENT_ZERO:
                return cls(QUOTIENT_ZERO)
            if kind in (GLUED, GLUED_QUOTIENT):
                return cls(kind, int(parts[1]))
        except (IndexError, ValueError) as exc:
            raise InvalidArgument(f"cannot parse module spec {text!r}") from exc
        raise InvalidArgument(f"unknown module kind {kind!r}")


def Standard(j: int, phi: float = 0.0) -> ModuleSpec:
    return ModuleSpec(STANDARD, j, phi)


def QuotientZero() -> ModuleSpec:
    return ModuleSpec(QUOTIENT_ZERO)


def Glued(j_max: int) -> ModuleSpec:
    return ModuleSpec(GLUED, j_max)


def GluedQuotient(j_max: int) -> ModuleSpec:
    return ModuleSpec(GLUED_QUOTIENT, j_max)


@dataclass(frozen=True, eq=False)
class Basis:
    spec: ModuleSpec
    n_sites: int
    states: tuple[LinkState, ...]
    order: str = "default"
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {s: k for k, s in enumerate(self.states)})

    def __len__(self) -> int:
        return len(self.states)

    @cached_property
    def sector_of(self):
        """Through-line pair count of each basis state."""
        return np.array([s.j for s in self.states], dtype=int)

    def sector_indices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.sector_of == j)

    def to_json(self) -> dict:
        return {
            "N": self.n_sites,
            "spec": str(self.spec),
            "order": self.order,
            "states": [format_state(s) for s in self.states],
        }


def _appendix_key(n_sites: int):
    # Ascending j; site N counts as position 0 in the sort so that the wrapping
    # arc (N,1) leads its sector.
    def key(s: LinkState):
        return (s.j, tuple(sorted(((i + 1) % n_sites, j + 1) for i, j in s.arcs)))

    return key


@functools.lru_cache(maxsize=64)
def build_basis(spec: ModuleSpec, n_sites: int, order: str = "default") -> Basis:
    """Ordered basis of ``spec`` on ``n_sites`` sites.

    ``order="default"`` blocks sectors by descending ``j``; ``order="appendix"``
    uses ascending ``j`` with the wrapping arc first, which reproduces the
    seven-state ordering commonly printed for the ``N = 4`` glued quotient.
    """
    _check_size(n_sites)
    if order not in ("default", "appendix"):
        raise InvalidArgument(f"unknown basis order {order!r}")
    if spec.j > n_sites // 2:
        raise InvalidArgument(f"j={spec.j} exceeds N/2={n_sites // 2}")
    states: list[LinkState] = []
    for j in spec.sectors():
        sector = enumerate_sector(n_sites, j)
        if j == 0 and spec.is_quotient:
            sector = tuple(s for s in sector if not s.crosses_boundary())
        states.extend(sector)
    if order == "appendix":
        states.sort(key=_appendix_key(n_sites))
    else:
        states.sort(key=lambda s: (-s.j, s.arcs))
    basis = Basis(spec, n_sites, tuple(states), order)
    expected = sum(
        dim_quotient_zero(n_sites) if (j == 0 and spec.is_quotient) else dim_standard(n_sites, j)
        for j in spec.sectors()
    )
    assert len(basis) == expected
    return basis
