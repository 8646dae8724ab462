"""Kac weights, Virasoro characters and torus partition-function bookkeeping.

Double series in ``q`` and ``qbar`` are stored as coefficient arrays on
integer levels above a real prefactor exponent, so non-integer gaps between
sectors never force rounding.  Sums of such series are compared by
collecting monomials whose conformal weights fall in a window.
"""

from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import dim_standard
from .errors import InvalidArgument
from .params import central_charge, loop_weight, param_from_c

__all__ = [
    "ChiralSeries",
    "PartitionTerm",
    "QSeries",
    "SeriesSum",
    "central_charge",
    "dim_irreducible",
    "f_bar_zero",
    "f_sector",
    "kac_character",
    "kac_weight",
    "loop_weight",
    "multiplicity_D",
    "param_from_c",
    "partition_numbers",
    "partition_series",
    "partition_terms",
    "resonance",
    "weight_w",
]


def kac_weight(r: float, s: float, x: float) -> float:
    if x <= 0:
        raise InvalidArgument("x must be positive")
    return ((r * (x + 1.0) - s * x) ** 2 - 1.0) / (4.0 * x * (x + 1.0))


@functools.lru_cache(maxsize=None)
def _partitions(cutoff: int) -> tuple[int, ...]:
    # Euler's pentagonal recurrence
    p = [1] + [0] * cutoff
    for n in range(1, cutoff + 1):
        k, total = 1, 0
        while True:
            for g in (k * (3 * k - 1) // 2, k * (3 * k + 1) // 2):
                if g > n:
                    break
                total += (-1) ** (k + 1) * p[n - g]
            if k * (3 * k - 1) // 2 > n:
                break
            k += 1
        p[n] = total
    return tuple(p)


def partition_numbers(cutoff: int) -> np.ndarray:
    """Coefficients of ``1/P(q)`` up to ``q^cutoff``."""
    if cutoff < 0:
        raise InvalidArgument("cutoff must be nonnegative")
    return np.array(_partitions(cutoff), dtype=float)


@dataclass(frozen=True)
class ChiralSeries:
    """``q^{h - c/24} * sum_n a_n q^n`` for ``n <= cutoff``."""

    h: float
    c: float
    coefficients: np.ndarray

    @property
    def cutoff(self) -> int:
        return len(self.coefficients) - 1

    @property
    def exponent(self) -> float:
        return self.h - self.c / 24.0

    def times(self, other: ChiralSeries) -> QSeries:
        """Holomorphic ``self`` times antiholomorphic ``other``."""
        return QSeries(self.h, other.h, self.c, np.outer(self.coefficients, other.coefficients))


@dataclass(frozen=True)
class QSeries:
    """``q^{h - c/24} qbar^{hbar - c/24} * sum a_{n,nbar} q^n qbar^nbar``."""

    h: float
    hbar: float
    c: float
    coefficients: np.ndarray

    @property
    def cutoff(self) -> int:
        return min(self.coefficients.shape) - 1

    @property
    def exponents(self) -> tuple[float, float]:
        return (self.h - self.c / 24.0, self.hbar - self.c / 24.0)

    def monomials(self):
        """Yield ``(weight, antiweight, coefficient)`` for nonzero entries."""
        for (n, nb), a in np.ndenumerate(self.coefficients):
            if a != 0:
                yield self.h + n, self.hbar + nb, float(a)


@dataclass
class SeriesSum:
    """Linear combination of :class:`QSeries` with possibly different prefactors."""

    terms: list[tuple[float, QSeries]] = field(default_factory=list)

    def add(self, coef: float, series: QSeries) -> None:
        self.terms.append((coef, series))

    def __add__(self, other: SeriesSum) -> SeriesSum:
        return SeriesSum(self.terms + other.terms)

    def __sub__(self, other: SeriesSum) -> SeriesSum:
        return SeriesSum(self.terms + [(-c, s) for c, s in other.terms])

    def scaled(self, coef: float) -> SeriesSum:
        return SeriesSum([(coef * c, s) for c, s in self.terms])

    def collect(self, window: float, decimals: int = 9, prune: float = 1e-12) -> dict[tuple[float, float], float]:
        """Monomials with both weights ``<= window``, merged by rounded weight pair."""
        out: dict[tuple[float, float], float] = {}
        for coef, s in self.terms:
            if s.h + s.coefficients.shape[0] <= window + 1e-9:
                raise InvalidArgument(f"series at h={s.h:.4g} truncated below window {window}")
            if s.hbar + s.coefficients.shape[1] <= window + 1e-9:
                raise InvalidArgument(f"series at hbar={s.hbar:.4g} truncated below window {window}")
            for w, wb, a in s.monomials():
                if w <= window + 1e-12 and wb <= window + 1e-12:
                    key = (round(w, decimals), round(wb, decimals))
                    out[key] = out.get(key, 0.0) + coef * a
        return {k: v for k, v in sorted(out.items()) if abs(v) > prune}

    def leading(self) -> tuple[float, float]:
        """Prefactor pair of the term with the smallest total weight."""
        best = min(self.terms, key=lambda t: t[1].h + t[1].hbar)
        return (best[1].h, best[1].hbar)


def _levels(h: float, window: float) -> int:
    return max(0, int(math.floor(window - h + 1e-9)))


def kac_character(r: int, s: int, x: float, cutoff: int) -> ChiralSeries:
    """``K_{r,s} = q^{h_{r,s} - c/24} (1 - q^{rs}) / P(q)`` to level ``cutoff``."""
    if r < 1 or s < 1 or int(r) != r or int(s) != s:
        raise InvalidArgument("Kac characters need positive integer r, s")
    if cutoff < 0:
        raise InvalidArgument("cutoff must be nonnegative")
    p = partition_numbers(cutoff)
    coeffs = p.copy()
    rs = int(r * s)
    if rs <= cutoff:
        coeffs[rs:] -= p[: cutoff + 1 - rs]
    return ChiralSeries(kac_weight(r, s, x), central_charge(x), coeffs)


def _pair(h: float, hbar: float, c: float, window: float) -> QSeries | None:
    if h > window or hbar > window:
        return None
    n, nb = _levels(h, window), _levels(hbar, window)
    coeffs = np.outer(partition_numbers(n), partition_numbers(nb))
    return QSeries(h, hbar, c, coeffs)


def f_sector(j: int, phi: float, x: float, cutoff: float, e_range: int | None = None) -> SeriesSum:
    """``F_{j, e^{i phi}}`` with monomials kept up to weight ``cutoff`` in each chirality.

    Terms ``q^{h_{e-e_phi,-j}} qbar^{h_{e-e_phi,j}} / (P(q) P(qbar))``,
    ``e_phi = phi / 2 pi``, for ``|e| <= e_range``.
    """
    if j < 0:
        raise InvalidArgument("j must be nonnegative")
    if e_range is None:
        e_range = int(math.ceil(cutoff)) + j + 2
    c = central_charge(x)
    e_phi = phi / (2.0 * math.pi)
    out = SeriesSum()
    for e in range(-e_range, e_range + 1):
        r = e - e_phi
        term = _pair(kac_weight(r, -j, x), kac_weight(r, j, x), c, cutoff)
        if term is not None:
            out.add(1.0, term)
    # weights grow quadratically in e; the next ring must be out of the window
    for e in (-e_range - 1, e_range + 1):
        r = e - e_phi
        if min(kac_weight(r, -j, x), kac_weight(r, j, x)) <= cutoff and max(
            kac_weight(r, -j, x), kac_weight(r, j, x)
        ) <= cutoff:
            raise InvalidArgument(f"e_range {e_range} too small for cutoff {cutoff}")
    return out


def f_bar_zero(x: float, cutoff: float) -> SeriesSum:
    """``sum_{n >= 1} K_{n,1} Kbar_{n,1}`` within the weight window."""
    out = SeriesSum()
    n = 1
    while kac_weight(n, 1, x) <= cutoff:
        h = kac_weight(n, 1, x)
        k = kac_character(n, 1, x, _levels(h, cutoff))
        out.add(1.0, k.times(k))
        n += 1
    return out


def weight_w(j: int, d: int, x: float) -> float:
    """``w(j,d) = q^{2d} + q^{-2d} + (-1)^d (Q - 1)`` with ``q = e^{i gamma}``, ``Q = m^2``."""
    gamma = math.pi / (x + 1.0)
    Q = loop_weight(x) ** 2
    return 2.0 * math.cos(2.0 * d * gamma) + (-1) ** d * (Q - 1.0)


def multiplicity_D(j: int, K: float, x: float) -> float:
    """``D_{j,K} = (1/j) sum_{r<j} e^{2iKr} w(j, gcd(j, r))`` (``gcd(j, 0) = j``)."""
    if j < 1:
        raise InvalidArgument("D_{j,K} needs j >= 1")
    total = sum(cmath.exp(2j * K * r) * weight_w(j, math.gcd(j, r), x) for r in range(j))
    total /= j
    if abs(total.imag) > 1e-10 * max(1.0, abs(total)):
        raise InvalidArgument(f"D_{{{j},{K}}} has imaginary part {total.imag:.3e}")
    return float(total.real)


def resonance(j: int, phi: float, x: float, k_max: int = 10_000, tol: float = 1e-10) -> tuple[bool, int | None]:
    """Whether ``e^{i phi} = q^{2j + 2k}`` for some positive integer ``k <= k_max``."""
    gamma = math.pi / (x + 1.0)
    target = cmath.exp(1j * phi)
    for k in range(1, k_max + 1):
        if abs(cmath.exp(1j * gamma * (2 * j + 2 * k)) - target) < tol:
            return True, k
    return False, None


def dim_irreducible(n_sites: int, j: int, k: int = 1) -> int:
    """``dbar_j = dhat_j - dhat_{j+k}`` (zero past the last sector)."""
    upper = dim_standard(n_sites, j + k) if j + k <= n_sites // 2 else 0
    return dim_standard(n_sites, j) - upper


@dataclass
class PartitionTerm:
    label: str
    coefficient: float
    series: SeriesSum


def partition_terms(x: float, cutoff: float, j_max: int | None = None) -> list[PartitionTerm]:
    """Sector decomposition of the torus partition function, quotient form.

    ``Fbar_0 + (Q-1)/2 F_{0,-1} + (1 + D_{1,0}) F_{1,1} + sum_{j>1} D_{j,0} F_{j,1}
    + sum D_{j, pi p/k} F_{j, e^{2 pi i p/k}}``.  ``j`` runs until no sector
    has a monomial inside the window.
    """
    Q = loop_weight(x) ** 2
    terms = [
        PartitionTerm("Fbar_0", 1.0, f_bar_zero(x, cutoff)),
        PartitionTerm("F_0,-1", (Q - 1.0) / 2.0, f_sector(0, math.pi, x, cutoff)),
        PartitionTerm("F_1,1", 1.0 + multiplicity_D(1, 0.0, x), f_sector(1, 0.0, x, cutoff)),
    ]
    j = 2
    while j_max is None or j <= j_max:
        sector = f_sector(j, 0.0, x, cutoff)
        twisted = []
        for k in range(2, j + 1):
            if j % k:
                continue
            for p in range(1, k):
                if math.gcd(p, k) != 1:
                    continue
                twisted.append(
                    PartitionTerm(
                        f"F_{j},e^(2pi i {p}/{k})",
                        multiplicity_D(j, math.pi * p / k, x),
                        f_sector(j, 2.0 * math.pi * p / k, x, cutoff),
                    )
                )
        if j_max is None and not sector.terms and not any(t.series.terms for t in twisted):
            break
        terms.append(PartitionTerm(f"F_{j},1", multiplicity_D(j, 0.0, x), sector))
        terms.extend(twisted)
        j += 1
    return terms


def partition_series(x: float, cutoff: float) -> dict[tuple[float, float], float]:
    total = SeriesSum()
    for t in partition_terms(x, cutoff):
        total = total + t.series.scaled(t.coefficient)
    return total.collect(cutoff)
