"""Emerging Jordan cells and indecomposability parameters.

A diagonalizable lattice operator can approach a Jordan cell as the system
grows: two eigenvectors ``psi`` and ``psi'`` become parallel.  Their
alignment is measured by ``J = |(psi|psi')| / (|psi| |psi'|)``.  The
component of ``psi'`` orthogonal to ``psi``, rescaled so that
``(psi|H0|psi~) = 2``, plays the role of the Jordan partner, and the
logarithmic coupling is estimated as

    b = |<psi~|A|Phi>|^2 / <psi~|psi>

with loop scalar products, ``A`` the null-descent operator and ``Phi`` the
primary the cell is built on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import OperatorMatrix
from .basis import Basis, GluedQuotient
from .characters import kac_weight
from .errors import DegenerateMeasurement, InvalidArgument, LimitFailure
from .inner import GramMatrix, gram, loop_norm, sign_corrected_ratio
from .koosaleur import LEFT, generators_sparse, h0, h_n_sparse, koo_saleur_sparse
from .params import LatticeParams
from .spectral import FieldTag, SpectralDatum, TagFailure, identify_fields

__all__ = [
    "BMeasurement",
    "BttLimit",
    "JordanProbe",
    "LoopNormRecord",
    "emerging_jordan_vector",
    "gram_schmidt",
    "j_measure",
    "loop_norm_decay",
    "measure_b",
    "measure_b_Tt",
    "measure_b_Tt_limit",
    "measure_b_tagged",
    "null_descent_operator",
    "probe",
]

NORMALIZATION_FLOOR = 1e-13
DENOMINATOR_FLOOR = 1e-13


def _vec(v) -> np.ndarray:
    if isinstance(v, SpectralDatum):
        return np.asarray(v.eigenvector, dtype=complex)
    if isinstance(v, FieldTag):
        return np.asarray(v.datum.eigenvector, dtype=complex)
    return np.asarray(v, dtype=complex)


def _mat(op):
    if isinstance(op, OperatorMatrix):
        return op.data
    if isinstance(op, GramMatrix):
        return op.data
    return op


def j_measure(u, v) -> float:
    """``|(u|v)| / (|u| |v|)`` with the Euclidean product, clipped to ``[0, 1]``."""
    u, v = _vec(u), _vec(v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise InvalidArgument("J is undefined for a zero vector")
    return float(min(1.0, abs(np.vdot(u, v)) / (nu * nv)))


def gram_schmidt(u, v) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean Gram-Schmidt of the ordered pair ``(u, v)``; both outputs unit length."""
    u, v = _vec(u), _vec(v)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise InvalidArgument("first vector is zero")
    u_hat = u / nu
    w = v - np.vdot(u_hat, v) * u_hat
    nw = np.linalg.norm(w)
    if nw <= NORMALIZATION_FLOOR * max(1.0, np.linalg.norm(v)):
        raise InvalidArgument("vectors are linearly dependent")
    return u_hat, w / nw


def emerging_jordan_vector(psi, psi_prime, H0) -> np.ndarray:
    """``psi~`` orthogonal to ``psi`` with ``(psi|H0|psi~) = 2``.

    ``psi`` is Euclidean-normalized first.  The complex rescaling makes the
    result independent of the scale and phase of ``psi_prime``.
    """
    psi, psi_prime = _vec(psi), _vec(psi_prime)
    psi = psi / np.linalg.norm(psi)
    tilde = psi_prime - np.vdot(psi, psi_prime) * psi
    scale = np.vdot(psi, _mat(H0) @ tilde)
    if abs(scale) < NORMALIZATION_FLOOR * max(1.0, np.linalg.norm(tilde)):
        raise DegenerateMeasurement("(psi|H0|psi~) vanishes; the pair is parallel or decoupled", worst=abs(scale))
    return tilde * (2.0 / scale)


@dataclass
class JordanProbe:
    psi: SpectralDatum
    psi_prime: SpectralDatum
    J: float
    psi_tilde: np.ndarray
    normalization: dict = field(default_factory=dict)


def probe(psi: SpectralDatum, psi_prime: SpectralDatum, H0) -> JordanProbe:
    tilde = emerging_jordan_vector(psi, psi_prime, H0)
    unit = _vec(psi) / np.linalg.norm(_vec(psi))
    return JordanProbe(
        psi,
        psi_prime,
        j_measure(psi, psi_prime),
        tilde,
        {"psi_H0_tilde": complex(np.vdot(unit, _mat(H0) @ tilde)), "tilde_norm": float(np.linalg.norm(tilde))},
    )


def null_descent_operator(kind, basis: Basis, params: LatticeParams, chiral: bool = False, gens=None):
    """Sparse ``A`` creating the singular descendant of the primary.

    ``(1,1)`` gives ``H_{-1}``, ``(1,2)`` gives
    ``H_{-2} - 3/(2(2h_{1,2}+1)) H_{-1}^2`` and ``"Tt"`` gives ``H_{-2}``.
    With ``chiral=True`` the single-chirality ``L_{-n}`` replace ``H_{-n}``.
    """
    e = generators_sparse(basis, params) if gens is None else gens

    def gen(n):
        return koo_saleur_sparse(n, LEFT, basis, params, e) if chiral else h_n_sparse(n, basis, params, e)

    if kind in ("Tt", "tt", "T"):
        return gen(-2)
    kind = tuple(kind)
    if kind == (1, 1):
        return gen(-1)
    if kind == (1, 2):
        coef = descent_coefficient(params)
        h1 = gen(-1)
        return (gen(-2) + coef * (h1 @ h1)).tocsr()
    raise InvalidArgument(f"unknown null-descent kind {kind!r}")


def descent_coefficient(params: LatticeParams) -> float:
    """``-3 / (2 (2 h_{1,2} + 1))`` at the current Kac parameter."""
    if params.x is None:
        raise InvalidArgument("the (1,2) descent needs the Kac parameter x")
    denom = 2.0 * (2.0 * kac_weight(1, 2, params.x) + 1.0)
    if abs(denom) < 1e-14:
        raise InvalidArgument("2 h_{1,2} + 1 = 0: the (1,2) descent has a pole here")
    return -3.0 / denom


@dataclass
class BMeasurement:
    L: int
    c: float
    module: str
    pair: tuple[str, str]
    b1: complex
    b2: complex
    loop_norm_psi: complex
    J: float
    numerator: tuple[complex, complex]
    denominator: tuple[complex, complex]
    phi_norm_sign: complex


def _one_ordering(psi, psi_prime, phi_unit, phi_sign, A, G, H0):
    tilde = emerging_jordan_vector(psi, psi_prime, H0)
    G = _mat(G)
    unit = _vec(psi) / np.linalg.norm(_vec(psi))
    overlap = complex(np.conj(tilde) @ (G @ unit))
    if abs(overlap) < DENOMINATOR_FLOOR:
        raise DegenerateMeasurement("<psi~|psi> below floor", worst=abs(overlap))
    num = abs(complex(np.conj(tilde) @ (G @ (A @ phi_unit)))) ** 2
    return sign_corrected_ratio(num, overlap, phi_sign, floor=DENOMINATOR_FLOOR), num, overlap


def measure_b(
    pair,
    phi,
    A,
    G,
    H0,
    labels=("psi", "psi_prime"),
    L: int | None = None,
    c: float = float("nan"),
    module: str = "",
) -> BMeasurement:
    """Both orderings of the b estimate for ``pair = (psi, psi_prime)``.

    ``Phi`` is rescaled to ``|<Phi|Phi>| = 1``; the remaining sign of its
    loop norm is divided out of the ratio.
    """
    psi, psi_prime = (_vec(p) for p in pair)
    phi = _vec(phi)
    A = _mat(A)
    nphi = loop_norm(phi, G)
    if abs(nphi) < DENOMINATOR_FLOOR:
        raise DegenerateMeasurement("<Phi|Phi> below floor", worst=abs(nphi))
    phi_unit = phi / math.sqrt(abs(nphi))
    sign = nphi / abs(nphi)
    b1, n1, d1 = _one_ordering(psi, psi_prime, phi_unit, sign, A, G, H0)
    b2, n2, d2 = _one_ordering(psi_prime, psi, phi_unit, sign, A, G, H0)
    unit = psi / np.linalg.norm(psi)
    return BMeasurement(
        L=L if L is not None else -1,
        c=c,
        module=module,
        pair=tuple(labels),
        b1=complex(b1),
        b2=complex(b2),
        loop_norm_psi=loop_norm(unit, G),
        J=j_measure(psi, psi_prime),
        numerator=(n1, n2),
        denominator=(d1, d2),
        phi_norm_sign=complex(sign),
    )


_PAIRS = {
    (1, 1): ("alpha", "beta", "Phi11"),
    (1, 2): ("mu", "nu", "Phi12"),
}


def measure_b_tagged(kind, n_sites: int, params: LatticeParams, tags: dict | None = None, chiral: bool = False) -> BMeasurement:
    """b for the ``(1,1)`` pair ``(alpha, beta)`` or the ``(1,2)`` pair ``(mu, nu)``."""
    kind = tuple(kind)
    if kind not in _PAIRS:
        raise InvalidArgument(f"unknown pair kind {kind!r}")
    a, b, f = _PAIRS[kind]
    tags = tags if tags is not None else identify_fields(n_sites, params, (a, b, f))
    for name in (a, b, f):
        if not tags.get(name):
            reason = tags[name].reason if isinstance(tags.get(name), TagFailure) else "missing"
            raise DegenerateMeasurement(f"tag {name} unresolved: {reason}")
    basis = tags[a].basis
    G = gram(basis, "loop", params)
    H0 = h0(basis, params).data
    A = null_descent_operator(kind, basis, params, chiral)
    return measure_b(
        (tags[a].datum, tags[b].datum), tags[f].datum, A, G, H0, (a, b), n_sites // 2, params.c, str(basis.spec)
    )


def measure_b_Tt(n_sites: int, params: LatticeParams, chiral: bool = False) -> BMeasurement:
    """b for ``(T, T')`` in the glued module with ``Phi = I`` and ``A = H_{-2}``."""
    tags = identify_fields(n_sites, params, ("I", "T", "Tprime"))
    for name in ("I", "T", "Tprime"):
        if not tags.get(name):
            raise DegenerateMeasurement(f"tag {name} unresolved: {tags[name].reason}")
    basis = tags["I"].basis
    G = gram(basis, "loop", params)
    H0 = h0(basis, params).data
    A = null_descent_operator("Tt", basis, params, chiral)
    return measure_b(
        (tags["T"].datum, tags["Tprime"].datum),
        tags["I"].datum,
        A,
        G,
        H0,
        ("T", "Tprime"),
        n_sites // 2,
        params.c,
        str(GluedQuotient(2)),
    )


@dataclass
class BttLimit:
    L: int
    b: float
    b1_limit: complex
    b2_limit: complex
    samples: list[tuple[float, complex, complex]]
    residual: float
    sensitivity: float

    @property
    def gap(self) -> float:
        return abs(self.b1_limit - self.b2_limit)


def default_c_sequence(k_range=range(3, 9)) -> list[float]:
    """``c = +-10^-k pi``, approaching zero from both sides."""
    return [s * math.pi * 10.0 ** (-k) for k in k_range for s in (1.0, -1.0)]


def _poly_limit(cs, values, degree: int):
    cs = np.asarray(cs, dtype=float)
    values = np.asarray(values, dtype=complex)
    V = np.vander(cs, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, values, rcond=None)
    resid = float(np.linalg.norm(V @ coef - values))
    return coef[0], resid


def measure_b_Tt_limit(
    n_sites: int,
    c_sequence=None,
    degree: int = 2,
    tolerance: float = 1e-6,
    chiral: bool = False,
) -> BttLimit:
    """``lim_{c -> 0}`` of the ``(T, T')`` measurement.

    Samples on both sides of ``c = 0`` are fitted by a polynomial in ``c``;
    its constant term is the limit (the symmetric samples cancel the odd
    orders, as in Richardson extrapolation).  Dropping the samples farthest
    from zero gives the sensitivity.  The two orderings must agree within
    ``tolerance`` at the limit.
    """
    cs = list(default_c_sequence() if c_sequence is None else c_sequence)
    if any(c == 0 for c in cs):
        raise InvalidArgument("c = 0 itself is excluded; the limit is taken from generic values")
    if len(cs) < degree + 1:
        raise InvalidArgument(f"need at least {degree + 1} samples for a degree-{degree} fit")
    samples = []
    for c in cs:
        m = measure_b_Tt(n_sites, LatticeParams.from_c(c), chiral)
        samples.append((c, m.b1, m.b2))
    cs_arr = [s[0] for s in samples]
    l1, r1 = _poly_limit(cs_arr, [s[1] for s in samples], degree)
    l2, r2 = _poly_limit(cs_arr, [s[2] for s in samples], degree)
    order = np.argsort(np.abs(cs_arr))
    keep = order[: max(degree + 1, len(order) - 2)]
    l1_inner, _ = _poly_limit([cs_arr[k] for k in keep], [samples[k][1] for k in keep], degree)
    gap = abs(l1 - l2)
    if gap > tolerance:
        raise LimitFailure(f"orderings disagree at the limit: |b1 - b2| = {gap:.3e}", worst=gap)
    return BttLimit(
        L=n_sites // 2,
        b=float(np.real(0.5 * (l1 + l2))),
        b1_limit=complex(l1),
        b2_limit=complex(l2),
        samples=samples,
        residual=max(r1, r2),
        sensitivity=float(abs(l1 - l1_inner)),
    )


_REFERENCE = {"alpha": "Phi11", "beta": "Phi11", "mu": "Phi12", "nu": "Phi12", "T": "I", "Tprime": "I"}


@dataclass
class LoopNormRecord:
    N: int
    raw: complex | None
    relative: complex | None
    reference: str | None
    failure: TagFailure | None = None


def loop_norm_decay(tag: str, n_list, params: LatticeParams) -> list[LoopNormRecord]:
    """``<psi|psi>_loop`` of the Euclidean-normalized tagged state at each size.

    Entries of the loop Gram matrix grow exponentially with ``N``, so the raw
    value is also reported divided by ``|<Phi|Phi>_loop|`` of the primary the
    Jordan cell is built on (same Euclidean normalization).  That ratio is
    the loop norm in the units used by :func:`measure_b`.
    """
    ref = _REFERENCE.get(tag)
    out = []
    for n in n_list:
        names = (tag, ref) if ref else (tag,)
        tags = identify_fields(n, params, names)
        bad = next((tags.get(t) for t in names if not tags.get(t)), None)
        if bad is not None or tag not in tags:
            fail = bad if isinstance(bad, TagFailure) else TagFailure(tag, "missing")
            out.append(LoopNormRecord(n, None, None, ref, fail))
            continue
        G = gram(tags[tag].basis, "loop", params)
        v = _vec(tags[tag].datum)
        raw = loop_norm(v / np.linalg.norm(v), G)
        rel = None
        if ref:
            w = _vec(tags[ref].datum)
            rel = raw / abs(loop_norm(w / np.linalg.norm(w), G))
        out.append(LoopNormRecord(n, raw, rel, ref))
    return out


def closed_form_b_L2(m: float) -> float:
    """``b^(1)`` of the ``(T, T')`` pair at ``N = 4`` as a function of the negated loop weight."""
    params = LatticeParams.from_loop_weight(m, "negated")
    return -8.0 * (1.0 - m) / (math.pi * params.v_F)


def closed_form_b_L3(m: float) -> float:
    """``b^(1)`` of the ``(T, T')`` pair at ``N = 6``."""
    params = LatticeParams.from_loop_weight(m, "negated")
    poly = 4.0 * m * m + 2.0 * m * (2.0 * m * m - 9.0) / math.sqrt(m * m + 48.0) - 6.0
    return 3.0 / (math.pi * params.v_F) * poly / (1.0 + m)
