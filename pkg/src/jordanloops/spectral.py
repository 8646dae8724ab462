"""Eigendecomposition, momentum sectors, field tagging and state tracking.

Translation acts on a link-state basis as a monomial matrix, so its
eigenspaces are spanned by explicit orbit sums.  Operators commuting with
translation are diagonalized sector by sector, which both shrinks the dense
problems and keeps degenerate ``+p``/``-p`` partners from mixing.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse

from .algebra import OperatorMatrix, assemble_sparse
from .basis import Basis, GluedQuotient, QuotientZero, Standard, build_basis
from .characters import kac_weight
from .errors import InvalidArgument, NumericalFailure
from .koosaleur import generators_sparse, h0, hamiltonian_sparse, momentum_label, translation_power
from .params import LatticeParams

__all__ = [
    "DefectiveCluster",
    "FieldTag",
    "MomentumSector",
    "SpectralDatum",
    "Spectrum",
    "TagFailure",
    "block_by_momentum",
    "chiral_charge",
    "eigendecompose",
    "identify_fields",
    "lift_glued_eigenvector",
    "momentum_sectors",
    "sector_spectrum",
    "track_states",
]

TAGS = ("I", "T", "Tprime", "alpha", "beta", "mu", "nu", "Phi11", "Phi12")


@dataclass
class SpectralDatum:
    eigenvalue: complex
    eigenvector: np.ndarray
    momentum: int | None = None
    weight_estimate: float | None = None
    track_id: str | None = None
    tau_eigenvalue: complex | None = None

    def __post_init__(self):
        nrm = np.linalg.norm(self.eigenvector)
        if nrm == 0:
            raise InvalidArgument("eigenvector is zero")
        self.eigenvector = self.eigenvector / nrm
        if self.weight_estimate is None:
            self.weight_estimate = float(np.real(self.eigenvalue))


@dataclass(frozen=True)
class DefectiveCluster:
    """Eigenvalues that coincide within tolerance but lack a full eigenvector set."""

    eigenvalue: complex
    multiplicity: int
    geometric: int


@dataclass
class Spectrum:
    data: list[SpectralDatum]
    defective: list[DefectiveCluster] = field(default_factory=list)
    worst_residual: float = 0.0

    def eigenvalues(self) -> np.ndarray:
        return np.array([d.eigenvalue for d in self.data])

    def __len__(self) -> int:
        return len(self.data)

    def __iter__(self):
        return iter(self.data)

    def __getitem__(self, k):
        return self.data[k]


def _as_array(op) -> np.ndarray:
    if isinstance(op, OperatorMatrix):
        return op.data
    if sparse.issparse(op):
        return op.toarray()
    return np.asarray(op)


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    order = np.argsort(values.real, kind="stable")
    groups, current = [], [order[0]] if len(order) else []
    for a, b in zip(order[:-1], order[1:]):
        if abs(values[b] - values[a]) <= tol:
            current.append(b)
        else:
            groups.append(np.array(current))
            current = [b]
    if current:
        groups.append(np.array(current))
    return groups


def eigendecompose(
    op, cap: int = 6000, residual_tol: float = 1e-9, cluster_tol: float = 1e-6
) -> Spectrum:
    """Complete eigenpairs of a dense non-Hermitian matrix, sorted by real part.

    LAPACK's Hessenberg/Schur route is used, with eigenvectors from the
    triangular factor.  Eigenvalue clusters whose eigenvectors are linearly
    dependent (numerical rank below the cluster size) are reported as
    defective; nothing is repaired.
    """
    mat = _as_array(op)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidArgument("eigendecompose needs a square matrix")
    if mat.shape[0] > cap:
        raise InvalidArgument(f"dimension {mat.shape[0]} exceeds cap {cap}")
    if mat.shape[0] == 0:
        return Spectrum([])
    vals, vecs = linalg.eig(mat, check_finite=True)
    scale = max(np.linalg.norm(mat, 2), 1e-300)
    res = np.linalg.norm(mat @ vecs - vecs * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    worst = float(res.max() / scale)
    if worst > residual_tol:
        raise NumericalFailure(f"eigenpair residual {worst:.2e} exceeds {residual_tol:.0e}", worst=worst)
    defective = []
    for group in _clusters(vals, cluster_tol * max(1.0, scale)):
        if len(group) < 2:
            continue
        block = vecs[:, group] / np.linalg.norm(vecs[:, group], axis=0)
        sv = np.linalg.svd(block, compute_uv=False)
        rank = int(np.sum(sv > 1e-6 * sv[0]))
        if rank < len(group):
            defective.append(DefectiveCluster(complex(vals[group].mean()), len(group), rank))
    order = np.argsort(vals.real, kind="stable")
    data = [SpectralDatum(complex(vals[k]), vecs[:, k].copy()) for k in order]
    return Spectrum(data, defective, worst)


# -- momentum sectors ---------------------------------------------------------


@dataclass
class MomentumSector:
    """Orthonormal basis ``Q`` of one translation eigenspace."""

    tau_eigenvalue: complex
    Q: np.ndarray
    label: int


def _orbit_vectors(tau: sparse.csr_matrix, n: int):
    """Split a monomial unitary into orbit-sum eigenvectors, grouped by eigenvalue."""
    tau = sparse.csc_matrix(tau)
    dim = tau.shape[0]
    image = np.empty(dim, dtype=np.int64)
    phase = np.empty(dim, dtype=complex)
    for col in range(dim):
        lo, hi = tau.indptr[col], tau.indptr[col + 1]
        if hi - lo != 1:
            raise InvalidArgument("translation is not a monomial matrix")
        image[col] = tau.indices[lo]
        phase[col] = tau.data[lo]
    seen = np.zeros(dim, dtype=bool)
    groups: dict[int, list[tuple[complex, np.ndarray]]] = {}
    for start in range(dim):
        if seen[start]:
            continue
        orbit, phases = [start], [1.0 + 0j]
        cur, acc = start, 1.0 + 0j
        while True:
            acc = acc * phase[cur]
            cur = image[cur]
            if cur == start:
                break
            orbit.append(cur)
            phases.append(acc)
        seen[orbit] = True
        length, chi = len(orbit), acc
        base = chi ** (1.0 / length)
        for k in range(length):
            omega = base * cmath.exp(2j * math.pi * k / length)
            vec = np.zeros(dim, dtype=complex)
            # v = sum_r omega^{-r} tau^r |start>, and tau^r|start> = phases[r] |orbit[r]>
            for r in range(length):
                vec[orbit[r]] = omega ** (-r) * phases[r]
            vec /= np.linalg.norm(vec)
            key = int(round(-cmath.phase(omega) * n / (2 * math.pi))) % n
            groups.setdefault(key, []).append((omega, vec))
    return groups


def momentum_sectors(tau, n_sites: int, power: int = 1) -> list[MomentumSector]:
    """Translation eigenspaces, each with an orthonormal basis.

    Eigenvalues are grouped on the grid ``e^{-2 pi i q / N}``, which holds for
    ``phi = 0`` and for every glued or quotient module.  With a twist ``phi``
    the eigenvalues are shifted off this grid and grouping is by nearest point.
    """
    groups = _orbit_vectors(_sparse(tau), n_sites)
    out = []
    for key in sorted(groups):
        omegas = [w for w, _ in groups[key]]
        Q = np.column_stack([v for _, v in groups[key]])
        label = momentum_label(omegas[0], n_sites, power)
        out.append(MomentumSector(complex(np.mean(omegas)), Q, label))
    return out


def _sparse(op):
    if isinstance(op, OperatorMatrix):
        return sparse.csr_matrix(op.data)
    return sparse.csr_matrix(op)


def block_by_momentum(op, tau, n_sites: int | None = None, power: int = 1, tol: float = 1e-10) -> list[SpectralDatum]:
    """Diagonalize ``op`` inside each translation eigenspace.

    Every datum carries its translation eigenvalue and raw momentum label
    ``p`` (``tau`` eigenvalue ``e^{-2 pi i p power/N}``).
    """
    mat = _sparse(op)
    t = _sparse(tau)
    comm = mat @ t - t @ mat
    cnorm = float(abs(comm).max()) if comm.nnz else 0.0
    if cnorm > tol * max(1.0, float(abs(mat).max())):
        raise InvalidArgument(f"operator does not commute with translation (residual {cnorm:.2e})")
    if n_sites is None:
        n_sites = op.basis.n_sites if isinstance(op, OperatorMatrix) else None
    if n_sites is None:
        raise InvalidArgument("n_sites is required for bare matrices")
    out = []
    for sec in momentum_sectors(t, n_sites, power):
        block = sec.Q.conj().T @ (mat @ sec.Q)
        spec = eigendecompose(block)
        for d in spec:
            out.append(
                SpectralDatum(d.eigenvalue, sec.Q @ d.eigenvector, sec.label, None, None, sec.tau_eigenvalue)
            )
    out.sort(key=lambda d: (d.eigenvalue.real, d.momentum))
    return out


def sector_spectrum(data: list[SpectralDatum], momentum: int) -> list[SpectralDatum]:
    return sorted((d for d in data if d.momentum == momentum), key=lambda d: d.eigenvalue.real)


# -- field identification -----------------------------------------------------


@dataclass(frozen=True)
class TagFailure:
    """Declared failure to resolve a tag, with a reason."""

    name: str
    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass
class FieldTag:
    name: str
    module: object
    datum: SpectralDatum | None = None
    basis: Basis | None = None
    note: str = ""


def _module_spectrum(spec, n_sites: int, params: LatticeParams):
    basis = build_basis(spec, n_sites)
    H0 = h0(basis, params)
    power = translation_power(basis, params)
    tau = assemble_sparse(("tau", power), basis, params)
    data = block_by_momentum(H0, tau, n_sites, power)
    return basis, data


def _relabel(data: list[SpectralDatum], n_sites: int, reference: int) -> None:
    period = n_sites
    for d in data:
        q = (d.momentum - reference) % period
        d.momentum = q - period if q > period // 2 else q


def _ground_reference(data: list[SpectralDatum]) -> int:
    return min(data, key=lambda d: d.eigenvalue.real).momentum


def _fold(p: int, n_sites: int) -> int:
    q = p % n_sites
    return q - n_sites if q > n_sites // 2 else q


def _clusters_of(states: list[SpectralDatum], rel_gap: float) -> list[list[SpectralDatum]]:
    """Group eigenvalue-sorted data into runs closer than ``rel_gap`` (relative)."""
    out: list[list[SpectralDatum]] = []
    for d in states:
        if out and abs(d.eigenvalue - out[-1][-1].eigenvalue) <= rel_gap * max(1.0, abs(d.eigenvalue)):
            out[-1].append(d)
        else:
            out.append([d])
    return out


def _track_choice(candidates, previous: SpectralDatum | None):
    if previous is None or not candidates:
        return None
    overlaps = [
        abs(np.vdot(previous.eigenvector, c.eigenvector)) if len(c.eigenvector) == len(previous.eigenvector) else 0.0
        for c in candidates
    ]
    k = int(np.argmax(overlaps))
    return candidates[k] if overlaps[k] >= 0.5 else None


def chiral_charge(basis: Basis, params: LatticeParams) -> sparse.csr_matrix:
    """``Q = sum_j [e_j, e_{j+1}]``, a conserved charge odd under reflection.

    It commutes with the Hamiltonian, vanishes on reflection-symmetric
    non-degenerate levels and takes opposite values ``+-q`` on the two
    members of a left-right doublet.
    """
    e = generators_sparse(basis, params)
    n = basis.n_sites
    return sum((e[j] @ e[(j + 1) % n] - e[(j + 1) % n] @ e[j]) for j in range(n)).tocsr()


def identify_fields(
    n_sites: int,
    params: LatticeParams,
    tags=TAGS,
    history: dict | None = None,
    doublet_gap: float = 1e-8,
) -> dict[str, FieldTag | TagFailure]:
    """Locate the lattice states representing the named fields.

    Momenta are labelled relative to each module's ground state.  Fields
    carrying an odd electric charge (``alpha``, ``beta``, ``mu``, ``nu`` and
    the two ``Phi`` fields) pick up an extra lattice momentum ``pi``, so a
    field of momentum ``p`` sits at label ``p + N/2``.  The zero-momentum
    ladder used for ``alpha`` and ``beta`` therefore merges labels ``0`` and
    ``N/2``.  ``history`` maps tag names to the datum found at a
    neighbouring grid point and resolves ``beta`` through level crossings.
    """
    unknown = set(tags) - set(TAGS)
    if unknown:
        raise InvalidArgument(f"unknown tags {sorted(unknown)}")
    history = history or {}
    out: dict[str, FieldTag | TagFailure] = {}
    half = n_sites // 2

    if {"I", "T", "Tprime"} & set(tags):
        out.update(_glued_tags(n_sites, params, tags))

    if {"alpha", "beta", "Phi11"} & set(tags):
        spec = Standard(1, 0.0)
        basis, data = _module_spectrum(spec, n_sites, params)
        _relabel(data, n_sites, _ground_reference(data))
        ladder = sorted(sector_spectrum(data, 0) + sector_spectrum(data, _fold(half, n_sites)), key=lambda d: d.eigenvalue.real)
        if len(ladder) < 2:
            alpha = TagFailure("alpha", "zero-momentum ladder too small")
        else:
            alpha = FieldTag("alpha", spec, ladder[1], basis, "first excitation")
        if "alpha" in tags:
            out["alpha"] = alpha
        if "beta" in tags:
            out["beta"] = _pick_beta(ladder, alpha, history.get("beta"), spec, basis)
        if "Phi11" in tags:
            one = sector_spectrum(data, _fold(1 + half, n_sites))
            out["Phi11"] = FieldTag("Phi11", spec, one[0], basis) if one else TagFailure("Phi11", "no state at p=1")

    if {"mu", "nu", "Phi12"} & set(tags):
        spec = Standard(2, 0.0)
        basis, data = _module_spectrum(spec, n_sites, params)
        _relabel(data, n_sites, _ground_reference(data))
        if "mu" in tags or "nu" in tags:
            odd = sector_spectrum(data, _fold(half, n_sites))
            out.update(_pick_singlets(odd, params, spec, basis, doublet_gap, history))
        if "Phi12" in tags:
            two = sector_spectrum(data, _fold(2 + half, n_sites))
            out["Phi12"] = FieldTag("Phi12", spec, two[0], basis) if two else TagFailure("Phi12", "no state at p=2")
    return {k: out[k] for k in tags if k in out}


def _pick_beta(ladder, alpha, previous, spec, basis):
    """Second or third excitation sharing the translation eigenvalue of ``alpha``.

    A level in another translation sector is Euclidean-orthogonal to
    ``alpha`` and cannot join it in a Jordan cell, so it is filtered out
    first.  Remaining ties go to continuity with ``previous``, then to the
    weight closest to 2.
    """
    if not alpha:
        return TagFailure("beta", "alpha unresolved")
    cands = [d for d in ladder[2:4] if d.momentum == alpha.datum.momentum]
    if not cands:
        return TagFailure("beta", "no second or third excitation in the sector of alpha")
    if len(cands) == 1:
        return FieldTag("beta", spec, cands[0], basis, f"excitation {ladder.index(cands[0])}")
    tracked = _track_choice(cands, previous)
    if tracked is not None:
        return FieldTag("beta", spec, tracked, basis, "tracked")
    if previous is not None:
        return TagFailure("beta", "continuity overlap below 0.5")
    best = min(cands, key=lambda d: (abs(d.weight_estimate - 2.0), d.eigenvalue.real))
    return FieldTag("beta", spec, best, basis, "weight target")


def _pick_singlets(odd, params, spec, basis, doublet_gap, history):
    """The two singlets of the lowest four-state multiplet at zero momentum.

    Fields ``(h_{1,-2}, h_{1,2})`` and their mirror images each carry two
    level-2 descendants on the opposite chirality, giving four states near
    ``2 h_{1,-2}``: a left-right doublet and two singlets.  The doublet is
    exactly degenerate; when a singlet happens to coincide with it, the
    reflection-odd charge :func:`chiral_charge` separates them (the doublet
    carries ``+-q``, singlets carry zero).
    """
    names = ("mu", "nu")
    if params.x is None:
        return {t: TagFailure(t, "weight target needs the Kac parameter x") for t in names}
    target = 2.0 * kac_weight(1, -2, params.x)
    picked, count = [], 0
    for group in _clusters_of(odd, doublet_gap):
        if count >= 4:
            break
        count += len(group)
        if len(group) == 1:
            picked.append(group[0])
            continue
        picked.extend(_charge_null(group, basis, params))
    if count != 4 or len(picked) != 2:
        reason = f"lowest zero-momentum multiplet has {count} states and {len(picked)} singlets, expected 4 and 2"
        return {t: TagFailure(t, reason) for t in names}
    picked.sort(key=lambda d: d.eigenvalue.real)
    prev = [history.get(t) for t in names]
    if all(p is not None for p in prev):
        direct = sum(abs(np.vdot(p.eigenvector, d.eigenvector)) for p, d in zip(prev, picked))
        swapped = sum(abs(np.vdot(p.eigenvector, d.eigenvector)) for p, d in zip(prev, picked[::-1]))
        if swapped > direct:
            picked.reverse()
    return {t: FieldTag(t, spec, d, basis, f"singlet, target {target:.6g}") for t, d in zip(names, picked)}


def _charge_null(group, basis, params, tol: float = 1e-6) -> list[SpectralDatum]:
    """Vectors of a degenerate cluster annihilated by the chiral charge."""
    Q = chiral_charge(basis, params)
    V = np.array([d.eigenvector for d in group]).T
    coeff, *_ = linalg.lstsq(V, Q @ V)
    vals, vecs = linalg.eig(coeff)
    scale = max(1.0, float(np.max(np.abs(vals))))
    out = []
    for k in np.flatnonzero(np.abs(vals) < tol * scale):
        d0 = group[0]
        out.append(SpectralDatum(d0.eigenvalue, V @ vecs[:, k], d0.momentum, None, None, d0.tau_eigenvalue))
    return out


def lift_glued_eigenvector(basis: Basis, H, lam: complex, top: np.ndarray, top_sector: int) -> np.ndarray:
    """Complete an eigenvector of a sector-triangular operator from its top block.

    The generators never raise the through-line count, so ``H`` is block
    triangular with sectors ordered by ``j``.  Given an eigenvector ``top`` of
    the ``j = top_sector`` diagonal block, lower sectors are filled by solving
    ``(lam - H_jj) v_j = sum_{k>j} H_jk v_k``.
    """
    H = _sparse(H)
    vec = np.zeros(len(basis), dtype=complex)
    idx_top = basis.sector_indices(top_sector)
    vec[idx_top] = top
    for j in range(top_sector - 1, -1, -1):
        idx = basis.sector_indices(j)
        if not len(idx):
            continue
        rhs = H[idx] @ vec
        block = H[idx][:, idx].toarray()
        vec[idx] = linalg.solve(lam * np.eye(len(idx)) - block, rhs)
    return vec


def _glued_tags(n_sites: int, params: LatticeParams, tags) -> dict:
    out: dict = {}
    qz = QuotientZero()
    qbasis, qdata = _module_spectrum(qz, n_sites, params)
    ground = min(qdata, key=lambda d: d.eigenvalue.real)
    ref = ground.momentum
    _relabel(qdata, n_sites, ref)
    glued = build_basis(GluedQuotient(2), n_sites)
    s0 = glued.sector_indices(0)
    # QuotientZero and the j=0 block of the glued module share their state order
    assert [glued.states[k] for k in s0] == list(qbasis.states)

    def embed(d: SpectralDatum) -> SpectralDatum:
        vec = np.zeros(len(glued), dtype=complex)
        vec[s0] = d.eigenvector
        return SpectralDatum(d.eigenvalue, vec, d.momentum, d.weight_estimate, None, d.tau_eigenvalue)

    if "I" in tags:
        out["I"] = FieldTag("I", GluedQuotient(2), embed(ground), glued, "quotient ground state")
    if "T" in tags or "Tprime" in tags:
        # T = H_{-2} I lowers the label by two
        cands = sector_spectrum(qdata, -2 if n_sites > 4 else 2)
        if not cands:
            out["T"] = TagFailure("T", "no state at momentum -2")
            out["Tprime"] = TagFailure("Tprime", "T unresolved")
            return out
        T = embed(cands[0])
        out["T"] = FieldTag("T", GluedQuotient(2), T, glued, "lowest quotient state at momentum -2")
        if "Tprime" in tags:
            out["Tprime"] = _tprime(glued, params, T)
    return out


def _tprime(glued: Basis, params: LatticeParams, T: SpectralDatum):
    n = glued.n_sites
    if n < 4:
        return TagFailure("Tprime", "no j=2 sector")
    H0g = h0(glued, params)
    s2 = glued.sector_indices(2)
    w2 = build_basis(Standard(2, 0.0), n)
    assert [glued.states[k] for k in s2] == list(w2.states)
    tau2 = assemble_sparse(("tau", 1), w2, params)
    block = sparse.csr_matrix(H0g.data[np.ix_(s2, s2)])
    best = None
    for sec in momentum_sectors(tau2, n):
        if abs(sec.tau_eigenvalue - T.tau_eigenvalue) > 1e-8:
            continue
        sub = eigendecompose(sec.Q.conj().T @ (block @ sec.Q))
        for d in sub:
            gap = abs(d.eigenvalue - T.eigenvalue)
            if best is None or gap < best[0]:
                best = (gap, d.eigenvalue, sec.Q @ d.eigenvector)
    if best is None:
        return TagFailure("Tprime", "no j=2 state shares the translation eigenvalue of T")
    _, lam, top = best
    vec = lift_glued_eigenvector(glued, H0g.data, lam, top, 2)
    datum = SpectralDatum(lam, vec, T.momentum, None, None, T.tau_eigenvalue)
    return FieldTag("Tprime", GluedQuotient(2), datum, glued, "j=2 partner of T")


# -- tracking -------------------------------------------------------------------


def track_states(previous: dict, current: list[SpectralDatum], min_overlap: float = 0.5) -> dict:
    """Carry each tagged datum to the current eigenvector of largest overlap."""
    out = {}
    for name, tag in previous.items():
        datum = tag.datum if isinstance(tag, FieldTag) else tag
        if datum is None or isinstance(tag, TagFailure):
            out[name] = TagFailure(name, "nothing to track")
            continue
        overlaps = [abs(np.vdot(datum.eigenvector, d.eigenvector)) if len(d.eigenvector) == len(datum.eigenvector) else 0.0 for d in current]
        if not overlaps:
            out[name] = TagFailure(name, "empty spectrum")
            continue
        k = int(np.argmax(overlaps))
        if overlaps[k] < min_overlap:
            out[name] = TagFailure(name, f"best overlap {overlaps[k]:.3f} below {min_overlap}")
        else:
            new = current[k]
            new.track_id = name
            out[name] = FieldTag(name, getattr(tag, "module", None), new, getattr(tag, "basis", None), "tracked")
    return out
