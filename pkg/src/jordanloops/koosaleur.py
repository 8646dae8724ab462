"""Lattice Hamiltonian, translation and Koo-Saleur Virasoro generators.

All operators are built as sums of generator matrices from :mod:`algebra`.
Sparse variants (``*_sparse``) are what the measurement pipeline uses; the
public functions wrap them as dense :class:`OperatorMatrix` objects.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy import sparse

from .algebra import OperatorMatrix, assemble_sparse
from .basis import Basis
from .errors import InvalidArgument
from .params import LatticeParams, e_infinity, fermi_velocity

__all__ = [
    "OperatorMatrix",
    "e_infinity",
    "fermi_velocity",
    "generators_sparse",
    "h0",
    "h_n",
    "h_n_sparse",
    "hamiltonian_unscaled",
    "hamiltonian_sparse",
    "koo_saleur",
    "koo_saleur_sparse",
    "momentum_label",
    "momentum_operator",
    "translation_power",
]

LEFT = "left"
RIGHT = "right"


def generators_sparse(basis: Basis, params: LatticeParams) -> list[sparse.csr_matrix]:
    """``[e_1, ..., e_N]`` as sparse matrices (0-based list index)."""
    return [assemble_sparse(("e", k), basis, params) for k in range(1, basis.n_sites + 1)]


def hamiltonian_sparse(basis: Basis, params: LatticeParams) -> sparse.csr_matrix:
    """``H = sum_j (e_inf - e_j)``."""
    n = basis.n_sites
    total = sum(generators_sparse(basis, params))
    return (n * params.e_inf * sparse.identity(len(basis), dtype=complex, format="csr") - total).tocsr()


def hamiltonian_unscaled(basis: Basis, params: LatticeParams) -> OperatorMatrix:
    return OperatorMatrix("H_unscaled", hamiltonian_sparse(basis, params).toarray(), basis)


def _check_params(params: LatticeParams) -> None:
    if params.v_F <= 0:
        raise InvalidArgument("Fermi velocity must be positive")


def koo_saleur_sparse(n: int, chirality: str, basis: Basis, params: LatticeParams, gens=None) -> sparse.csr_matrix:
    """``L_n`` (left) or ``Lbar_n`` (right) on a finite chain of ``N = 2L`` sites.

    ``L_n = -(L/2 pi v_F) sum_j e^{i n j pi/L} (e_j - e_inf + (i/v_F)[e_j, e_{j+1}]) + (c/24) delta_n0``;
    the right-moving copy flips the sign of both ``i``'s.
    """
    if chirality not in (LEFT, RIGHT):
        raise InvalidArgument(f"chirality must be 'left' or 'right', got {chirality!r}")
    _check_params(params)
    N = basis.n_sites
    L = N // 2
    e = generators_sparse(basis, params) if gens is None else gens
    sgn = 1.0 if chirality == LEFT else -1.0
    ident = sparse.identity(len(basis), dtype=complex, format="csr")
    acc = sparse.csr_matrix((len(basis), len(basis)), dtype=complex)
    for j in range(1, N + 1):
        ej, ej1 = e[j - 1], e[j % N]
        comm = ej @ ej1 - ej1 @ ej
        term = ej - params.e_inf * ident + (sgn * 1j / params.v_F) * comm
        acc = acc + cmath.exp(sgn * 1j * n * j * math.pi / L) * term
    out = (-L / (2.0 * math.pi * params.v_F)) * acc
    if n == 0:
        out = out + (params.c / 24.0) * ident
    return out.tocsr()


def koo_saleur(n: int, chirality: str, basis: Basis, params: LatticeParams) -> OperatorMatrix:
    label = f"L_{n}" if chirality == LEFT else f"Lbar_{n}"
    return OperatorMatrix(label, koo_saleur_sparse(n, chirality, basis, params).toarray(), basis)


def h_n_sparse(n: int, basis: Basis, params: LatticeParams, gens=None) -> sparse.csr_matrix:
    """``H_n = L_n + Lbar_{-n}``; the commutator terms cancel in this combination."""
    e = generators_sparse(basis, params) if gens is None else gens
    return (koo_saleur_sparse(n, LEFT, basis, params, e) + koo_saleur_sparse(-n, RIGHT, basis, params, e)).tocsr()


def h_n(n: int, basis: Basis, params: LatticeParams) -> OperatorMatrix:
    return OperatorMatrix(f"H_{n}", h_n_sparse(n, basis, params).toarray(), basis)


def h0(basis: Basis, params: LatticeParams) -> OperatorMatrix:
    """Scaled Hamiltonian ``H_0 = (L / pi v_F) H + c/12``."""
    _check_params(params)
    L = basis.n_sites // 2
    data = (L / (math.pi * params.v_F)) * hamiltonian_sparse(basis, params).toarray()
    data += (params.c / 12.0) * np.eye(len(basis))
    return OperatorMatrix("H0", data, basis)


def translation_power(basis: Basis, params: LatticeParams) -> int:
    """Smallest translation that commutes with the Hamiltonian (2 when ``y`` marks odd sites)."""
    return 2 if (basis.spec.is_glued and params.y != 1.0) else 1


def momentum_operator(basis: Basis, params: LatticeParams, power: int | None = None) -> OperatorMatrix:
    """Translation matrix used to label momenta."""
    p = translation_power(basis, params) if power is None else power
    data = assemble_sparse(("tau", p), basis, params).toarray()
    return OperatorMatrix("tau" if p == 1 else f"tau^{p}", data, basis)


def momentum_label(eigenvalue: complex, n_sites: int, power: int = 1, reference: int = 0) -> int:
    """Integer ``p`` with ``tau^power`` eigenvalue ``e^{-2 pi i p power / N}``.

    ``reference`` is subtracted before folding into ``(-N/2, N/2]``, so labels
    can be given relative to a ground state carrying a macroscopic momentum.
    With ``power = 2`` the label is only resolved modulo ``N/2``.
    """
    angle = -cmath.phase(eigenvalue)
    p = angle * n_sites / (2 * math.pi * power)
    period = n_sites // power
    p_int = int(round(p)) - reference
    folded = p_int % period
    if folded > period // 2:
        folded -= period
    return folded
