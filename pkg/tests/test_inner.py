from __future__ import annotations

import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jordanloops.algebra import assemble
from jordanloops.basis import STANDARD, Glued, GluedQuotient, QuotientZero, Standard, build_basis, parse_state
from jordanloops.errors import DegenerateMeasurement, InvalidArgument
from jordanloops.inner import gram, loop_norm, loop_overlap, loop_product, sign_corrected_ratio
from jordanloops.params import NEGATED, PLAIN, LatticeParams
from oracles import glued_overlap

M = 0.83
P = LatticeParams.symbolic(M, 1.0)

ALL_MODULES = [
    Standard(0, 0.0),
    Standard(0, 1.3),
    Standard(1, 0.0),
    Standard(1, 0.7),
    Standard(2, -0.4),
    Standard(3, 2.2),
    QuotientZero(),
    Glued(1),
    Glued(2),
    Glued(3),
    GluedQuotient(1),
    GluedQuotient(2),
    GluedQuotient(3),
]


def test_through_lines_must_connect_in_standard_module():
    u, v = parse_state("(12)(3)(4)", 4), parse_state("(1)(2)(34)", 4)
    assert loop_overlap(u, v, Standard(1, 0.4), P) == 0


def test_glued_module_drops_the_connection_rule():
    u, v = parse_state("(12)(3)(4)", 4), parse_state("(1)(2)(34)", 4)
    assert loop_overlap(u, v, Glued(1), P) == pytest.approx(1.0)


def test_phase_from_lateral_through_line_movement():
    phi = 0.9
    u, v = parse_state("(14)(23)(5)(6)", 6), parse_state("(1)(23)(45)(6)", 6)
    assert loop_overlap(u, v, Standard(1, phi), P) == pytest.approx(cmath.exp(1j * phi / 3) * M)
    assert loop_overlap(u, v, Glued(1), P) == pytest.approx(M)


def test_two_nested_loops():
    u, v = parse_state("(23)(41)", 4), parse_state("(14)(23)", 4)
    phi = 2 * np.arccos(M / 2)  # noncontractible weight equal to m
    for spec in (Standard(0, phi), Glued(2)):
        assert loop_overlap(u, v, spec, P) == pytest.approx(M**2)


def test_two_site_gram():
    G = gram(build_basis(Standard(0, 0.6), 2), "loop", P).data
    w = 2 * np.cos(0.3)
    # (12) against itself closes one contractible loop; against (21) the loop winds
    assert np.allclose(G, [[M, w], [w, M]], atol=1e-15)


def cases(sizes, modules=ALL_MODULES):
    return [pytest.param(n, s, id=f"{s}-N{n}") for n in sizes for s in modules if s.j <= n // 2]


@pytest.mark.parametrize("n,spec", cases([2, 4, 6]))
def test_gram_matches_gluing_oracle(n, spec):
    basis = build_basis(spec, n)
    G = gram(basis, "loop", P).data
    winding = 2 * np.cos(spec.phi / 2) if spec.kind == STANDARD else M
    for a, u in enumerate(basis.states):
        for b, v in enumerate(basis.states):
            ref = glued_overlap(u.arcs, v.arcs, n, M, spec.phi, not spec.is_glued, winding)
            assert G[a, b] == pytest.approx(ref, abs=1e-15)


def test_euclidean_gram_is_identity():
    basis = build_basis(GluedQuotient(2), 6)
    assert np.array_equal(gram(basis, "euclidean").data, np.eye(len(basis)))


def test_loop_gram_needs_parameters():
    with pytest.raises(InvalidArgument):
        gram(build_basis(QuotientZero(), 4), "loop")
    with pytest.raises(InvalidArgument):
        gram(build_basis(QuotientZero(), 4), "hyperbolic", P)


@pytest.mark.parametrize("convention", [PLAIN, NEGATED])
@pytest.mark.parametrize("n,spec", cases([4, 6, 8]))
def test_generators_are_self_adjoint(n, spec, convention):
    p = LatticeParams.from_c(-0.6, convention)
    basis = build_basis(spec, n)
    G = gram(basis, "loop", p).data
    for k in range(1, n + 1):
        E = assemble(f"e{k}", basis, p).data
        assert np.max(np.abs(G @ E - E.conj().T @ G)) < 1e-11


@pytest.mark.parametrize("n,spec", cases([2, 4, 6, 8], [s for s in ALL_MODULES if s.kind != "glued"]))
def test_loop_gram_is_nondegenerate(n, spec):
    G = gram(build_basis(spec, n), "loop", LatticeParams.from_c(-0.55)).data
    assert np.linalg.cond(G) < 1e8


def test_loop_gram_degenerates_at_root_of_unity():
    # c = -0.6 puts q on a root of unity (gamma = 2 pi / 5), where the
    # quotient module acquires a radical
    G = gram(build_basis(QuotientZero(), 8), "loop", LatticeParams.from_c(-0.6)).data
    assert np.linalg.cond(G) > 1e12


def test_glued_gram_without_quotient_is_singular():
    # sectors are glued as vector spaces; the unquotiented zero sector repeats
    # states under the loop product
    G = gram(build_basis(Glued(2), 4), "loop", LatticeParams.from_c(-0.6)).data
    assert np.linalg.matrix_rank(G, tol=1e-10) < G.shape[0]


def test_loop_product_of_basis_vectors():
    basis = build_basis(QuotientZero(), 4)
    G = gram(basis, "loop", P)
    e0 = np.eye(len(basis))[0]
    assert loop_norm(e0, G) == pytest.approx(M**2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_loop_product_is_sesquilinear(seed):
    rng = np.random.default_rng(seed)
    basis = build_basis(Standard(1, 0.5), 6)
    G = gram(basis, "loop", P)
    a, b, c = (rng.normal(size=(3, len(basis))) + 1j * rng.normal(size=(3, len(basis))))
    alpha = complex(rng.normal(), rng.normal())
    assert loop_product(a, b + alpha * c, G) == pytest.approx(loop_product(a, b, G) + alpha * loop_product(a, c, G))
    assert loop_product(alpha * a, b, G) == pytest.approx(np.conj(alpha) * loop_product(a, b, G))
    expanded = sum(np.conj(a[i]) * b[k] * G.data[i, k] for i in range(len(a)) for k in range(len(b)))
    assert loop_product(a, b, G) == pytest.approx(expanded)


def test_loop_product_checks_sizes():
    G = gram(build_basis(QuotientZero(), 4), "loop", P)
    with pytest.raises(InvalidArgument):
        loop_product(np.ones(3), np.ones(2), G)


def test_sign_corrected_ratio_divides_by_ground_sign():
    assert sign_corrected_ratio(3.0, 1.5, 1.0) == pytest.approx(2.0)
    assert sign_corrected_ratio(3.0, 1.5, -1.0) == pytest.approx(-2.0)
    assert sign_corrected_ratio(3.0, 1.5, -0.25) == pytest.approx(-2.0)
    with pytest.raises(DegenerateMeasurement):
        sign_corrected_ratio(1.0, 0.0, 1.0)
    with pytest.raises(DegenerateMeasurement):
        sign_corrected_ratio(1.0, 1.0, 0.0)


def test_mixed_sizes_rejected():
    with pytest.raises(InvalidArgument):
        loop_overlap(parse_state("(12)", 2), parse_state("(12)(34)", 4), QuotientZero(), P)
