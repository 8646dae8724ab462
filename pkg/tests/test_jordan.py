from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jordanloops.basis import GluedQuotient, build_basis
from jordanloops.errors import DegenerateMeasurement, InvalidArgument, LimitFailure
from jordanloops.inner import gram
from jordanloops.jordan import (
    closed_form_b_L2,
    closed_form_b_L3,
    descent_coefficient,
    emerging_jordan_vector,
    gram_schmidt,
    j_measure,
    loop_norm_decay,
    measure_b,
    measure_b_tagged,
    measure_b_Tt,
    measure_b_Tt_limit,
    null_descent_operator,
)
from jordanloops.koosaleur import h0, h_n_sparse, hamiltonian_unscaled
from jordanloops.params import NEGATED, LatticeParams
from jordanloops.spectral import identify_fields
from oracles import kac_exact

B_L2 = -32 * math.sqrt(3) / (9 * math.pi)
B_L3 = -288 * math.sqrt(3) / (49 * math.pi)


def v5_v6(m):
    return (
        np.array([1, 1, 0, 0, 0, 0, 0], dtype=float),
        np.array([1, 1, m - 1, m - 1, m - 1, m - 1, (m - 1) * (m - 2)], dtype=float),
    )


def j_closed(m):
    return math.sqrt(2 / (2 + 4 * (m - 1) ** 2 + (m - 1) ** 2 * (m - 2) ** 2))


def negated_h4(m, e_inf=1.0):
    """``-H_4(-m, -e_inf)`` in the appendix basis, as the negated-convention Hamiltonian."""
    basis = build_basis(GluedQuotient(2), 4, "appendix")
    return hamiltonian_unscaled(basis, LatticeParams.symbolic(-m, e_inf, NEGATED)).data


@pytest.mark.parametrize("x", [0.0, 0.3, -2.0, 10.0])
def test_j_measure_toy_pair(x):
    assert j_measure([1, 0], [1, x]) == pytest.approx(1 / math.sqrt(1 + x * x), abs=1e-15)


def test_j_measure_of_parallel_vectors_is_one():
    u = np.array([1.0, 2j, -3.0])
    assert j_measure(u, u) == pytest.approx(1.0)
    assert j_measure(u, (2 - 1j) * u) == pytest.approx(1.0)


def test_j_measure_zero_vector():
    with pytest.raises(InvalidArgument):
        j_measure([0, 0], [1, 0])


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=6, max_size=6))
def test_j_measure_in_unit_interval(z):
    u, v = np.array(z[:3]), np.array(z[3:])
    if np.linalg.norm(u) < 1e-6 or np.linalg.norm(v) < 1e-6:
        return
    assert 0.0 <= j_measure(u, v) <= 1.0


@pytest.mark.parametrize("m", np.linspace(0.1, 1.9, 11))
def test_j_of_generic_m_eigenvectors(m):
    v5, v6 = v5_v6(m)
    H = negated_h4(m)
    for v in (v5, v6):
        assert np.allclose(H @ v, (np.vdot(v, H @ v) / np.vdot(v, v)) * v, atol=1e-12)
    assert j_measure(v5, v6) == pytest.approx(j_closed(m), abs=1e-10)


def test_gram_schmidt_toy_pair():
    u_hat, v_prime = gram_schmidt([1, 0], [1, 0.2])
    assert np.allclose(u_hat, [1, 0]) and np.allclose(v_prime, [0, 1])
    for x in (1e-3, -1e-3):
        v_hat, u_prime = gram_schmidt([1, x], [1, 0])
        assert np.allclose(v_hat, [1, 0], atol=1e-2)
        assert np.allclose(u_prime, [0, -math.copysign(1, x)], atol=1e-2)


def test_gram_schmidt_rejects_dependent_pair():
    with pytest.raises(InvalidArgument):
        gram_schmidt([1, 1], [2, 2])


def test_limit_vector_of_negated_h4():
    m = 1 - 1e-5
    v5, v6 = v5_v6(m)
    tilde = emerging_jordan_vector(v5, v6, negated_h4(m))
    expected = np.array([0, 0, 0.5, 0.5, 0.5, 0.5, -0.5])
    assert j_measure(tilde, expected) > 1 - 1e-8
    # at m = 1 the limit vector solves (H - 4) v~6 = v5 up to scale
    H = negated_h4(1.0)
    lhs = (H - 4 * np.eye(7)) @ expected
    assert j_measure(lhs, v5) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_emerging_vector_is_orthogonal_and_normalized(seed):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    psi = rng.normal(size=5) + 1j * rng.normal(size=5)
    psi_prime = rng.normal(size=5) + 1j * rng.normal(size=5)
    tilde = emerging_jordan_vector(psi, psi_prime, H)
    unit = psi / np.linalg.norm(psi)
    assert abs(np.vdot(unit, tilde)) < 1e-10 * max(1, np.linalg.norm(tilde))
    assert np.vdot(unit, H @ tilde) == pytest.approx(2.0)


def test_emerging_vector_degenerate_pair():
    with pytest.raises(DegenerateMeasurement):
        emerging_jordan_vector([1, 0], [2, 0], np.eye(2))


@pytest.fixture(scope="module")
def four_site_pair():
    p = LatticeParams.from_c(-0.4)
    tags = identify_fields(4, p, ("I", "T", "Tprime"))
    basis = tags["I"].basis
    return (
        tags,
        null_descent_operator("Tt", basis, p).toarray(),
        gram(basis, "loop", p),
        h0(basis, p).data,
    )


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.01, 100),
    st.floats(-math.pi, math.pi),
)
def test_b_is_invariant_under_rescaling(four_site_pair, modulus, phase):
    tags, A, G, H0 = four_site_pair
    kappa = modulus * complex(math.cos(phase), math.sin(phase))
    T, Tp, I = tags["T"].datum.eigenvector, tags["Tprime"].datum.eigenvector, tags["I"].datum.eigenvector
    ref = measure_b((T, Tp), I, A, G, H0)
    scaled = measure_b((T, kappa * Tp), I, A, G, H0)
    assert abs(scaled.b1 - ref.b1) < 1e-10 * max(1, abs(ref.b1))
    assert abs(scaled.b2 - ref.b2) < 1e-10 * max(1, abs(ref.b2))
    assert scaled.J == pytest.approx(ref.J, abs=1e-12)


def test_null_primary_is_rejected(four_site_pair):
    tags, A, G, H0 = four_site_pair
    phi = np.zeros(G.data.shape[0])
    phi[0] = 1e-9
    with pytest.raises(DegenerateMeasurement):
        measure_b((tags["T"].datum, tags["Tprime"].datum), phi, A, G, H0)


def test_descent_of_kind_11_is_h_minus_one():
    p = LatticeParams.from_c(-0.7)
    basis = build_basis(GluedQuotient(2), 6)
    A = null_descent_operator((1, 1), basis, p)
    assert abs(A - h_n_sparse(-1, basis, p)).max() == 0


@pytest.mark.parametrize("x", [Fraction(1), Fraction(1, 2), Fraction(3), Fraction(7, 5)])
def test_descent_coefficient_matches_kac_oracle(x):
    h12 = kac_exact(1, 2, x)
    expected = Fraction(-3) / (2 * (2 * h12 + 1))
    assert descent_coefficient(LatticeParams.from_x(float(x))) == pytest.approx(float(expected), rel=1e-13)


def test_descent_coefficient_at_x_one():
    assert descent_coefficient(LatticeParams.from_x(1.0)) == pytest.approx(-2.0)


def test_descent_needs_kac_parameter():
    with pytest.raises(InvalidArgument):
        descent_coefficient(LatticeParams.symbolic(1.0, 1.0))
    with pytest.raises(InvalidArgument):
        null_descent_operator((2, 2), build_basis(GluedQuotient(2), 4), LatticeParams.from_c(-0.5))


def test_descent_of_kind_12_combines_modes():
    p = LatticeParams.from_c(-1.2)
    basis = build_basis(GluedQuotient(2), 6)
    h1, h2 = h_n_sparse(-1, basis, p), h_n_sparse(-2, basis, p)
    A = null_descent_operator((1, 2), basis, p)
    assert abs(A - (h2 + descent_coefficient(p) * (h1 @ h1))).max() < 1e-13


M_GRID = [m for m in np.linspace(-1.95, 0.95, 30) if abs(m) > 1e-3 and abs(m + 1) > 1e-3]


@pytest.mark.parametrize("m", M_GRID)
def test_two_site_pair_closed_form(m):
    r = measure_b_Tt(4, LatticeParams.from_loop_weight(m, NEGATED))
    assert abs(r.b1 - closed_form_b_L2(m)) < 1e-9
    assert abs(r.b1.imag) < 1e-8


@pytest.mark.parametrize("m", M_GRID[::3])
def test_three_site_pair_closed_form(m):
    r = measure_b_Tt(6, LatticeParams.from_loop_weight(m, NEGATED))
    assert abs(r.b1 - closed_form_b_L3(m)) < 1e-9 * max(1, abs(r.b1))


def test_closed_forms_at_minus_one():
    assert closed_form_b_L2(-1.0) == pytest.approx(B_L2, abs=1e-12)
    assert closed_form_b_L3(-1 + 1e-7) == pytest.approx(B_L3, abs=1e-5)


@pytest.mark.parametrize("n, expected", [(4, B_L2), (6, B_L3)])
def test_limit_orderings_agree(n, expected):
    lim = measure_b_Tt_limit(n)
    assert lim.b == pytest.approx(expected, abs=1e-4)
    assert lim.gap < 1e-6
    assert abs(lim.b1_limit.imag) < 1e-8


def test_limit_failure_reported():
    with pytest.raises(LimitFailure):
        measure_b_Tt_limit(4, tolerance=0.0, c_sequence=[0.3, -0.3, 0.2, -0.2])
    with pytest.raises(InvalidArgument):
        measure_b_Tt_limit(4, c_sequence=[0.0, 0.1, 0.2])
    with pytest.raises(InvalidArgument):
        measure_b_Tt_limit(4, c_sequence=[0.1, 0.2], degree=2)


def test_orderings_differ_at_generic_point():
    r = measure_b_tagged((1, 1), 8, LatticeParams.from_c(-1.5))
    assert abs(r.b1 - r.b2) > 1e-3
    assert abs(r.b1.imag) < 1e-8 and abs(r.b2.imag) < 1e-8


def test_unknown_pair_kind():
    with pytest.raises(InvalidArgument):
        measure_b_tagged((2, 1), 8, LatticeParams.from_c(-1.0))


def test_unresolved_tag_is_degenerate():
    with pytest.raises(DegenerateMeasurement):
        measure_b_tagged((1, 2), 6, LatticeParams.from_c(-1.0))


def test_relative_loop_norm_of_alpha_decays():
    records = loop_norm_decay("alpha", [6, 8, 10, 12], LatticeParams.from_c(-1.0))
    rel = [abs(r.relative) for r in records]
    assert all(b < a for a, b in zip(rel, rel[1:]))
    assert all(r.reference == "Phi11" for r in records)


@pytest.mark.parametrize("n", [6, 8])
def test_loop_norm_of_t_vanishes_at_zero_charge(n):
    values = [abs(loop_norm_decay("T", [n], LatticeParams.from_c(c))[0].raw) for c in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-3


def test_loop_norm_marks_unresolved_tags():
    rec = loop_norm_decay("mu", [6], LatticeParams.from_c(-1.0))[0]
    assert rec.raw is None and rec.failure is not None


@pytest.mark.parametrize("n", [6, 8])
def test_alignment_grows_toward_minus_two(n):
    js = []
    for eps in (0.3, 0.1, 0.03, 0.01):
        tags = identify_fields(n, LatticeParams.from_c(-2 + eps), ("alpha", "beta"))
        js.append(j_measure(tags["alpha"].datum, tags["beta"].datum))
    assert all(b > a for a, b in zip(js, js[1:]))
