from __future__ import annotations

import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jordanloops.basis import QuotientZero, build_basis
from jordanloops.characters import (
    central_charge,
    dim_irreducible,
    f_bar_zero,
    f_sector,
    kac_character,
    kac_weight,
    loop_weight,
    multiplicity_D,
    param_from_c,
    partition_numbers,
    partition_series,
    partition_terms,
    resonance,
    weight_w,
)
from jordanloops.errors import InvalidArgument
from oracles import kac_exact, partition_count

GENERIC_X = list(np.linspace(0.37, 9.1, 20))


def test_partition_numbers_match_recursion():
    assert list(partition_numbers(30)) == [partition_count(n) for n in range(31)]
    assert list(partition_numbers(5)) == [1, 1, 2, 3, 5, 7]


def test_kac_identity_weight_vanishes():
    for x in GENERIC_X:
        assert kac_weight(1, 1, x) == pytest.approx(0.0, abs=1e-15)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 20))
def test_kac_reflection_symmetry(r, s, x):
    assert kac_weight(r, s, x) == pytest.approx(kac_weight(-r, -s, x), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("r, s, x", [(1, 2, Fraction(2)), (1, -2, Fraction(1)), (3, 1, Fraction(5, 2)), (0, 1, Fraction(7, 3))])
def test_kac_weight_exact_values(r, s, x):
    assert kac_weight(r, s, float(x)) == pytest.approx(float(kac_exact(r, s, x)), rel=1e-14, abs=1e-15)


def test_central_charge_values():
    assert central_charge(2.0) == pytest.approx(0.0, abs=1e-15)
    assert central_charge(1.0) == pytest.approx(-2.0)
    assert central_charge(1e8) == pytest.approx(1.0, abs=1e-12)
    assert loop_weight(2.0) == pytest.approx(1.0)
    assert loop_weight(2.0, "negated") == pytest.approx(-1.0)


@given(st.floats(0.05, 200))
def test_central_charge_round_trip(x):
    assert param_from_c(central_charge(x)) == pytest.approx(x, rel=1e-10)


def test_param_from_c_domain():
    with pytest.raises(InvalidArgument):
        param_from_c(1.0)
    with pytest.raises(InvalidArgument):
        kac_weight(1, 1, 0.0)


def test_kac_character_coefficients():
    k = kac_character(1, 1, 2.0, 6)
    assert list(k.coefficients[:3]) == [1, 0, 1]
    expected = [partition_count(n) - (partition_count(n - 1) if n >= 1 else 0) for n in range(7)]
    assert list(k.coefficients) == expected
    assert k.exponent == pytest.approx(0.0)
    with pytest.raises(InvalidArgument):
        kac_character(0, 1, 2.0, 4)


@pytest.mark.parametrize("x", [0.8, 1.3, 2.0, 3.7, 6.0])
def test_quotient_identity_to_level_six(x):
    gamma = math.pi / (x + 1)
    lhs = (f_sector(0, 2 * gamma, x, 6) - f_sector(1, 0.0, x, 6)).collect(6)
    rhs = f_bar_zero(x, 6).collect(6)
    assert lhs.keys() == rhs.keys()
    for key in lhs:
        assert lhs[key] == pytest.approx(rhs[key], abs=1e-9)


def test_sector_leading_exponents():
    x = 2.5
    assert f_sector(1, 0.0, x, 4).leading() == pytest.approx((kac_weight(0, -1, x), kac_weight(0, 1, x)))
    assert f_bar_zero(x, 4).leading() == (0.0, 0.0)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_sector_is_symmetric_under_chirality_swap(j):
    x = 1.7
    a = f_sector(j, 0.0, x, 5).collect(5)
    b = f_sector(j, 0.0, x, 5).collect(5)
    swapped = {(wb, w): v for (w, wb), v in a.items()}
    assert swapped == b


def test_truncation_is_reported():
    with pytest.raises(InvalidArgument):
        f_sector(1, 0.0, 2.0, 8, e_range=1)


@pytest.mark.parametrize("x", GENERIC_X)
def test_single_line_multiplicity(x):
    assert multiplicity_D(1, 0.0, x) == pytest.approx(-1.0, abs=1e-12)
    assert weight_w(1, 1, x) == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize("j", [1, 2, 3, 4, 5, 6])
def test_multiplicity_is_real(j):
    # the terms r and j - r are conjugate whenever exp(2 i K j) = 1
    for p in range(j):
        K = math.pi * p / j
        total = sum(np.exp(2j * K * r) * weight_w(j, math.gcd(j, r), 1.9) for r in range(j)) / j
        assert abs(total.imag) < 1e-12
        assert multiplicity_D(j, K, 1.9) == pytest.approx(total.real)


def test_multiplicity_rejects_complex_values():
    with pytest.raises(InvalidArgument):
        multiplicity_D(3, 0.4, 1.9)


@pytest.mark.parametrize("x", [3.0, 5.0])
@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_multiplicity_integer_at_integer_q(x, j):
    assert round(loop_weight(x) ** 2, 12) in (2.0, 3.0)
    for k in range(1, j + 1):
        if j % k:
            continue
        for p in range(k):
            d = multiplicity_D(j, math.pi * p / k, x)
            assert d == pytest.approx(round(d), abs=1e-10)


def test_resonance_predicate():
    x = 2.5
    gamma = math.pi / (x + 1)
    for j, k in [(1, 1), (2, 3), (3, 5)]:
        assert resonance(j, 2 * gamma * (j + k), x) == (True, k)
    rng = np.random.default_rng(7)
    for phi in rng.uniform(-math.pi, math.pi, 10):
        assert resonance(1, phi, math.sqrt(2) + 0.1, k_max=200) == (False, None)


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10, 12])
def test_quotient_dimension(n):
    assert len(build_basis(QuotientZero(), n)) == comb(n, n // 2) - comb(n, n // 2 + 1) == dim_irreducible(n, 0)


def test_partition_terms_structure():
    terms = {t.label: t for t in partition_terms(2.5, 3)}
    assert terms["F_1,1"].coefficient == pytest.approx(0.0, abs=1e-12)
    assert terms["Fbar_0"].coefficient == 1.0
    assert "F_2,e^(2pi i 1/2)" in terms
    # Q = 1 removes the F_{0,-1} sector
    q1 = {t.label: t for t in partition_terms(2.0, 3)}
    assert q1["F_0,-1"].coefficient == pytest.approx(0.0, abs=1e-12)


def test_ising_series_is_nonnegative():
    series = partition_series(3.0, 4)
    assert series
    assert min(series.values()) > -1e-9
    assert series[(0.0, 0.0)] == pytest.approx(1.0)
