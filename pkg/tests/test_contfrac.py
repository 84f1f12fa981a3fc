import math
from decimal import Decimal, getcontext
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amores.contfrac import (PartialQuotients, build_alpha_with_beta, build_table, convergents,
                             exp_floor, expand_rational, golden_table, parse_rule,
                             table_from_quotients)
from amores.errors import DomainError, ResourceError, ValidationError


def euclid(num, den):
    """Hand-rolled oracle: repeated floor and reciprocal on exact fractions."""
    x = Fraction(num, den)
    a0 = math.floor(x)
    x -= a0
    out = []
    while x:
        x = 1 / x
        a = math.floor(x)
        out.append(a)
        x -= a
    return a0, out


def decimal_exp_floor(x: Fraction, digits: int = 80) -> int:
    getcontext().prec = digits
    return int((Decimal(x.numerator) / Decimal(x.denominator)).exp().to_integral_value(rounding="ROUND_FLOOR"))


def test_expand_15_over_11():
    pq = expand_rational(15, 11)
    assert (pq.a0, pq.quotients) == (1, (2, 1, 3))


def test_reconstruct_15_over_11():
    t = table_from_quotients([2, 1, 3], a0=1)
    assert (t.p(t.depth), t.q(t.depth)) == (15, 11)


def test_golden_prefix_denominators():
    t = table_from_quotients([1] * 5)
    assert [t.q(n) for n in range(1, 6)] == [1, 2, 3, 5, 8]


@settings(max_examples=300, deadline=None)
@given(st.integers(-10**6, 10**6), st.integers(1, 10**6))
def test_expansion_matches_euclid_oracle(num, den):
    pq = expand_rational(num, den)
    assert (pq.a0, list(pq.quotients)) == euclid(num, den)
    assert pq.value() == Fraction(num, den)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 10**4), min_size=1, max_size=30), st.integers(-5, 5))
def test_table_invariants(quotients, a0):
    t = table_from_quotients(quotients, a0)
    t.check_invariants()
    for n in range(1, t.depth + 1):
        assert t.p(n) * t.q(n - 1) - t.p(n - 1) * t.q(n) == (-1) ** (n - 1)
    assert t.convergent(t.depth) == PartialQuotients(a0, tuple(quotients)).value()


def test_negative_denominator_and_zero():
    assert expand_rational(3, -4).value() == Fraction(-3, 4)
    with pytest.raises(DomainError):
        expand_rational(1, 0)


def test_quotients_must_be_positive():
    with pytest.raises(ValidationError):
        PartialQuotients(0, (1, 0))


@pytest.mark.parametrize("x, expected", [(7, 1096), (Fraction(693147, 10**6), 1), (Fraction(1, 3), 1),
                                         (30, None), (Fraction(2001, 7), None)])
def test_exp_floor_against_decimal(x, expected):
    got = exp_floor(Fraction(x))
    assert got == decimal_exp_floor(Fraction(x), 200)
    if expected is not None:
        assert got == expected


def test_exp_floor_domain():
    with pytest.raises(DomainError):
        exp_floor(0)


def test_beta_recipe_half():
    pq, t = build_alpha_with_beta(Fraction(1, 2), 2)
    assert pq.quotients == (14, 1096)
    assert (t.q(1), t.q(2)) == (14, 15345)
    assert t.q(2) == 1096 * 14 + 1


def test_beta_recipe_bit_budget():
    with pytest.raises(ResourceError):
        build_alpha_with_beta(Fraction(1, 2), 4, bit_budget=4096)


def test_rules_and_build_table(tmp_path):
    f = tmp_path / "a.txt"
    f.write_text("3 1\n4")
    assert build_table(f"list:{f}", 3).quotients.quotients == (3, 1, 4)
    assert build_table("const:2", 4).quotients.quotients == (2, 2, 2, 2)
    assert build_table("beta:1/2", 2).q(2) == 15345
    with pytest.raises(ValidationError):
        build_table("list:1,2", 3)
    with pytest.raises(ValidationError):
        parse_rule("nope:1")


def test_convergents_alternate_around_value():
    t = golden_table(30)
    x = t.convergent(30)
    for n in range(0, 28, 2):
        assert t.convergent(n) < x < t.convergent(n + 1)
