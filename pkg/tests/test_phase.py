import dataclasses
import math
import warnings
from fractions import Fraction

import pytest

from amores.contfrac import build_table, golden_table, table_from_quotients
from amores.dioph import AlphaEnclosure, torus_norm, verify_prop41
from amores.errors import ConstructionError, SearchError, ValidationError
from amores.phase import (PhaseConstructionState, construct_theta, delta_of_construction,
                          find_anchor_k0, interval_length_defect, orbit_enclosure,
                          select_case)

CASE2_QUOTIENTS = [1, 9] + [10**12, 5000] * 4


def brute_anchor(a: Fraction) -> int:
    k = 1
    while not Fraction(1, 10) <= (-k * a) % 1 <= Fraction(1, 5):
        k += 1
    return k


@pytest.mark.parametrize("a", [Fraction(17, 20), Fraction(3, 20) + Fraction(1, 997), Fraction(7, 31)])
def test_anchor_matches_brute_force(a):
    enc = AlphaEnclosure(a - Fraction(1, 10**12), a + Fraction(1, 10**12))
    assert find_anchor_k0(enc) == brute_anchor(a)


def test_anchor_golden_is_three():
    t = golden_table(40)
    assert find_anchor_k0(AlphaEnclosure.from_table(t)) == 3
    assert brute_anchor(t.convergent(40)) == 3


def test_anchor_search_cap():
    a = Fraction(1, 2) + Fraction(1, 10**7)
    enc = AlphaEnclosure(a - Fraction(1, 10**15), a + Fraction(1, 10**15))
    with pytest.raises(SearchError):
        find_anchor_k0(enc, search_cap=100)


def test_select_case():
    assert select_case(build_table("beta:1/2", 2)) == "Case1"
    assert select_case(table_from_quotients(CASE2_QUOTIENTS)) == "Case2"


def _assert_intervals_exact(state, table):
    """Re-derive every I_j condition with the deepest exact convergent standing in for alpha."""
    a = table.convergent(table.depth)
    eta = state.eta
    for j in state.j_values:
        q = table.q(state.scale_index(j))
        x = (-state.k(j) * a) % 1
        for theta in state.interval(j):
            d = 2 * theta - x
            if state.case_tag == "Case1":
                assert -10 * eta / q <= d <= -eta / (10 * q)
            else:
                assert eta / (10 * q) <= d <= 10 * eta / q
    for j in list(state.j_values)[1:]:
        lo, hi = state.interval(j)
        plo, phi = state.interval(j - 1)
        assert plo <= lo <= hi <= phi


def test_shipped_construction(shipped_table, shipped_phase):
    s = shipped_phase
    assert (s.case_tag, s.j0, s.k_seq) == ("Case1", 2, (30, 10600030))
    _assert_intervals_exact(s, shipped_table)
    for j in s.j_values:
        assert interval_length_defect(s, shipped_table, j) == 0
    # k_{j+1} = k_j + floor(eta q_{2j+1}/q_{2j}) q_{2j}
    q4, q5 = shipped_table.q(4), shipped_table.q(5)
    assert s.k(3) == s.k(2) + math.floor(s.eta * q5 / q4) * q4


def test_state_round_trip(shipped_phase):
    assert PhaseConstructionState.from_dict(shipped_phase.to_dict()) == shipped_phase


def test_case2_construction():
    t = table_from_quotients(CASE2_QUOTIENTS)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = construct_theta(t, Fraction(1, 100), 2, relaxed=True)
    assert s.case_tag == "Case2" and s.j0 == 2
    _assert_intervals_exact(s, t)
    for j in s.j_values:
        assert all(r.ok for r in verify_prop41(t, s, j, cap=5000))


def test_nesting_failure_on_small_quotients():
    t = table_from_quotients([2] * 30)
    with pytest.warns(UserWarning):
        with pytest.raises(ConstructionError) as info:
            construct_theta(t, Fraction(1, 100), 2, relaxed=True, j0=1)
    assert info.value.j == 2 and info.value.gap > 0


def test_eta_guard(shipped_table):
    with pytest.raises(ValidationError):
        construct_theta(shipped_table, Fraction(1, 50), 2)
    with pytest.warns(UserWarning):
        s = construct_theta(shipped_table, Fraction(1, 50), 1, relaxed=True)
    assert s.notes


def test_strict_threshold_rejects_desk_table(shipped_table):
    with pytest.raises(ValidationError):
        construct_theta(shipped_table, Fraction(1, 100), 2)


def test_depth_guard(shipped_table):
    with pytest.raises(ValidationError):
        construct_theta(shipped_table.truncate(5), Fraction(1, 100), 2, relaxed=True)


def test_mu_table_single_step():
    t = build_table("beta:1/2", 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = construct_theta(t, Fraction(1, 100), 1, relaxed=True, j0=1)
    assert s.k_seq == (find_anchor_k0(AlphaEnclosure.from_table(t)),)
    assert interval_length_defect(s, t, 1) == 0


def test_delta_doubles_when_k_halved(shipped_table, shipped_phase):
    d = delta_of_construction(shipped_phase, shipped_table)
    half = dataclasses.replace(shipped_phase, k_seq=tuple(k // 2 for k in shipped_phase.k_seq))
    dh = delta_of_construction(half, shipped_table)
    for r, rh in zip(d.rows, dh.rows):
        assert rh.value == pytest.approx(2 * r.value, rel=1e-12)
        assert r.value == pytest.approx(math.log(shipped_table.q(shipped_phase.scale_index(r.j))) / r.k)


def test_orbit_enclosure_contains_exact(shipped_table):
    a = shipped_table.convergent(shipped_table.depth)
    enc = AlphaEnclosure.from_table(shipped_table)
    for k in (1, 30, 10600030, -7):
        lo, hi = orbit_enclosure(k, enc)
        assert lo <= (-k * a) % 1 <= hi
