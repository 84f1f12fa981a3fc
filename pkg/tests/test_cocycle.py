import math
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amores.cocycle import (CocycleParams, box_determinant, check_claims, compose_check, det_check,
                            green_edge, lagrange_terms, lyapunov_estimate, pk_sequence,
                            transfer_product, uniformity_check)
from amores.contfrac import golden_table
from amores.errors import ConditioningError, DegeneracyError, DomainError, ValidationError

GOLD = golden_table(60)


def params(lam=3.0, E=0.3, theta=Fraction(1, 10), prec=53):
    return CocycleParams.from_table(GOLD, lam, E, theta, precision_bits=prec)


def naive_product(p: CocycleParams, k: int, shift: int = 0) -> np.ndarray:
    A = np.eye(2)
    for j in range(shift, shift + k):
        v = 2 * p.lam * math.cos(2 * math.pi * float(p.phase(j)))
        A = np.array([[p.E - v, -1.0], [1.0, 0.0]]) @ A
    return A


def dense_box(p: CocycleParams, x1: int, x2: int) -> np.ndarray:
    """``H - E`` restricted to ``[x1, x2]``."""
    v = [2 * p.lam * math.cos(2 * math.pi * float(p.phase(j))) for j in range(x1, x2 + 1)]
    n = len(v)
    return np.diag(v) + np.eye(n, k=1) + np.eye(n, k=-1) - p.E * np.eye(n)


@pytest.mark.parametrize("k", [1, 5, 17, 40])
def test_transfer_product_matches_naive(k):
    p = params()
    tp = transfer_product(p, k)
    ref = naive_product(p, k)
    np.testing.assert_allclose(tp.as_array() * math.exp(tp.log_scale), ref, rtol=1e-12, atol=1e-12 * abs(ref).max())


def test_transfer_product_high_precision_agrees():
    p = params()
    lo = transfer_product(p, 300)
    hi = transfer_product(p, 300, prec=200)
    assert float(hi.log_scale) == pytest.approx(lo.log_scale, rel=1e-12)
    np.testing.assert_allclose(hi.as_array(), lo.as_array(), atol=1e-10)


def test_inverse_product_undoes_forward():
    p = params()
    fwd = naive_product(p, 12)
    inv = transfer_product(p, -12, 12)
    adj = np.array([[fwd[1, 1], -fwd[0, 1]], [-fwd[1, 0], fwd[0, 0]]])  # det = 1
    np.testing.assert_allclose(inv.as_array() * math.exp(inv.log_scale), adj, rtol=1e-9)
    with pytest.raises(DomainError):
        transfer_product(p, 0)


def test_ak_entries_equal_box_determinants():
    p = params()
    for k in (3, 50, 200):
        tp = transfer_product(p, k, prec=256)
        seq = pk_sequence(p.with_(precision_bits=256), k)
        seq1 = pk_sequence(p.with_(precision_bits=256), k, base_shift=1)
        expected = [(seq.sign(k), seq.log_abs(k)), (-seq1.sign(k - 1), seq1.log_abs(k - 1)),
                    (seq.sign(k - 1), seq.log_abs(k - 1))]
        for (s, la), (es, ela) in zip(tp.log_entries()[:3], expected):
            assert s == es
            assert abs(la - ela) <= 1e-9 * max(1.0, abs(ela))


def test_pk_against_dense_determinant():
    p = params()
    seq = pk_sequence(p, 40)
    for k in (1, 7, 25, 40):
        # det(E - H) on [0, k-1]
        sign, logdet = np.linalg.slogdet(-dense_box(p, 0, k - 1))
        assert seq.sign(k) == int(sign)
        assert seq.log_abs(k) == pytest.approx(logdet, rel=1e-10, abs=1e-10)
    assert box_determinant(p, 3, 12) == (pk_sequence(p, 10, 3).sign(10), pk_sequence(p, 10, 3).log_abs(10))


def test_pk_precision_escalates_on_cancellation():
    # E at an eigenvalue of the 2-site box makes P_2 cancel to roundoff
    p = params()
    E = float(np.linalg.eigvalsh(dense_box(p.with_(E=0.0), 0, 1))[0])
    seq = pk_sequence(p.with_(E=E), 5)
    assert seq.precision_bits > 53
    assert seq.log_abs(2) < -30


def test_det_and_compose_checks():
    p = params(prec=128)
    d = det_check(p, 2000)
    assert d.literal_deviation <= 1e-9 and d.cancellation_deviation <= 1e-9
    assert d.literal_bits > 128
    assert compose_check(p, 200) <= 1e-9


def test_lyapunov_off_spectrum_exceeds_log_lambda():
    p = params(lam=3.0, E=20.0)
    est = lyapunov_estimate(p, 500, 16)
    assert est.L_avg > math.log(3)


def test_lyapunov_domain():
    with pytest.raises(DomainError):
        lyapunov_estimate(params(), 50, 16)
    with pytest.raises(DomainError):
        lyapunov_estimate(params(), 200, 4)


def test_green_edges_against_dense_inverse():
    p = params(lam=3.0, E=0.41)
    x1, x2 = 5, 24
    G = np.linalg.inv(dense_box(p, x1, x2))
    for y in (x1, 11, x2):
        ge = green_edge(p, (x1, x2), y)
        gl = ge.left[0] * math.exp(ge.left[1])
        gr = ge.right[0] * math.exp(ge.right[1])
        assert gl == pytest.approx(G[0, y - x1], rel=1e-9, abs=1e-14)
        assert gr == pytest.approx(G[y - x1, -1], rel=1e-9, abs=1e-14)


def test_green_expansion_residual_for_exact_solution():
    # any generalized solution phi obeys the block expansion exactly
    p = params(lam=3.0, E=0.41)
    phi = {0: 0.0, 1: 1.0}
    for n in range(1, 40):
        v = 2 * p.lam * math.cos(2 * math.pi * float(p.phase(n)))
        phi[n + 1] = (p.E - v) * phi[n] - phi[n - 1]
    ge = green_edge(p, (10, 18), 14, phi=lambda n: phi[n])
    assert ge.residual <= 1e-8 * max(abs(phi[n]) for n in range(9, 20))


def test_green_flags_near_singular_box():
    p = params(lam=3.0)
    w = np.linalg.eigvalsh(dense_box(p.with_(E=0.0), 0, 30))
    with pytest.raises(ConditioningError):
        green_edge(p.with_(E=float(w[15])), (0, 30), 15)


def test_lagrange_two_nodes():
    res = lagrange_terms([Fraction(0), Fraction(1, 4)])
    np.testing.assert_allclose(res.lag, [0.0, math.log(2)], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 10**6), min_size=2, max_size=12, unique=True))
def test_lagrange_against_dense_grid(nums):
    thetas = [Fraction(n, 2 * 10**6 + 1) for n in nums]
    nodes = np.cos(2 * np.pi * np.array([float(t) for t in thetas]))
    if np.min(np.abs(nodes[:, None] - nodes[None, :]) + np.eye(len(nodes))) < 1e-5:
        return
    res = lagrange_terms(thetas)
    x = np.linspace(-1, 1, 200001)
    for m in range(len(nodes)):
        others = np.delete(nodes, m)
        with np.errstate(divide="ignore"):
            brute = np.max(np.sum(np.log(np.abs(x[:, None] - others)), axis=1)) \
                - np.sum(np.log(np.abs(nodes[m] - others)))
        assert res.lag[m] >= brute - 1e-9
        assert res.lag[m] <= brute + 1e-3 * max(1.0, abs(brute))


def test_lagrange_degenerate_nodes():
    with pytest.raises(DegeneracyError):
        lagrange_terms([Fraction(1, 10), Fraction(9, 10)])  # cos 2 pi theta coincide


def test_uniformity_lemma_random_sets():
    rng = random.Random(7)
    alpha = GOLD.convergent(GOLD.depth)
    for _ in range(5):
        k = rng.randint(3, 40)
        theta0 = Fraction(rng.randint(0, 10**6), 10**6)
        thetas = [theta0 + m * alpha for m in range(k + 1)]
        p = CocycleParams(3.0, 0.5, theta0, alpha)
        assert uniformity_check(p, thetas).holds()


def test_claim3_on_shipped(shipped_table, shipped_phase):
    rep = check_claims(shipped_table, shipped_phase, 4, "C3")
    assert rep.q_n == 53 and rep.ok
    assert len(rep.sites) == 2 * 53
    assert rep.bound == pytest.approx((math.log(shipped_table.q(5)) / 53 + 0.1) * 53)


def test_claim_parity_and_sites(shipped_table, shipped_phase):
    with pytest.raises(ValidationError):
        check_claims(shipped_table, shipped_phase, 4, "C1")
    with pytest.raises(ValidationError):
        check_claims(shipped_table, shipped_phase, 3, "C3")
    with pytest.raises(ValidationError):
        check_claims(shipped_table, shipped_phase, 4, "C3", ell=0)
    rep = check_claims(shipped_table, shipped_phase, 3, "C2")
    q = shipped_table.q(3)
    h = q // 2
    assert rep.sites == tuple(sorted(set(range(-h, q - h)) | set(range(q - h, 2 * q - h))))
