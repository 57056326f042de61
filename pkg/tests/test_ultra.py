import random
from collections import Counter
from fractions import Fraction

import mpmath
import pytest

from qheun.errors import ExcludedCaseError, RegimeError
from qheun.qmono import QSum, equiv_approx, equiv_sim, qpow
from qheun.sampling import sample_params
from qheun.spectral import coefficients_exact, derive, spectral_polynomial
from qheun.ultra import (
    BALANCED,
    CaseTag,
    R31,
    R32,
    R33,
    EXCLUDED,
    UNCLASSIFIED,
    balanced_exponent,
    classify,
    collision_check,
    leading_recursion,
    multiplicity_prefactors,
    pn_root_pair,
    predict_roots,
    refined_predictions,
    tilde_cN1,
)

F = Fraction
H = F(1, 2)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def test_classify_p1(p1):
    tag = classify(p1)
    assert (tag.regime, tag.subcase) == (R31, "i")


def test_classify_p2(p2):
    tag = classify(p2)
    assert (tag.regime, tag.subcase) == (R32, "i")


def test_classify_p3(p3):
    tag = classify(p3)
    assert (tag.regime, tag.K) == (R33, 1)


def test_classify_p4(p4):
    tag = classify(p4)
    assert (tag.regime, tag.subcase) == (R31, "ii-1")


def test_classify_exclusion_set_boundary():
    # 2h2-l1-l2-beta = -2 exactly
    p = derive(-6, 1, 3, 4, 0, -3, -3, 1, 1)
    tag = classify(p)
    assert tag.regime == EXCLUDED
    assert "-2" in tag.detail


def test_classify_unclassified_needs_switch_condition():
    # -2N < 1+h2-l2-beta < 0 but h2-l1+1 <= 0
    p = derive(0, 3, F(9, 2), F(14, 3), 0, F(-13, 6), 0, 1, 1)
    assert p.N == 1
    tag = classify(p)
    assert tag.regime == UNCLASSIFIED


def test_classify_regime_separator_is_excluded():
    # valid parameters sitting exactly on 1+h2-l2-beta = 0
    p = derive(F(-9, 2), 1, 0, F(3, 2), 0, F(-3, 2), H, 1, 1)
    assert p.N == 1
    assert classify(p).regime == EXCLUDED


def test_classify_odd_integer_family_collision_is_excluded():
    # 1+h2-l2-beta = -1 makes the two switching-regime families share the
    # exponent n+m = 3: the factored product has a double root, so the
    # simple per-root asymptotics are withheld
    p = derive(-5, 1, 0, F(5, 2), 0, -1, H, 1, 1)
    assert p.N == 2
    tag = classify(p)
    assert tag.regime == EXCLUDED
    assert "odd integer" in tag.detail
    # the sim-level product itself still matches the exact polynomial,
    # double root included
    til = tilde_cN1(p, CaseTag(R33, K=1))
    exact = spectral_polynomial(p)
    for j in range(p.N + 2):
        assert equiv_sim(exact.reduced_coefficient(j), til.reduced_coefficient(j))


# ---------------------------------------------------------------------------
# leading recursion
# ---------------------------------------------------------------------------


def test_leading_recursion_p3_branch_switch(p3):
    lead = leading_recursion(p3, classify(p3))
    # n=1 uses the q^{2n-1/2-l2-beta} branch: c_1 constant term t2^{-1} q^{-2}
    assert lead[1].coeffs[0] == QSum.term(1, t2pow=-1, qexp=-2)
    # n=2 switches to the q^{1/2-h2} branch: c_2 constant term t2^{-2} q^{-5/2}
    assert lead[2].coeffs[0] == QSum.term(1, t2pow=-2, qexp=F(-5, 2))


def test_leading_recursion_matches_exact(p1, p2, p3):
    for p in (p1, p2, p3):
        tag = classify(p)
        lead = leading_recursion(p, tag)
        exact, _ = coefficients_exact(p)
        for n in range(p.N + 2):
            for j in range(n + 1):
                a = exact[n].reduced_coefficient(j)
                b = lead[n].coeffs[j]
                if tag.regime == R33:
                    assert equiv_sim(a, b)
                else:
                    assert equiv_approx(a, b)


def test_leading_recursion_rejects_unclassified(p1):
    with pytest.raises(RegimeError):
        leading_recursion(p1, CaseTag(EXCLUDED))


# ---------------------------------------------------------------------------
# limit products
# ---------------------------------------------------------------------------


def test_tilde_p2_is_single_quadratic(p2):
    # N = 1 odd: the product is p_2 alone; build it by hand
    u = p2.lambda1 - p2.h1 - p2.h2
    ca = 2 * 2 - H - p2.l2 - p2.beta
    cb = 2 * 2 - 2 - H - p2.l2 - p2.beta
    e1, e0 = 2 - 1 + u, 2 - 2 + u
    hand = [
        qpow(ca + cb) - qpow(2 * 2 - 1 - p2.l1 - p2.l2 - p2.beta),
        qpow(e1 + cb) + qpow(e0 + ca),
        qpow(e1 + e0),
    ]
    til = tilde_cN1(p2, classify(p2))
    assert list(til.coeffs) == hand


def test_tilde_p1_structure(p1):
    til = tilde_cN1(p1, classify(p1))
    assert til.degree == 3
    # N even: one lone linear factor (E q^{N+lambda1-h1-h2} + q^{1/2-h2})
    # times p_1; the top coefficient is q^{(4*1-3)+2u+N+u}
    u = p1.lambda1 - p1.h1 - p1.h2
    assert til.coeffs[3] == qpow(1 + 2 * u + p1.N + u)


def test_tilde_p3_exact_slices(p3):
    # hand-computed sim-level slices for the switching product at K=1
    til = tilde_cN1(p3, classify(p3))
    assert til.leading_coefficient_slice(2) == QSum.term(1, -2, -2, -3)
    assert til.leading_coefficient_slice(1) == QSum.term(1, -1, -2, -3)
    assert til.leading_coefficient_slice(0) == QSum.term(1, 0, -2, F(-5, 2))


def test_theorem_equivalence_p1_to_p4(p1, p2, p3, p4):
    for p, want_sim in ((p1, False), (p2, False), (p3, True), (p4, False)):
        tag = classify(p)
        exact = spectral_polynomial(p)
        til = tilde_cN1(p, tag)
        assert til.degree == p.N + 1
        for j in range(p.N + 2):
            a = exact.reduced_coefficient(j)
            b = til.reduced_coefficient(j)
            assert equiv_approx(a, b)
            if want_sim:
                assert equiv_sim(a, b)


# ---------------------------------------------------------------------------
# factor root pairs
# ---------------------------------------------------------------------------


def test_pn_root_pair_one_scale(p1):
    tag = classify(p1)
    r1, r2 = pn_root_pair(p1, 1, tag)
    assert (r1.sign, r1.d, r1.prefactor) == (-1, F(-7, 2), "t1")
    assert (r2.sign, r2.d, r2.prefactor) == (-1, F(-5, 2), "t1")


def test_pn_root_pair_balanced(p4):
    tag = classify(p4)
    r1, r2 = pn_root_pair(p4, 1, tag)
    assert {r1.sign, r2.sign} == {1, -1}
    assert r1.d == r2.d == balanced_exponent(p4) == 0
    assert r1.prefactor == r2.prefactor == BALANCED


def test_pn_root_pair_split_r32():
    p = derive(0, 1, 3, 4, 0, F(-5, 2), H, 1, 1)
    tag = classify(p)
    assert (tag.regime, tag.subcase, tag.m) == (R32, "iii-1", 0)
    big, small = pn_root_pair(p, 2, tag)
    assert (big.sign, big.d, big.prefactor) == (-1, F(-1), "t1")
    assert (small.sign, small.d, small.prefactor) == (1, F(-1, 2), "t2")


def test_pn_root_pair_boundary_raises(p1):
    # 4n + S = 2 exactly at n = (2 - S)/4; craft S = -2 via l1 and probe n=1
    p = derive(-6, 1, 3, 4, 0, -3, -3, 1, 1)
    with pytest.raises(ExcludedCaseError):
        pn_root_pair(p, 1, CaseTag(R31, "i"))


# ---------------------------------------------------------------------------
# full predictions
# ---------------------------------------------------------------------------


def test_predict_roots_p1(p1):
    preds = predict_roots(p1, classify(p1))
    assert [(e.sign, e.d, e.prefactor, e.multiplicity) for e in preds] == [
        (-1, F(-9, 2), "t1", 1),
        (-1, F(-7, 2), "t1", 1),
        (-1, F(-5, 2), "t1", 1),
    ]
    assert all(e.sharp for e in preds)


def test_predict_roots_p2(p2):
    preds = predict_roots(p2, classify(p2))
    assert [(e.sign, e.d) for e in preds] == [(-1, F(-1)), (-1, F(0))]


def test_predict_roots_p3(p3):
    preds = predict_roots(p3, classify(p3))
    assert [(e.sign, e.d, e.prefactor) for e in preds] == [
        (-1, F(0), "t1"),
        (-1, H, "t1"),
    ]
    assert all(e.sharp for e in preds)


def test_predict_roots_p4_multiplicities(p4):
    preds = predict_roots(p4, classify(p4))
    assert sorted((e.sign, e.multiplicity) for e in preds) == [(-1, 2), (1, 2)]
    assert all(e.d == 0 and e.prefactor == BALANCED for e in preds)


def test_prediction_count_is_n_plus_one():
    rng = random.Random(23)
    for regime in (R31, R32, R33):
        for _ in range(6):
            p = sample_params(regime, rng, n_max=6)
            preds = predict_roots(p, classify(p))
            assert sum(e.multiplicity for e in preds) == p.N + 1


# ---------------------------------------------------------------------------
# the paper's case lists, written out independently
# ---------------------------------------------------------------------------


def _expected_multiset(p, tag):
    """(sign, d) multiset straight from the case-list displays."""
    lam, N = p.lambda1, p.N
    g = balanced_exponent(p)
    out = Counter()

    def balanced(m):
        if m:
            out[(1, g)] += m
            out[(-1, g)] += m

    if tag.regime == R31:
        def d(j):
            return -j + F(3, 2) - lam + p.h1

        if tag.subcase == "i":
            for j in range(1, N + 2):
                out[(-1, d(j))] += 1
        elif tag.subcase == "ii-1":
            balanced((N + 1) // 2)
        elif tag.subcase == "ii-2":
            balanced(N // 2)
            out[(-1, d(N + 1))] += 1
        elif tag.subcase == "iii-1":
            m = tag.m
            balanced(m - 1)
            out[(1, 2 * m - F(3, 2) + lam + p.alpha1 + p.alpha2 + p.h2)] += 1
            for j in range(2 * m, N + 2):
                out[(-1, d(j))] += 1
        else:  # iii-2
            m = tag.m
            balanced(m)
            for j in range(2 * m + 1, N + 2):
                out[(-1, d(j))] += 1
    elif tag.regime == R32:
        def d(j):
            return j - F(3, 2) + lam + p.l1 + p.alpha1 + p.alpha2

        if tag.subcase == "i":
            for j in range(1, N + 2):
                out[(-1, d(j))] += 1
        elif tag.subcase == "ii-1":
            balanced((N + 1) // 2)
        elif tag.subcase == "ii-2":
            balanced(N // 2)
            out[(-1, d(1))] += 1
        elif tag.subcase == "iii-1":
            m = tag.m
            for j in range(1, N - 2 * m + 1):
                out[(-1, d(j))] += 1
            out[(1, -N + 2 * m + F(3, 2) - lam - p.l1 + p.h1 + p.h2)] += 1
            balanced(m)
        else:  # iii-2
            m = tag.m
            for j in range(1, N - 2 * m + 2):
                out[(-1, d(j))] += 1
            balanced(m)
    else:  # R33
        for j in range(1, tag.K + 1):
            out[(-1, j - F(3, 2) + lam + p.l1 + p.alpha1 + p.alpha2)] += 1
        for j in range(tag.K + 1, N + 2):
            out[(-1, -j + F(3, 2) + p.h1 - lam)] += 1
    return out


def test_predictions_match_case_lists_randomized():
    rng = random.Random(31)
    seen = set()
    for regime in (R31, R32, R33):
        for _ in range(25):
            p = sample_params(regime, rng, n_max=6)
            tag = classify(p)
            seen.add((regime, tag.subcase))
            got = Counter()
            for e in predict_roots(p, tag):
                got[(e.sign, e.d)] += e.multiplicity
            assert got == _expected_multiset(p, tag), (p, tag)
    # the sampler should exercise several subcases per regime
    assert len(seen) >= 6


# ---------------------------------------------------------------------------
# the step-two approx recursions behind the limit products
# ---------------------------------------------------------------------------


def _approx_poly(prod, target, degree):
    for j in range(degree + 1):
        assert equiv_approx(prod[j], target.reduced_coefficient(j)), j


def test_two_step_recursion_r31():
    # c_{2n} is approx c_{2n-2} times the quadratic factor, and c_{2n+1}
    # approx c_{2n} times the linear factor
    from qheun.ultra import _poly_mul, _r31_pn

    rng = random.Random(41)
    for _ in range(5):
        p = sample_params(R31, rng, n_max=6)
        exact, _ = coefficients_exact(p)
        u = p.lambda1 - p.h1 - p.h2
        for n in range(1, (p.N + 1) // 2 + 1):
            if 2 * n < p.N + 1:
                base = [exact[2 * n - 2].reduced_coefficient(j) for j in range(2 * n - 1)]
                prod = _poly_mul(base, _r31_pn(p, n))
                _approx_poly(prod, exact[2 * n], 2 * n)
            if 2 * n < p.N:
                base = [exact[2 * n].reduced_coefficient(j) for j in range(2 * n + 1)]
                prod = _poly_mul(base, [qpow(H - p.h2), qpow(2 * n + u)])
                _approx_poly(prod, exact[2 * n + 1], 2 * n + 1)


def test_two_step_recursion_r32():
    # c_n is approx c_{n-2} times the mirrored quadratic, n = 2..N+1
    from qheun.ultra import _poly_mul, _r32_pn

    rng = random.Random(43)
    for _ in range(5):
        p = sample_params(R32, rng, n_max=6)
        exact, _ = coefficients_exact(p)
        for n in range(2, p.N + 2):
            base = [exact[n - 2].reduced_coefficient(j) for j in range(n - 1)]
            prod = _poly_mul(base, _r32_pn(p, n))
            _approx_poly(prod, exact[n], n)


# ---------------------------------------------------------------------------
# multiplicity refinement
# ---------------------------------------------------------------------------


def test_golden_ratio_prefactors(p4):
    tag = classify(p4)
    vals = multiplicity_prefactors(p4, tag)
    with mpmath.workprec(128):
        hi = (mpmath.sqrt(5) + 1) / 2
        lo = (mpmath.sqrt(5) - 1) / 2
        want = sorted([-hi, -lo, lo, hi])
        assert len(vals) == 4
        for v, w in zip(sorted(vals), want):
            assert abs(v - w) < mpmath.mpf(2) ** -100


def test_refined_predictions_split_multiplicity(p4):
    refined = refined_predictions(p4, classify(p4))
    assert len(refined) == 4
    assert all(e.multiplicity == 1 and not isinstance(e.prefactor, str) for e in refined)
    mags = sorted(float(e.prefactor) for e in refined)
    assert mags[0] == pytest.approx(0.618033988749895, rel=1e-12)
    assert mags[-1] == pytest.approx(1.618033988749895, rel=1e-12)


def test_no_refinement_for_simple_predictions(p1):
    assert multiplicity_prefactors(p1, classify(p1)) == []
    assert refined_predictions(p1, classify(p1)) == predict_roots(p1, classify(p1))


def test_prefactors_scale_with_sqrt_t1_t2(p4):
    # the quartic prefactor equation carries t1 t2: with t1 = t2 = 2 the
    # refined magnitudes become 2*(sqrt(5)+-1)/2 = sqrt(5)+-1
    p = p4.with_value("t1", 2).with_value("t2", 2)
    vals = multiplicity_prefactors(p, classify(p))
    with mpmath.workprec(128):
        mags = sorted({abs(v) for v in vals})
        assert abs(mags[0] - (mpmath.sqrt(5) - 1)) < mpmath.mpf(2) ** -100
        assert abs(mags[1] - (mpmath.sqrt(5) + 1)) < mpmath.mpf(2) ** -100


# ---------------------------------------------------------------------------
# collision check
# ---------------------------------------------------------------------------


def test_collision_check_empty_for_p1(p1):
    assert collision_check(p1, 3, classify(p1)) == []


def test_collision_check_detects_boundary():
    p = derive(-6, 1, 3, 4, 0, -3, -3, 1, 1)  # 2h2-l1-l2-beta = -2
    hits = collision_check(p, 2, CaseTag(R31, "i"))
    assert hits == [(0, 1, 0)]


def test_collision_check_m1_always_empty():
    rng = random.Random(5)
    for regime in (R31, R32):
        p = sample_params(regime, rng, n_max=5)
        assert collision_check(p, 1, classify(p)) == []


def test_collision_check_mirrors_exclusion_sets():
    rng = random.Random(17)
    for regime in (R31, R32):
        for _ in range(10):
            p = sample_params(regime, rng, n_max=5)
            tag = classify(p)
            for M in range(1, p.N + 2):
                assert collision_check(p, M, tag) == []
