import random
from fractions import Fraction

import mpmath
import pytest

from qheun.errors import DomainError, ParameterError
from qheun.qmono import QSum, eval_numeric, qpow, ultradiscretize
from qheun.sampling import sample_params
from qheun.spectral import (
    coefficients_exact,
    coefficients_numeric,
    derive,
    recursion_coeff_rows,
    residual_check,
    series_coefficient_values,
    spectral_polynomial,
)
from qheun.roots import find_spectral_roots

F = Fraction
H = F(1, 2)


# ---------------------------------------------------------------------------
# parameter derivation
# ---------------------------------------------------------------------------


def test_derive_p1(p1):
    assert p1.lambda1 == -2
    assert p1.N == 2


def test_derive_p2(p2):
    assert p2.lambda1 == -1
    assert p2.N == 1


def test_derive_rejects_noninteger_n():
    with pytest.raises(ParameterError, match="not a nonnegative integer"):
        derive(0, 1, 0, 1, 0, 0, H, 1, 1)


def test_derive_rejects_beta_at_one():
    with pytest.raises(ParameterError, match="beta"):
        derive(-5, 1, 0, 1, 0, H, 1, 1, 1)


def test_derive_reports_all_violations():
    with pytest.raises(ParameterError) as err:
        derive(1, 0, 1, 0, 0, H, H, -1, 1)
    text = str(err.value)
    assert "h1" in text and "l1" in text and "t1" in text


def test_with_value_rederives(p1):
    q = p1.with_value("t1", F(2))
    assert q.t1 == 2 and q.N == p1.N


# ---------------------------------------------------------------------------
# recursion rows
# ---------------------------------------------------------------------------


def test_row_b_is_single_power(p2):
    _, B, _, _ = recursion_coeff_rows(p2, 1)
    assert B == qpow(-1)  # q^{n-1+lambda1} at n=1


def test_row_c_matches_hand_expansion(p1):
    # four summands written out by hand for P1, n=1
    _, _, C, _ = recursion_coeff_rows(p1, 1)
    expected = (
        QSum.term(1, t1pow=1, qexp=F(-9, 2))   # q^{1/2+h1}
        + QSum.term(1, t2pow=1, qexp=F(3, 2))  # q^{1/2+h2}
        + QSum.term(1, t1pow=1, qexp=F(-4))    # q^{l1+2(1+lambda1)+a1+a2-5/2}
        + QSum.term(1, t2pow=1, qexp=F(-3))
    )
    assert C == expected


def test_row_d_leading_exponent_at_n1(p1):
    # factors (1-q^{-1-N}) and (1-q^{-1-N+alpha2-alpha1}); the product's
    # leading term is +q^{1+(-1-N)+(-1-N+a2-a1)}
    _, _, _, D = recursion_coeff_rows(p1, 1)
    mu, sign = ultradiscretize(D)
    assert (mu, sign) == (1 + (-3) + (-3 + H), 1)


def test_row_index_range(p1):
    with pytest.raises(DomainError):
        recursion_coeff_rows(p1, 0)
    with pytest.raises(DomainError):
        recursion_coeff_rows(p1, p1.N + 2)


# ---------------------------------------------------------------------------
# exact coefficients
# ---------------------------------------------------------------------------


def test_c0_is_one(p1, p2, p3, p4):
    for p in (p1, p2, p3, p4):
        polys, _ = coefficients_exact(p, 0)
        assert polys[0].coeffs == (QSum.one(),)


def test_c1_leading_of_e_coefficient(p2):
    polys, _ = coefficients_exact(p2, 1)
    lead = polys[1].leading_coefficient_slice(1)
    assert lead == QSum.term(1, t1pow=-1, t2pow=-1, qexp=-2)


def test_spectral_degrees(p1, p2, p4):
    assert spectral_polynomial(p2).degree == 2
    assert spectral_polynomial(p1).degree == 3
    assert spectral_polynomial(p4).degree == 4


def test_degree_invariant_randomized():
    rng = random.Random(11)
    for regime in ("R31", "R32", "R33"):
        p = sample_params(regime, rng, n_max=4)
        polys, _ = coefficients_exact(p)
        for n, ep in enumerate(polys):
            assert ep.degree == n
            assert not ep.coeffs[n].is_zero()


# ---------------------------------------------------------------------------
# exact/numeric consistency
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("bits", [192, 512])
def test_exact_matches_numeric_recursion(p1, p2, p3, bits):
    rng = random.Random(3)
    extra = sample_params("R31", rng, N=3)
    for p in (p1, p2, p3, extra):
        q = F(1, 100)
        E0 = F(7, 5)
        polys, _ = coefficients_exact(p)
        numeric = series_coefficient_values(p, E0, q, bits=bits, up_to=p.N + 1)
        for n, ep in enumerate(polys):
            vals = ep.coefficient_values(q, p.t1, p.t2, bits=bits)
            with mpmath.workprec(bits):
                exact_val = mpmath.mpf(0)
                for v in reversed(vals):
                    exact_val = exact_val * mpmath.mpf(E0.numerator) / E0.denominator + v
                err = abs(exact_val - numeric[n])
                assert err <= mpmath.mpf(2) ** (-bits + 64) * (abs(numeric[n]) + 1)


# ---------------------------------------------------------------------------
# residual oracle
# ---------------------------------------------------------------------------


def test_residual_small_at_roots(p3):
    roots, _ = find_spectral_roots(p3, F(1, 1000), 512)
    for r in roots:
        sol = coefficients_numeric(p3, r, F(1, 1000), 512)
        assert residual_check(p3, sol) < mpmath.mpf(10) ** -30


def test_residual_detects_non_root(p2):
    sol = coefficients_numeric(p2, 1, F(1, 1000), 512)
    assert residual_check(p2, sol) > mpmath.mpf(10) ** -6


def test_residual_n_zero_closed_form():
    # N = 0: the single condition c_1(E) = 0 is linear, and the solution
    # f(x) = x^{lambda1} alone must satisfy the equation
    p = derive(0, 1, 1, 3, 0, F(-3, 2), H, 1, 1)
    assert p.N == 0
    roots, _ = find_spectral_roots(p, F(1, 1000), 256)
    assert len(roots) == 1
    sol = coefficients_numeric(p, roots[0], F(1, 1000), 256)
    assert sol.coeffs == (mpmath.mpf(1),)
    assert residual_check(p, sol) < mpmath.mpf(10) ** -30


def test_eval_of_exact_epoly_consistent_with_eval_numeric(p2):
    # the reduced coefficient times the denominator must evaluate back to
    # the raw numerator (sanity for the structured-denominator bookkeeping)
    ep = spectral_polynomial(p2)
    q = F(1, 50)
    for j in range(ep.degree + 1):
        raw = eval_numeric(ep.coeffs[j], q, p2.t1, p2.t2, bits=128)
        red = eval_numeric(ep.reduced_coefficient(j), q, p2.t1, p2.t2, bits=128)
        mono = eval_numeric(
            QSum((ep.denom_monomial,)), q, p2.t1, p2.t2, bits=128
        )
        with mpmath.workprec(128):
            assert abs(raw - red * mono) <= mpmath.mpf(2) ** -96 * (abs(raw) + 1)
