"""q-Heun parameters, the exact three-term recursion and its oracles.

The q-Heun operator used throughout is

    (x - q^{h1+1/2} t1)(x - q^{h2+1/2} t2) g(x/q)
    + q^{a1+a2} (x - q^{l1-1/2} t1)(x - q^{l2-1/2} t2) g(qx)
    - [ (q^{a1}+q^{a2}) x^2 + E x
        + q^{(h1+h2+l1+l2+a1+a2)/2} (q^{b/2}+q^{-b/2}) t1 t2 ] g(x) = 0 ,

with accessory parameter E.  Writing g(x) = x^lambda1 * sum c_n(E) x^n with
lambda1 = (h1+h2-l1-l2-a1-a2-b+2)/2 turns the equation into a three-term
recursion

    A_n c_n = (B_n E + C_n) c_{n-1} - D_n c_{n-2},      c_0 = 1, c_{-1} = 0,

    A_n = t1 t2 q^{h1+h2} (1-q^n)(1-q^{n-b})
    B_n = q^{n-1+lambda1}
    C_n = q^{1/2}(q^{h1} t1 + q^{h2} t2)
          + (q^{l1} t1 + q^{l2} t2) q^{2(n+lambda1)+a1+a2-5/2}
    D_n = q (1-q^{n-2+lambda1+a1})(1-q^{n-2+lambda1+a2}) .

With N := -lambda1 - a1 a nonnegative integer, c_{N+1}(E) is the spectral
polynomial: at each of its roots the series terminates at degree N and the
truncated series solves the equation exactly, which is what residual_check
verifies numerically.

Division by A_n is not closed in the q-monomial ring, so exact coefficients
are carried as EPoly: a numerator polynomial over a structured denominator
(monomial times a product of (1-q^e) factors, every e > 0).  Each factor
tends to 1 as q -> +0, hence all leading-term analysis reads the numerator
and the monomial only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath

from .errors import DomainError, ParameterError
from .qmono import (
    EVAL_GUARD_BITS,
    CancellationEvent,
    EXACT_ZERO,
    QMonomial,
    QSum,
    SIGN_CONFLICT,
    UNIT_MONOMIAL,
    as_fraction,
    eval_terms,
    leading_part,
    to_mpf,
)

__all__ = [
    "HeunParams",
    "EPoly",
    "SeriesSolution",
    "derive",
    "recursion_coeff_rows",
    "coefficients_exact",
    "spectral_polynomial",
    "coefficients_numeric",
    "series_coefficient_values",
    "residual_check",
]

_HALF = Fraction(1, 2)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeunParams:
    """Validated q-Heun parameter set with the derived lambda1 and N."""

    h1: Fraction
    h2: Fraction
    l1: Fraction
    l2: Fraction
    alpha1: Fraction
    alpha2: Fraction
    beta: Fraction
    t1: Fraction
    t2: Fraction
    lambda1: Fraction
    N: int

    _FIELD_NAMES = ("h1", "h2", "l1", "l2", "alpha1", "alpha2", "beta", "t1", "t2")

    def raw(self) -> dict[str, Fraction]:
        """The nine defining fields, keyed by name."""
        return {k: getattr(self, k) for k in self._FIELD_NAMES}

    def with_value(self, name: str, value) -> "HeunParams":
        """Re-derive with one field replaced (re-runs all validation)."""
        raw = self.raw()
        if name not in raw:
            raise ParameterError([f"unknown parameter '{name}'"])
        raw[name] = as_fraction(value)
        return derive(**raw)


def derive(h1, h2, l1, l2, alpha1, alpha2, beta, t1, t2) -> HeunParams:
    """Validate the nine parameters and compute lambda1 and N.

    Every violated condition is reported by name in a single ParameterError.
    """
    h1, h2, l1, l2 = map(as_fraction, (h1, h2, l1, l2))
    a1, a2, beta = map(as_fraction, (alpha1, alpha2, beta))
    t1, t2 = as_fraction(t1), as_fraction(t2)

    lam = (h1 + h2 - l1 - l2 - a1 - a2 - beta + 2) / 2
    nf = -lam - a1

    violations = []
    n_ok = nf.denominator == 1 and nf >= 0
    if not n_ok:
        violations.append(
            f"N = {nf} is not a nonnegative integer (N := -lambda1 - alpha1)"
        )
    if t1 <= 0:
        violations.append(f"t1 = {t1} must be positive")
    if t2 <= 0:
        violations.append(f"t2 = {t2} must be positive")
    if beta >= 1:
        violations.append(f"beta = {beta} violates beta < 1")
    if a2 - a1 >= 1:
        violations.append(f"alpha2 - alpha1 = {a2 - a1} violates alpha2 - alpha1 < 1")
    if h1 >= h2:
        violations.append(f"h1 = {h1}, h2 = {h2} violate h1 < h2")
    if l1 >= l2:
        violations.append(f"l1 = {l1}, l2 = {l2} violate l1 < l2")
    if n_ok and beta.denominator == 1 and 1 <= beta <= nf + 1:
        violations.append(f"beta = {beta} lies in the excluded set {{1..N+1}}")
    if violations:
        raise ParameterError(violations)
    return HeunParams(h1, h2, l1, l2, a1, a2, beta, t1, t2, lam, int(nf))


# ---------------------------------------------------------------------------
# recursion rows
# ---------------------------------------------------------------------------


def _check_n(p: HeunParams, n: int) -> None:
    if not 1 <= n <= p.N + 1:
        raise DomainError(f"recursion index n = {n} outside 1..N+1 = 1..{p.N + 1}")


def a_row_structured(p: HeunParams, n: int) -> tuple[QMonomial, tuple[Fraction, Fraction]]:
    """A_n as monomial t1 t2 q^{h1+h2} times factors (1-q^n)(1-q^{n-beta}).

    Both factor exponents are positive under the standing assumptions
    (n >= 1, beta < 1), so A_n never vanishes for q in (0,1).
    """
    _check_n(p, n)
    return (
        QMonomial(p.h1 + p.h2, 1, 1, Fraction(1)),
        (Fraction(n), n - p.beta),
    )


def recursion_coeff_rows(p: HeunParams, n: int) -> tuple[QSum, QSum, QSum, QSum]:
    """The exact rows (A, B, C, D) of step n, each expanded as a QSum."""
    _check_n(p, n)
    lam = p.lambda1
    mono, (e1, e2) = a_row_structured(p, n)
    A = QSum((mono,)) * (
        QSum.term(1)
        - QSum.term(1, qexp=e1)
        - QSum.term(1, qexp=e2)
        + QSum.term(1, qexp=e1 + e2)
    )
    B = QSum.term(1, qexp=n - 1 + lam)
    ce = 2 * (n + lam) + p.alpha1 + p.alpha2 - Fraction(5, 2)
    C = (
        QSum.term(1, t1pow=1, qexp=_HALF + p.h1)
        + QSum.term(1, t2pow=1, qexp=_HALF + p.h2)
        + QSum.term(1, t1pow=1, qexp=p.l1 + ce)
        + QSum.term(1, t2pow=1, qexp=p.l2 + ce)
    )
    d1 = n - 2 + lam + p.alpha1
    d2 = n - 2 + lam + p.alpha2
    D = (
        QSum.term(1, qexp=1)
        - QSum.term(1, qexp=1 + d1)
        - QSum.term(1, qexp=1 + d2)
        + QSum.term(1, qexp=1 + d1 + d2)
    )
    return A, B, C, D


# ---------------------------------------------------------------------------
# EPoly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EPoly:
    """Polynomial in E with QSum coefficients over a structured denominator.

    Represented value:  sum_j coeffs[j] E^j / (denom_monomial * prod_e (1-q^e))
    with every e in denom_factors positive.  Because each (1-q^e) -> 1 as
    q -> +0 and 1/prod(1-q^e) = 1 + (strictly positive powers of q), the
    leading slice of the true E^j coefficient equals the leading slice of
    coeffs[j] / denom_monomial.
    """

    coeffs: tuple[QSum, ...]
    denom_monomial: QMonomial = UNIT_MONOMIAL
    denom_factors: tuple[Fraction, ...] = ()

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("EPoly needs at least one coefficient")
        if len(self.coeffs) > 1 and self.coeffs[-1].is_zero():
            raise ValueError("EPoly top coefficient must be nonzero")
        if any(e <= 0 for e in self.denom_factors):
            raise ValueError("denominator factors (1-q^e) require e > 0")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def reduced_coefficient(self, j: int) -> QSum:
        """coeffs[j] / denom_monomial.

        This equals the true E^j coefficient times prod(1-q^e); leading
        parts, equiv_sim and equiv_approx are unaffected by that factor.
        """
        return self.coeffs[j].div_monomial(self.denom_monomial)

    def leading_coefficient_slice(self, j: int) -> QSum:
        """Leading slice of the true E^j coefficient (exact, with t powers)."""
        return leading_part(self.coeffs[j]).div_monomial(self.denom_monomial)

    def coefficient_values(self, q, t1, t2, bits: int = 512) -> list:
        """True numeric E^j coefficient values at fixed q in (0,1)."""
        with mpmath.workprec(bits + EVAL_GUARD_BITS):
            qv = to_mpf(q)
            if not (0 < qv < 1):
                raise DomainError(f"q must lie in (0,1), got {q}")
            t1v, t2v = to_mpf(t1), to_mpf(t2)
            lq = mpmath.log(qv)
            m = self.denom_monomial
            den = to_mpf(m.coeff) * mpmath.exp(to_mpf(m.qexp) * lq)
            if m.t1pow:
                den *= t1v ** m.t1pow
            if m.t2pow:
                den *= t2v ** m.t2pow
            for e in self.denom_factors:
                den *= 1 - mpmath.exp(to_mpf(e) * lq)
            vals = [eval_terms(c, qv, t1v, t2v, lq) / den for c in self.coeffs]
        with mpmath.workprec(bits):
            return [+v for v in vals]

    def eval_at(self, E, q, t1, t2, bits: int = 512):
        """Horner evaluation of the polynomial at numeric E."""
        vals = self.coefficient_values(q, t1, t2, bits=bits + EVAL_GUARD_BITS)
        with mpmath.workprec(bits + EVAL_GUARD_BITS):
            Ev = to_mpf(E)
            acc = mpmath.mpf(0)
            for v in reversed(vals):
                acc = acc * Ev + v
        with mpmath.workprec(bits):
            return +acc


# ---------------------------------------------------------------------------
# exact coefficient pipeline
#
# Internally the recursion runs on dicts keyed by (qexp*D, t1pow, t2pow) with
# integer-scaled exponents: D = 2*lcm(parameter denominators) clears every
# exponent the rows can produce, and integer keys keep the merge cheap.
# ---------------------------------------------------------------------------

_TermDict = dict  # dict[tuple[int, int, int], Fraction]


def _scale_den(p: HeunParams) -> int:
    return 2 * math.lcm(
        p.h1.denominator,
        p.h2.denominator,
        p.l1.denominator,
        p.l2.denominator,
        p.alpha1.denominator,
        p.alpha2.denominator,
        p.beta.denominator,
    )


def _sc(e: Fraction, D: int) -> int:
    v = e * D
    if v.denominator != 1:
        raise AssertionError(f"exponent {e} not in (1/{D})Z")
    return v.numerator


def _dadd(d: _TermDict, k, c: Fraction) -> None:
    if k in d:
        nc = d[k] + c
        if nc:
            d[k] = nc
        else:
            del d[k]
    elif c:
        d[k] = c


def _dmul(a: _TermDict, b: _TermDict) -> _TermDict:
    out: _TermDict = {}
    get = out.get
    for (ka0, ka1, ka2), ca in a.items():
        for (kb0, kb1, kb2), cb in b.items():
            k = (ka0 + kb0, ka1 + kb1, ka2 + kb2)
            prev = get(k)
            out[k] = ca * cb if prev is None else prev + ca * cb
    return {k: c for k, c in out.items() if c}


def _dneg(a: _TermDict) -> _TermDict:
    return {k: -c for k, c in a.items()}


def _dmerge(parts: Sequence[_TermDict], site: str, events: list, D: int) -> _TermDict:
    acc: _TermDict = {}
    multi = set()
    for part in parts:
        for k, c in part.items():
            if k in acc:
                multi.add(k)
                acc[k] += c
            else:
                acc[k] = c
    for k in multi:
        if not acc[k]:
            events.append(CancellationEvent(site, Fraction(k[0], D), EXACT_ZERO))
    cleaned = {k: c for k, c in acc.items() if c}
    if cleaned:
        lead = min(k[0] for k in cleaned)
        pos = neg = False
        for k, c in cleaned.items():
            if k[0] == lead:
                if c > 0:
                    pos = True
                else:
                    neg = True
        if pos and neg:
            events.append(CancellationEvent(site, Fraction(lead, D), SIGN_CONFLICT))
    return cleaned


def _rows_scaled(p: HeunParams, n: int, D: int):
    lam = p.lambda1
    A: _TermDict = {}
    hh = p.h1 + p.h2
    _dadd(A, (_sc(hh, D), 1, 1), Fraction(1))
    _dadd(A, (_sc(hh + n, D), 1, 1), Fraction(-1))
    _dadd(A, (_sc(hh + n - p.beta, D), 1, 1), Fraction(-1))
    _dadd(A, (_sc(hh + 2 * n - p.beta, D), 1, 1), Fraction(1))
    B: _TermDict = {(_sc(n - 1 + lam, D), 0, 0): Fraction(1)}
    C: _TermDict = {}
    ce = 2 * (n + lam) + p.alpha1 + p.alpha2 - Fraction(5, 2)
    _dadd(C, (_sc(_HALF + p.h1, D), 1, 0), Fraction(1))
    _dadd(C, (_sc(_HALF + p.h2, D), 0, 1), Fraction(1))
    _dadd(C, (_sc(p.l1 + ce, D), 1, 0), Fraction(1))
    _dadd(C, (_sc(p.l2 + ce, D), 0, 1), Fraction(1))
    Dd: _TermDict = {}
    d1 = n - 2 + lam + p.alpha1
    d2 = n - 2 + lam + p.alpha2
    _dadd(Dd, (_sc(Fraction(1), D), 0, 0), Fraction(1))
    _dadd(Dd, (_sc(1 + d1, D), 0, 0), Fraction(-1))
    _dadd(Dd, (_sc(1 + d2, D), 0, 0), Fraction(-1))
    _dadd(Dd, (_sc(1 + d1 + d2, D), 0, 0), Fraction(1))
    return A, B, C, Dd


def _dict_to_qsum(d: _TermDict, D: int) -> QSum:
    return QSum(
        QMonomial(Fraction(k0, D), k1, k2, c) for (k0, k1, k2), c in d.items()
    )


def _denominator_for(p: HeunParams, n: int) -> tuple[QMonomial, tuple[Fraction, ...]]:
    mono = QMonomial(n * (p.h1 + p.h2), n, n, Fraction(1))
    factors = sorted(
        [Fraction(k) for k in range(1, n + 1)]
        + [k - p.beta for k in range(1, n + 1)]
    )
    return mono, tuple(factors)


def coefficients_exact(
    p: HeunParams, up_to: int | None = None
) -> tuple[list[EPoly], list[CancellationEvent]]:
    """Exact c_0 .. c_up_to with cancellation diagnostics.

    Per step n and E-degree j, the three contributions
    B*c_{n-1}[j-1], C*c_{n-1}[j] and -(D*A_{n-1})*c_{n-2}[j] are merged in a
    single pass; the recorded events are the right-hand-side cancellation
    diagnostics the leading-term propositions are about.  The exact result
    itself is always correct, events or not.
    """
    if up_to is None:
        up_to = p.N + 1
    if not 0 <= up_to <= p.N + 1:
        raise DomainError(f"up_to = {up_to} outside 0..N+1 = 0..{p.N + 1}")
    D = _scale_den(p)
    events: list[CancellationEvent] = []
    levels: list[list[_TermDict]] = [[{(0, 0, 0): Fraction(1)}]]
    prev_A: _TermDict | None = None
    for n in range(1, up_to + 1):
        A, B, C, Dd = _rows_scaled(p, n, D)
        prev = levels[n - 1]
        prev2 = levels[n - 2] if n >= 2 else None
        DA = _dmul(Dd, prev_A) if n >= 2 else None
        new: list[_TermDict] = []
        for j in range(n + 1):
            parts = []
            if j >= 1:
                parts.append(_dmul(B, prev[j - 1]))
            if j < len(prev):
                parts.append(_dmul(C, prev[j]))
            if prev2 is not None and j < len(prev2):
                parts.append(_dneg(_dmul(DA, prev2[j])))
            new.append(_dmerge(parts, f"c{n}[E^{j}]", events, D))
        if not new[n]:
            raise AssertionError(f"degree invariant failed: c_{n} has degree < {n}")
        levels.append(new)
        prev_A = A
    polys = []
    for n, dicts in enumerate(levels):
        mono, factors = _denominator_for(p, n)
        polys.append(
            EPoly(tuple(_dict_to_qsum(d, D) for d in dicts), mono, factors)
        )
    return polys, events


def spectral_polynomial(p: HeunParams) -> EPoly:
    """The degree-(N+1) polynomial whose roots admit terminating series."""
    polys, _ = coefficients_exact(p, p.N + 1)
    return polys[-1]


# ---------------------------------------------------------------------------
# numeric pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesSolution:
    """Truncated series data x^lambda1 * sum_{n=0}^{N} coeffs[n] x^n at E0."""

    lambda1: Fraction
    coeffs: tuple
    E0: object
    q: Fraction
    t1: Fraction
    t2: Fraction
    bits: int


def series_coefficient_values(p: HeunParams, E0, q, bits: int = 512, up_to: int | None = None):
    """c_0(E0) .. c_up_to(E0) by running the recursion in fixed precision.

    The rows are evaluated literally at the numeric q; A_n > 0 throughout
    (q in (0,1), n >= 1, beta < 1), so the division is always defined.
    """
    if up_to is None:
        up_to = p.N
    lam = p.lambda1
    with mpmath.workprec(bits + EVAL_GUARD_BITS):
        qv = to_mpf(q)
        if not (0 < qv < 1):
            raise DomainError(f"q must lie in (0,1), got {q}")
        t1v, t2v = to_mpf(p.t1), to_mpf(p.t2)
        E0v = to_mpf(E0)
        lq = mpmath.log(qv)

        def qp(e):
            return mpmath.exp(to_mpf(e) * lq)

        cs = [mpmath.mpf(1)]
        cm2, cm1 = mpmath.mpf(0), mpmath.mpf(1)
        for n in range(1, up_to + 1):
            Av = t1v * t2v * qp(p.h1 + p.h2) * (1 - qp(n)) * (1 - qp(n - p.beta))
            assert Av != 0, "A row vanished; outside the validated domain"
            Bv = qp(n - 1 + lam)
            ce = 2 * (n + lam) + p.alpha1 + p.alpha2 - Fraction(5, 2)
            Cv = qp(_HALF) * (qp(p.h1) * t1v + qp(p.h2) * t2v) + (
                qp(p.l1) * t1v + qp(p.l2) * t2v
            ) * qp(ce)
            Dv = qv * (1 - qp(n - 2 + lam + p.alpha1)) * (1 - qp(n - 2 + lam + p.alpha2))
            cn = ((Bv * E0v + Cv) * cm1 - Dv * cm2) / Av
            cs.append(cn)
            cm2, cm1 = cm1, cn
    with mpmath.workprec(bits):
        return [+c for c in cs]


def coefficients_numeric(p: HeunParams, E0, q, bits: int = 512) -> SeriesSolution:
    """Series coefficients c_0..c_N of the (candidate) terminating solution."""
    vals = series_coefficient_values(p, E0, q, bits=bits, up_to=p.N)
    with mpmath.workprec(bits):
        e0 = +to_mpf(E0)
    return SeriesSolution(
        p.lambda1, tuple(vals), e0, as_fraction(q), p.t1, p.t2, bits
    )


def residual_check(
    p: HeunParams,
    sol: SeriesSolution,
    xs: Sequence | None = None,
    bits: int | None = None,
):
    """Largest relative residual of the q-Heun operator applied to the series.

    Evaluates the operator's three groups at each sample x and divides the
    absolute sum by the largest group magnitude.  Default samples
    {t1 q^{1/2}, t1, t1 q^{-1/2}} spread across the relevant scales.
    """
    if bits is None:
        bits = sol.bits
    lam = p.lambda1
    with mpmath.workprec(bits + EVAL_GUARD_BITS):
        qv = to_mpf(sol.q)
        t1v, t2v = to_mpf(sol.t1), to_mpf(sol.t2)
        E0v = to_mpf(sol.E0)
        lq = mpmath.log(qv)

        def qp(e):
            return mpmath.exp(to_mpf(e) * lq)

        coeffs = [to_mpf(c) for c in sol.coeffs]
        abs_coeffs = [abs(c) for c in coeffs]

        def _horner(cs, x):
            acc = mpmath.mpf(0)
            for c in reversed(cs):
                acc = acc * x + c
            return acc

        def f(x):
            return mpmath.exp(to_mpf(lam) * mpmath.log(x)) * _horner(coeffs, x)

        def f_abs(x):
            return mpmath.exp(to_mpf(lam) * mpmath.log(x)) * _horner(abs_coeffs, x)

        if xs is None:
            xs = [t1v * qp(_HALF), t1v, t1v * qp(-_HALF)]
        else:
            xs = [to_mpf(x) for x in xs]

        const = qp((p.h1 + p.h2 + p.l1 + p.l2 + p.alpha1 + p.alpha2) / 2) * (
            qp(p.beta / 2) + qp(-p.beta / 2)
        ) * t1v * t2v
        worst = mpmath.mpf(0)
        for x in xs:
            g_up = f(x / qv)
            g_dn = f(x * qv)
            g_0 = f(x)
            a1f, a2f = qp(p.h1 + _HALF) * t1v, qp(p.h2 + _HALF) * t2v
            b1f, b2f = qp(p.l1 - _HALF) * t1v, qp(p.l2 - _HALF) * t2v
            pref2 = qp(p.alpha1 + p.alpha2)
            term1 = (x - a1f) * (x - a2f) * g_up
            term2 = pref2 * (x - b1f) * (x - b2f) * g_dn
            term3 = -((qp(p.alpha1) + qp(p.alpha2)) * x * x + E0v * x + const) * g_0
            # scale by the pre-cancellation magnitudes: a sample x may sit at
            # a zero of a factor group or of the series itself, where the
            # grouped values say nothing about the working magnitude
            scale = max(
                (x + a1f) * (x + a2f) * f_abs(x / qv),
                pref2 * (x + b1f) * (x + b2f) * f_abs(x * qv),
                ((qp(p.alpha1) + qp(p.alpha2)) * x * x + abs(E0v) * x + const)
                * f_abs(x),
            )
            rel = abs(term1 + term2 + term3) / scale
            worst = max(worst, rel)
    with mpmath.workprec(bits):
        return +worst
