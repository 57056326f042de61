"""Real-root isolation at extreme dynamic range, and root/prediction matching.

Spectral polynomials at small q carry coefficients spanning hundreds of
orders of magnitude, which defeats floating eigenvalue methods.  Instead the
mpf coefficients (exact dyadic rationals) are converted to Fractions and the
whole isolation pipeline runs in exact arithmetic:

* Sturm chain over the (power-of-two) Cauchy bound interval counts the
  distinct real roots -- the count must equal the degree, otherwise the
  polynomial image itself was computed too coarsely and PrecisionError asks
  for a retry at doubled bits;
* interval splitting (optionally pre-cut between predicted root locations)
  isolates single roots;
* exact sign bisection refines each to relative width 2^-(bits//2).

On top of that sit the two-q exponent estimator (log-log slope per matched
root) and the prediction matcher used by the verification pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import mpmath

from .errors import DomainError, MatchingError, PrecisionError
from .qmono import as_fraction, to_mpf
from .spectral import EPoly, HeunParams, spectral_polynomial
from .ultra import PredictedRoot

__all__ = [
    "NumPoly",
    "RootEstimate",
    "MatchRow",
    "MatchReport",
    "find_real_roots",
    "find_spectral_roots",
    "estimate_exponents",
    "match_predictions",
    "real_roots_of_rational_poly",
]

_FPoly = list  # list[Fraction], degree-ascending


# ---------------------------------------------------------------------------
# exact polynomial core
# ---------------------------------------------------------------------------


def _strip(c: _FPoly) -> _FPoly:
    c = list(c)
    while c and not c[-1]:
        c.pop()
    return c


def _eval(c: _FPoly, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for a in reversed(c):
        acc = acc * x + a
    return acc


def _deriv(c: _FPoly) -> _FPoly:
    return [i * a for i, a in enumerate(c)][1:]


def _rem(a: _FPoly, b: _FPoly) -> _FPoly:
    a = list(a)
    db, lb = len(b) - 1, b[-1]
    while len(a) - 1 >= db:
        la = a[-1]
        if la:
            f = la / lb
            shift = len(a) - 1 - db
            for i in range(db):
                a[shift + i] -= f * b[i]
        a.pop()
    return _strip(a)


def _rescale(c: _FPoly) -> _FPoly:
    # positive rescaling keeps every sign; it only tames coefficient growth
    m = max(abs(a) for a in c)
    return [a / m for a in c]


def _sturm_chain(c: _FPoly) -> list[_FPoly]:
    chain = [c, _strip(_deriv(c))]
    while len(chain[-1]) > 1:
        r = _rem(chain[-2], chain[-1])
        if not r:
            break  # chain ends at a gcd; variation counts stay valid
        chain.append(_rescale([-a for a in r]))
    return chain


def _sign(x: Fraction) -> int:
    return (x > 0) - (x < 0)


def _variations(chain: list[_FPoly], x: Fraction) -> int:
    signs = []
    for c in chain:
        s = _sign(_eval(c, x))
        if s:
            signs.append(s)
    return sum(1 for i in range(1, len(signs)) if signs[i] != signs[i - 1])


def _pow2_at_least(x: Fraction) -> Fraction:
    k = x.numerator.bit_length() - x.denominator.bit_length() + 2
    return Fraction(2) ** k


def _cauchy_bound(c: _FPoly) -> Fraction:
    lead = abs(c[-1])
    body = max(abs(a) for a in c[:-1]) if len(c) > 1 else Fraction(0)
    return _pow2_at_least(1 + body / lead)


def _nonroot(c: _FPoly, x: Fraction, step: Fraction) -> Fraction:
    while _eval(c, x) == 0:
        x += step
    return x


def _isolate(
    chain: list[_FPoly], c: _FPoly, lo: Fraction, hi: Fraction, cuts: Sequence[Fraction]
) -> list[tuple[Fraction, Fraction]]:
    """Split (lo, hi) into open intervals holding exactly one distinct root
    each; lo, hi and every split point are non-roots."""
    nudge = (hi - lo) / 2 ** 24
    points = [lo]
    for cut in sorted(set(cuts)):
        if lo < cut < hi:
            points.append(_nonroot(c, cut, nudge))
    points.append(hi)
    var = {pt: _variations(chain, pt) for pt in points}
    stack = [
        (points[i], points[i + 1], var[points[i]], var[points[i + 1]])
        for i in range(len(points) - 1)
    ]
    out = []
    while stack:
        a, b, va, vb = stack.pop()
        n = va - vb
        if n <= 0:
            continue
        if n == 1:
            out.append((a, b))
            continue
        mid = _nonroot(c, (a + b) / 2, (b - a) / 2 ** 24)
        vm = _variations(chain, mid)
        stack.append((a, mid, va, vm))
        stack.append((mid, b, vm, vb))
    out.sort()
    return out


def _refine(c: _FPoly, a: Fraction, b: Fraction, bits: int) -> Fraction:
    """Bisect the single simple root inside (a, b) down to relative width
    2^-(bits//2) (absolute floor 2^-(2*bits) near zero)."""
    fa = _sign(_eval(c, a))
    fb = _sign(_eval(c, b))
    assert fa and fb and fa != fb, "bracket must straddle a simple root"
    rel = Fraction(1, 2 ** (bits // 2))
    floor_w = Fraction(1, 2 ** (2 * bits))
    while True:
        w = b - a
        scale = max(abs(a), abs(b))
        if w <= scale * rel or w <= floor_w:
            return (a + b) / 2
        # probing zero first makes an exact root at the origin exact in the
        # output (and splits a sign-straddling bracket well regardless)
        mid = Fraction(0) if a < 0 < b else (a + b) / 2
        s = _sign(_eval(c, mid))
        if s == 0:
            return mid
        if s == fa:
            a = mid
        else:
            b = mid


def _real_roots_fractions(
    coeffs: Sequence[Fraction], bits: int, cuts: Sequence[Fraction] = ()
) -> list[Fraction]:
    c = _strip(list(coeffs))
    if len(c) <= 1:
        raise DomainError("root isolation requires degree >= 1")
    deg = len(c) - 1
    chain = _sturm_chain(c)
    R = _cauchy_bound(c)
    total = _variations(chain, -R) - _variations(chain, R)
    if total != deg:
        raise PrecisionError(
            f"Sturm isolation found {total} distinct real roots for degree "
            f"{deg}; precision insufficient (or roots not real/simple)"
        )
    roots = [
        _refine(c, a, b, bits) for a, b in _isolate(chain, c, -R, R, cuts)
    ]
    return sorted(roots)


# ---------------------------------------------------------------------------
# mpf bridge
# ---------------------------------------------------------------------------


def _mpf_to_fraction(x) -> Fraction:
    if not isinstance(x, mpmath.mpf):
        with mpmath.workprec(max(mpmath.mp.prec, 64)):
            x = mpmath.mpf(x)
    if not mpmath.isfinite(x):
        raise DomainError(f"cannot convert non-finite value {x}")
    sign, man, exp, _ = x._mpf_
    man = int(man)
    if man == 0:
        return Fraction(0)
    v = Fraction(man) * Fraction(2) ** exp
    return -v if sign else v


def _fraction_to_mpf(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


# ---------------------------------------------------------------------------
# public surface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NumPoly:
    """Numeric image of a spectral polynomial at fixed q (degree-ascending
    mpf coefficients; q, t and the working precision are kept for reports)."""

    coeffs: tuple
    q: Fraction
    t1: Fraction
    t2: Fraction
    bits: int

    def __post_init__(self):
        if len(self.coeffs) < 2:
            raise DomainError("NumPoly requires degree >= 1")
        if self.coeffs[-1] == 0:
            raise PrecisionError("leading coefficient vanished at working precision")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def from_epoly(cls, ep: EPoly, q, t1, t2, bits: int = 512) -> "NumPoly":
        vals = ep.coefficient_values(q, t1, t2, bits=bits)
        return cls(tuple(vals), as_fraction(q), as_fraction(t1), as_fraction(t2), bits)


@dataclass
class RootEstimate:
    """One numerically isolated root with its empirical log-q exponent."""

    value: object
    q: Fraction
    est_exponent: object
    matched: Optional[PredictedRoot] = None
    rel_err: Optional[float] = None


def find_real_roots(poly: NumPoly, seeds: Sequence | None = None) -> list:
    """All real roots of ``poly``, sorted ascending.

    ``seeds`` (approximate root values, e.g. predicted magnitudes) pre-cut
    the isolation interval between consecutive seeds.  Raises PrecisionError
    when the Sturm count over the Cauchy interval is not the full degree;
    the caller should retry with the polynomial evaluated at more bits.
    """
    fracs = [_mpf_to_fraction(v) for v in poly.coeffs]
    cuts: list[Fraction] = []
    if seeds:
        svals = sorted(_mpf_to_fraction(to_mpf(s)) for s in seeds)
        cuts = [
            (svals[i] + svals[i + 1]) / 2
            for i in range(len(svals) - 1)
            if svals[i] != svals[i + 1]
        ]
    roots = _real_roots_fractions(fracs, poly.bits, cuts)
    with mpmath.workprec(poly.bits):
        return [_fraction_to_mpf(r) for r in roots]


def _prediction_seeds(p: HeunParams, predictions, q) -> list:
    with mpmath.workprec(128):
        lq = mpmath.log(to_mpf(q))
        vals = []
        for e in predictions:
            v = e.sign * e.prefactor_value(p.t1, p.t2) * mpmath.exp(to_mpf(e.d) * lq)
            vals.append(v)
    return vals


def find_spectral_roots(
    p: HeunParams,
    q,
    bits: int = 512,
    *,
    epoly: EPoly | None = None,
    predictions: Sequence[PredictedRoot] | None = None,
    max_bits: int = 4096,
) -> tuple[list, int]:
    """Roots of c_{N+1} at fixed q, doubling precision until isolation
    certifies degree-many distinct real roots.  Returns (roots, bits used).
    """
    ep = epoly if epoly is not None else spectral_polynomial(p)
    seeds = _prediction_seeds(p, predictions, q) if predictions else None
    b = bits
    while True:
        poly = NumPoly.from_epoly(ep, q, p.t1, p.t2, bits=b)
        try:
            return find_real_roots(poly, seeds), b
        except PrecisionError:
            if 2 * b > max_bits:
                raise
            b *= 2


def _sign_groups(roots) -> tuple[list, list]:
    neg = sorted([r for r in roots if r < 0])  # most negative first
    pos = sorted([r for r in roots if r > 0], reverse=True)
    if len(neg) + len(pos) != len(roots):
        raise MatchingError("zero root cannot be sign-matched")
    return neg, pos


def estimate_exponents(
    p: HeunParams,
    q1,
    q2,
    bits: int = 512,
    *,
    epoly: EPoly | None = None,
    predictions: Sequence[PredictedRoot] | None = None,
) -> list[RootEstimate]:
    """Pair the roots at q1 and q2 by sign and magnitude rank and estimate
    each exponent as the two-point log-log slope.

    Returned estimates carry the q2 (smaller q) root value; order is
    negatives then positives, each by descending magnitude.
    """
    q1, q2 = as_fraction(q1), as_fraction(q2)
    if not 0 < q2 < q1 < 1:
        raise DomainError(f"need 0 < q2 < q1 < 1, got q1={q1}, q2={q2}")
    ep = epoly if epoly is not None else spectral_polynomial(p)
    roots1, b1 = find_spectral_roots(p, q1, bits, epoly=ep, predictions=predictions)
    roots2, b2 = find_spectral_roots(p, q2, bits, epoly=ep, predictions=predictions)
    n1, p1 = _sign_groups(roots1)
    n2, p2 = _sign_groups(roots2)
    if len(n1) != len(n2):
        raise MatchingError(
            f"matching ambiguous: sign pattern differs between q1 and q2 "
            f"root lists\n  q1={q1}: {roots1}\n  q2={q2}: {roots2}"
        )
    out = []
    with mpmath.workprec(max(b1, b2)):
        dlq = mpmath.log(to_mpf(q2)) - mpmath.log(to_mpf(q1))
        for v1, v2 in zip(n1 + p1, n2 + p2):
            slope = (mpmath.log(abs(v2)) - mpmath.log(abs(v1))) / dlq
            out.append(RootEstimate(value=v2, q=q2, est_exponent=slope))
    return out


@dataclass
class MatchRow:
    estimate: Optional[RootEstimate]
    prediction: Optional[PredictedRoot]
    d_error: Optional[float]
    prefactor_ratio: object
    exponent_ok: bool
    prefactor_ok: Optional[bool]  # None when the prefactor is advisory only


@dataclass
class MatchReport:
    rows: list[MatchRow]
    ok: bool
    tol_exponent: float
    tol_prefactor: float


def _expand(predictions: Sequence[PredictedRoot]) -> list[PredictedRoot]:
    out = []
    for e in predictions:
        out.extend(
            [PredictedRoot(e.sign, e.d, e.prefactor, 1, e.sharp)] * e.multiplicity
        )
    return out


def _pref_mag(e: PredictedRoot) -> float:
    return 0.0 if isinstance(e.prefactor, str) else float(e.prefactor)


def match_predictions(
    estimates: Sequence[RootEstimate],
    predictions: Sequence[PredictedRoot],
    tol_exponent: float = 0.05,
    tol_prefactor: float = 0.01,
    *,
    t1=1,
    t2=1,
    enforce: str = "explicit",
) -> MatchReport:
    """Assign estimates to predictions by sign and exponent order.

    Every row reports the exponent error and the prefactor ratio
    value / (sign * prefactor * q^d).  The exponent tolerance always gates;
    the prefactor tolerance gates per ``enforce``: "explicit" (default)
    checks refined numeric prefactors only, "sharp" additionally checks the
    t1-backed limit constants (meaningful for small q, where subleading
    corrections sit below the tolerance), "none" reports ratios without
    gating.  Unmatched roots on either side produce failing rows, never
    silence.
    """
    if enforce not in ("explicit", "sharp", "none"):
        raise DomainError(f"unknown enforce mode {enforce!r}")
    expanded = _expand(predictions)
    pred_neg = sorted(
        (e for e in expanded if e.sign < 0), key=lambda e: (e.d, -_pref_mag(e))
    )
    pred_pos = sorted(
        (e for e in expanded if e.sign > 0), key=lambda e: (e.d, -_pref_mag(e))
    )
    est_neg = [e for e in estimates if e.value < 0]
    est_pos = [e for e in estimates if e.value > 0]
    est_neg.sort(key=lambda e: abs(e.value), reverse=True)
    est_pos.sort(key=lambda e: abs(e.value), reverse=True)

    rows: list[MatchRow] = []
    ok = True
    for ests, preds in ((est_neg, pred_neg), (est_pos, pred_pos)):
        for i in range(max(len(ests), len(preds))):
            est = ests[i] if i < len(ests) else None
            pred = preds[i] if i < len(preds) else None
            if est is None or pred is None:
                rows.append(MatchRow(est, pred, None, None, False, None))
                ok = False
                continue
            derr = abs(float(est.est_exponent) - float(pred.d))
            with mpmath.workprec(192):
                scale = pred.sign * pred.prefactor_value(t1, t2) * mpmath.exp(
                    to_mpf(pred.d) * mpmath.log(to_mpf(est.q))
                )
                ratio = to_mpf(est.value) / scale
            exponent_ok = derr <= tol_exponent
            gate = (enforce == "sharp" and pred.sharp) or (
                enforce == "explicit" and not isinstance(pred.prefactor, str)
            )
            prefactor_ok = abs(ratio - 1) <= tol_prefactor if gate else None
            est.matched = pred
            est.rel_err = derr
            if not exponent_ok or prefactor_ok is False:
                ok = False
            rows.append(MatchRow(est, pred, derr, ratio, exponent_ok, prefactor_ok))
    return MatchReport(rows, ok, tol_exponent, tol_prefactor)


def real_roots_of_rational_poly(coeffs: Sequence, bits: int = 256) -> list:
    """Exact real roots of a rational-coefficient polynomial (all roots must
    be real and simple, else PrecisionError)."""
    fracs = [as_fraction(c) for c in coeffs]
    roots = _real_roots_fractions(fracs, bits)
    with mpmath.workprec(bits):
        return [_fraction_to_mpf(r) for r in roots]
